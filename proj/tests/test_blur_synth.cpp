#include <gtest/gtest.h>

#include <fstream>

#include "deblur/blur_synth.hpp"
#include "deblur/dataset.hpp"
#include "deblur/metrics.hpp"
#include "test_support.hpp"

using namespace deblur;
using namespace deblur::testing;

TEST(BlurKernel, LengthOneIsDelta) {
    for (double angle : {0.0, 30.0, 90.0, 145.0}) {
        auto k = make_linear_kernel(1, angle, 3);
        EXPECT_NEAR(k.weights[1][1].item<double>(), 1.0, 1e-12);
        EXPECT_NEAR(k.weights.sum().item<double>(), 1.0, 1e-9);
    }
}

TEST(BlurKernel, HorizontalLengthThreeIsUniformRow) {
    auto k = make_linear_kernel(3, 0.0, 3);
    for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(k.weights[1][c].item<double>(), 1.0 / 3.0, 1e-9);
    EXPECT_NEAR(k.weights[0].sum().item<double>(), 0.0, 1e-9);
    EXPECT_NEAR(k.weights[2].sum().item<double>(), 0.0, 1e-9);
}

TEST(BlurKernel, DiagonalSupportAndNormalization) {
    auto k = make_linear_kernel(5, 45.0, 7);
    EXPECT_NEAR(k.weights.sum().item<double>(), 1.0, 1e-9);
    // all mass within one cell of the main diagonal
    auto acc = k.weights.accessor<double, 2>();
    double off_band = 0.0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j)
            if (std::abs(i - j) > 1) off_band += acc[i][j];
    EXPECT_NEAR(off_band, 0.0, 1e-9);
    k.validate();
}

TEST(BlurKernel, KernelsSumToOneAcrossParameters) {
    for (int64_t len : {1, 2, 3, 5, 9, 15})
        for (double angle : {0.0, 17.0, 45.0, 90.0, 133.0, 179.0}) {
            auto k = make_linear_kernel(len, angle, 2 * ((len | 1) / 2) + 1);
            EXPECT_NEAR(k.weights.sum().item<double>(), 1.0, 1e-9)
                << "len " << len << " angle " << angle;
            EXPECT_GE(k.weights.min().item<double>(), 0.0);
        }
}

TEST(BlurKernel, PreconditionErrors) {
    EXPECT_THROW(make_linear_kernel(3, 0.0, 4), std::invalid_argument);  // even size
    EXPECT_THROW(make_linear_kernel(9, 0.0, 7), std::invalid_argument);  // length > size
    EXPECT_THROW(make_linear_kernel(0, 0.0, 3), std::invalid_argument);
}

TEST(ApplyBlur, ConstantImageIsFixedPoint) {
    ImageTensor c{torch::full({16, 16, 3}, 93.0f), RangeTag::Byte};
    auto out = apply_blur(c, make_linear_kernel(7, 30.0, 9));
    EXPECT_LE((out.data - c.data).abs().max().item<double>(), 1e-4);
}

TEST(ApplyBlur, DeltaKernelIsIdentity) {
    ImageTensor img = random_byte_image(16, 16, 9);
    auto out = apply_blur(img, make_linear_kernel(1, 0.0, 3));
    EXPECT_LE((out.data - img.data).abs().max().item<double>(), 1e-4);
}

TEST(ApplyBlur, MatchesNaiveConvolutionOracle) {
    ImageTensor img = random_byte_image(16, 16, 11);
    auto kernel = make_linear_kernel(3, 0.0, 3);
    auto fast = apply_blur(img, kernel);
    auto slow = naive_convolve(img, kernel.weights);
    EXPECT_LE((fast.data - slow.data).abs().max().item<double>(), 1e-3);
}

TEST(ApplyBlur, MatchesOracleOnAngledKernel) {
    ImageTensor img = random_byte_image(16, 16, 12);
    auto kernel = make_linear_kernel(5, 60.0, 7);
    auto fast = apply_blur(img, kernel);
    auto slow = naive_convolve(img, kernel.weights);
    EXPECT_LE((fast.data - slow.data).abs().max().item<double>(), 1e-3);
}

TEST(ApplyBlur, EnergyConservation) {
    ImageTensor img = smooth_byte_image(64, 64, 21);
    auto out = apply_blur(img, make_linear_kernel(7, 40.0, 9));
    double mean_in = img.data.mean().item<double>();
    double mean_out = out.data.mean().item<double>();
    EXPECT_NEAR(mean_in, mean_out, 1e-1);  // interior-dominated, byte scale
}

TEST(ApplyBlur, MonotoneDegradationWithLength) {
    ImageTensor img = smooth_byte_image(96, 96, 33);
    double prev = std::numeric_limits<double>::infinity();
    for (int64_t len : {1, 3, 7, 15}) {
        auto blurred = apply_blur(img, make_linear_kernel(len, 25.0, 17));
        double p = psnr(blurred, img);
        EXPECT_LE(p, prev + 0.1) << "PSNR increased at length " << len;
        prev = p;
    }
}

TEST(SynthesizePairs, WritesPairsAndDeterministic) {
    TempDir sharp_dir("synth_src"), out_a("synth_a"), out_b("synth_b");
    save_image(smooth_byte_image(80, 96, 5), (sharp_dir.path() / "one.png").string());
    int64_t n = synthesize_pairs(sharp_dir.str(), out_a.str(), {5, 15}, 7);
    EXPECT_EQ(n, 1);
    auto blurred = load_image((out_a.path() / "blur" / "one.png").string());
    auto sharp = load_image((out_a.path() / "sharp" / "one.png").string());
    EXPECT_FALSE(torch::equal(blurred.data, sharp.data));

    synthesize_pairs(sharp_dir.str(), out_b.str(), {5, 15}, 7);
    auto read = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    EXPECT_EQ(read((out_a.path() / "blur" / "one.png").string()),
              read((out_b.path() / "blur" / "one.png").string()));
}

TEST(SynthesizePairs, EmptyDirectoryThrows) {
    TempDir empty("synth_empty"), out("synth_out");
    EXPECT_THROW(synthesize_pairs(empty.str(), out.str(), {5, 15}, 1), std::runtime_error);
}

TEST(SynthesizePairs, NontrivialBlurDegradesPsnr) {
    TempDir sharp_dir("synth_deg"), out("synth_deg_out");
    for (int i = 0; i < 8; ++i)
        save_image(smooth_byte_image(64, 80, 40 + i),
                   (sharp_dir.path() / ("img" + std::to_string(i) + ".png")).string());
    EXPECT_EQ(synthesize_pairs(sharp_dir.str(), out.str(), {5, 15}, 3), 8);
    auto ds = discover(out.str());
    double sum = 0.0;
    for (size_t i = 0; i < ds.size(); ++i) {
        auto pair = ds.load(i);
        sum += psnr(pair.blurred, pair.sharp);
    }
    EXPECT_LT(sum / static_cast<double>(ds.size()), 35.0);
}
