#ifndef DEBLUR_BLUR_SYNTH_HPP
#define DEBLUR_BLUR_SYNTH_HPP

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/imaging.hpp"
#include "deblur/rng.hpp"

namespace deblur {

// Normalized linear motion PSF.
struct BlurKernel {
    torch::Tensor weights;  // (k, k) float64, sums to 1
    int64_t length = 1;
    double angle_deg = 0.0;

    int64_t size() const { return weights.size(0); }

    void validate() const {
        if (weights.dim() != 2 || weights.size(0) != weights.size(1))
            throw std::invalid_argument("BlurKernel: weights must be square");
        if (weights.size(0) % 2 == 0)
            throw std::invalid_argument("BlurKernel: size must be odd");
        double sum = weights.sum().item<double>();
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("BlurKernel: weights must sum to 1");
        if (weights.min().item<double>() < 0.0)
            throw std::invalid_argument("BlurKernel: negative weight");
    }
};

// Rasterizes a centered line segment: `length` unit-spaced samples along the
// given angle, each splatted bilinearly onto the grid, then normalized.
inline BlurKernel make_linear_kernel(int64_t length, double angle_deg, int64_t size) {
    if (size % 2 == 0) throw std::invalid_argument("make_linear_kernel: size must be odd");
    if (length < 1) throw std::invalid_argument("make_linear_kernel: length must be >= 1");
    if (length > size)
        throw std::invalid_argument("make_linear_kernel: length " + std::to_string(length) +
                                    " exceeds kernel size " + std::to_string(size));
    auto w = torch::zeros({size, size}, torch::kFloat64);
    auto acc = w.accessor<double, 2>();
    const double rad = angle_deg * M_PI / 180.0;
    const double dx = std::cos(rad), dy = std::sin(rad);
    const int64_t center = size / 2;
    const double half = (static_cast<double>(length) - 1.0) / 2.0;
    for (int64_t i = 0; i < length; ++i) {
        double t = static_cast<double>(i) - half;
        double x = center + t * dx;
        double y = center + t * dy;
        int64_t x0 = static_cast<int64_t>(std::floor(x));
        int64_t y0 = static_cast<int64_t>(std::floor(y));
        double fx = x - x0, fy = y - y0;
        for (int64_t oy = 0; oy <= 1; ++oy)
            for (int64_t ox = 0; ox <= 1; ++ox) {
                int64_t xi = x0 + ox, yi = y0 + oy;
                if (xi < 0 || xi >= size || yi < 0 || yi >= size) continue;
                double wgt = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
                acc[yi][xi] += wgt;
            }
    }
    w /= w.sum();
    return {w, length, angle_deg};
}

// Per-channel 2-D correlation with reflect boundary; the kernels here are
// point-symmetric so correlation and convolution coincide.
inline ImageTensor apply_blur(const ImageTensor& img, const BlurKernel& kernel) {
    img.validate();
    kernel.validate();
    const int64_t k = kernel.size();
    const int64_t pad = k / 2;
    // convolve in double so the result is exact to well below byte resolution
    auto chw = img.data.to(torch::kFloat64).permute({2, 0, 1}).unsqueeze(0);  // (1,3,H,W)
    auto mode = (pad < img.height() && pad < img.width())
                    ? torch::nn::functional::PadFuncOptions::mode_t(torch::kReflect)
                    : torch::nn::functional::PadFuncOptions::mode_t(torch::kReplicate);
    auto padded = torch::nn::functional::pad(
        chw, torch::nn::functional::PadFuncOptions({pad, pad, pad, pad}).mode(mode));
    auto weight = kernel.weights.view({1, 1, k, k}).repeat({3, 1, 1, 1});
    auto out = torch::nn::functional::conv2d(
        padded, weight, torch::nn::functional::Conv2dFuncOptions().groups(3));
    out = out.squeeze(0).permute({1, 2, 0}).to(torch::kFloat32).contiguous();
    float lo = 0.f, hi = 255.f;
    switch (img.tag) {
        case RangeTag::Byte: lo = 0.f; hi = 255.f; break;
        case RangeTag::Unit: lo = 0.f; hi = 1.f; break;
        case RangeTag::UnitSigned: lo = -1.f; hi = 1.f; break;
    }
    return {torch::clamp(out, lo, hi), img.tag};
}

inline std::vector<std::string> list_image_files(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (!fs::is_directory(dir)) return files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
            files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Writes blur/ + sharp/ copies of every image in sharp_dir, blurred with a
// per-image seeded random linear kernel. Returns the number of pairs written.
inline int64_t synthesize_pairs(const std::string& sharp_dir, const std::string& out_dir,
                                std::pair<int64_t, int64_t> length_range, uint64_t seed) {
    namespace fs = std::filesystem;
    auto files = list_image_files(sharp_dir);
    if (files.empty())
        throw std::runtime_error("synthesize_pairs: no decodable images in '" + sharp_dir + "'");
    if (length_range.first < 1 || length_range.second < length_range.first)
        throw std::invalid_argument("synthesize_pairs: bad length range");
    fs::create_directories(fs::path(out_dir) / "blur");
    fs::create_directories(fs::path(out_dir) / "sharp");
    int64_t count = 0;
    for (size_t i = 0; i < files.size(); ++i) {
        Rng rng(combine_seed(seed, i));
        int64_t length = rng.next_range(length_range.first, length_range.second);
        double angle = rng.next_real() * 180.0;
        int64_t ksize = length | 1;  // next odd >= length
        if (ksize < length) ksize += 2;
        ImageTensor sharp = load_image(files[i]);
        ImageTensor blurred = apply_blur(sharp, make_linear_kernel(length, angle, ksize));
        std::string name = fs::path(files[i]).stem().string() + ".png";
        save_image(blurred, (fs::path(out_dir) / "blur" / name).string());
        save_image(sharp, (fs::path(out_dir) / "sharp" / name).string());
        ++count;
    }
    return count;
}

}  // namespace deblur

#endif
