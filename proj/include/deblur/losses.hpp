#ifndef DEBLUR_LOSSES_HPP
#define DEBLUR_LOSSES_HPP

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "deblur/rng.hpp"

namespace deblur {

// Anything that maps a (B, 3, H, W) unit_signed image batch to features.
struct PerceptualExtractor {
    virtual ~PerceptualExtractor() = default;
    virtual torch::Tensor features(const torch::Tensor& x) const = 0;
};

// VGG16 convolutional trunk up to the third convolution of the third block
// (64,64 / pool / 128,128 / pool / 256,256,256), frozen. Weights come either
// from an exported pretrained file or from a seeded random fill for offline
// use. Inputs are unit_signed; ImageNet preprocessing happens inside.
struct VggTrunkImpl : torch::nn::Module {
    VggTrunkImpl() {
        auto conv = [](int64_t in, int64_t out) {
            return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
        };
        conv1_1 = register_module("conv1_1", conv(3, 64));
        conv1_2 = register_module("conv1_2", conv(64, 64));
        conv2_1 = register_module("conv2_1", conv(64, 128));
        conv2_2 = register_module("conv2_2", conv(128, 128));
        conv3_1 = register_module("conv3_1", conv(128, 256));
        conv3_2 = register_module("conv3_2", conv(256, 256));
        conv3_3 = register_module("conv3_3", conv(256, 256));
    }

    torch::Tensor forward(torch::Tensor x) {
        x = torch::relu(conv1_1->forward(x));
        x = torch::relu(conv1_2->forward(x));
        x = torch::max_pool2d(x, 2);
        x = torch::relu(conv2_1->forward(x));
        x = torch::relu(conv2_2->forward(x));
        x = torch::max_pool2d(x, 2);
        x = torch::relu(conv3_1->forward(x));
        x = torch::relu(conv3_2->forward(x));
        x = torch::relu(conv3_3->forward(x));
        return x;
    }

    torch::nn::Conv2d conv1_1{nullptr}, conv1_2{nullptr}, conv2_1{nullptr}, conv2_2{nullptr},
        conv3_1{nullptr}, conv3_2{nullptr}, conv3_3{nullptr};
};
TORCH_MODULE(VggTrunk);

enum class PhiSource { Pretrained, SeededRandom };

class VggFeatureExtractor : public PerceptualExtractor {
public:
    VggFeatureExtractor(PhiSource source, uint64_t seed, const std::string& weights_path = "")
        : source_(source) {
        if (source == PhiSource::SeededRandom) {
            torch::manual_seed(mix_seed(seed) ^ 0xf33dULL);
            trunk_ = VggTrunk();
            torch::NoGradGuard no_grad;
            for (auto& p : trunk_->parameters()) p.normal_(0.0, 0.05);
        } else {
            trunk_ = VggTrunk();
            if (weights_path.empty() || !std::filesystem::exists(weights_path))
                throw std::runtime_error(
                    "pretrained VGG16 weights not found at '" + weights_path +
                    "'; export them with tools/export_vgg16_weights.py or pass "
                    "--phi seeded-random");
            torch::serialize::InputArchive archive;
            archive.load_from(weights_path);
            trunk_->load(archive);
        }
        for (auto& p : trunk_->parameters()) p.set_requires_grad(false);
        trunk_->eval();
    }

    torch::Tensor features(const torch::Tensor& x) const override {
        if (x.dim() != 4 || x.size(1) != 3)
            throw std::invalid_argument("feature extractor: expected (B, 3, H, W)");
        // unit_signed -> [0,1] -> ImageNet normalization
        auto u = (x + 1.0) * 0.5;
        auto mean = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1});
        auto std = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1});
        auto normed = (u - mean) / std;
        return const_cast<VggTrunk&>(trunk_)->forward(normed);
    }

    // Flattened feature count at the tap for a given input size.
    int64_t feature_count(int64_t height, int64_t width) const {
        return 256 * (height / 4) * (width / 4);
    }

    std::string parameter_checksum() const {
        double acc = 0.0;
        for (const auto& p : trunk_->parameters()) acc += p.abs().sum().item<double>();
        return std::to_string(acc);
    }

    PhiSource source() const { return source_; }

    // double precision is handy for finite-difference checks
    void to_dtype(torch::Dtype d) { trunk_->to(d); }

private:
    PhiSource source_;
    VggTrunk trunk_{nullptr};
};

// Eq-style mean squared feature difference: (1/N) sum_i (phi(a)_i - phi(b)_i)^2,
// averaged over the batch. Differentiable w.r.t. y_pred.
inline torch::Tensor perceptual_loss(const PerceptualExtractor& phi, const torch::Tensor& y_true,
                                     const torch::Tensor& y_pred) {
    if (!y_true.sizes().equals(y_pred.sizes()))
        throw std::invalid_argument("perceptual_loss: shape mismatch");
    auto ft = phi.features(y_true).detach();
    auto fp = phi.features(y_pred);
    return torch::mse_loss(fp, ft);
}

namespace detail {
constexpr double kProbEps = 1e-7;

inline torch::Tensor checked_probs(const torch::Tensor& p, const char* what) {
    if (p.numel() == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
    double lo = p.min().item<double>(), hi = p.max().item<double>();
    if (lo <= 0.0 || hi >= 1.0)
        throw std::domain_error(std::string(what) + ": probabilities must lie strictly in (0,1)");
    return torch::clamp(p, kProbEps, 1.0 - kProbEps);
}
}  // namespace detail

// V(D,G) batch estimate: mean(log d_real) + mean(log(1 - d_fake)).
inline torch::Tensor adversarial_value(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    auto dr = detail::checked_probs(d_real, "adversarial_value(d_real)");
    auto df = detail::checked_probs(d_fake, "adversarial_value(d_fake)");
    return torch::mean(torch::log(dr)) + torch::mean(torch::log(1.0 - df));
}

// Minimizing this maximizes V.
inline torch::Tensor discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
    return -adversarial_value(d_real, d_fake);
}

// Non-saturating generator objective: -mean(log d_fake). Shares the optimum
// of minimizing log(1 - d_fake).
inline torch::Tensor generator_adversarial_loss(const torch::Tensor& d_fake) {
    auto df = detail::checked_probs(d_fake, "generator_adversarial_loss");
    return -torch::mean(torch::log(df));
}

inline torch::Tensor generator_total_loss(const torch::Tensor& g_perc, const torch::Tensor& g_adv,
                                          double lambda_p, double lambda_a) {
    if (lambda_p < 0.0 || lambda_a < 0.0)
        throw std::invalid_argument("generator_total_loss: negative weight");
    if (lambda_p == 0.0 && lambda_a == 0.0)
        throw std::invalid_argument("generator_total_loss: both weights zero");
    return lambda_p * g_perc + lambda_a * g_adv;
}

struct LossReport {
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_perc = 0.0;
    double g_total = 0.0;
};

}  // namespace deblur

#endif
