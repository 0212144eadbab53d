#ifndef DEBLUR_DISCRIMINATOR_HPP
#define DEBLUR_DISCRIMINATOR_HPP

#include <torch/torch.h>

#include <array>
#include <stdexcept>
#include <string>

#include "deblur/arch.hpp"
#include "deblur/generator.hpp"  // init_weights
#include "deblur/rng.hpp"

namespace deblur {

struct DiscriminatorOptions {
    // Channel plan chosen so the audited parameter count lands near 3.1M.
    std::array<int64_t, 5> channels = {42, 84, 168, 336, 336};
    double leaky_slope = 0.2;
};

// Six 4x4 convolutions (four stride-2, two stride-1), global average pooling,
// Sigmoid. Real images score toward 1, generated toward 0.
struct DiscriminatorImpl : torch::nn::Module {
    explicit DiscriminatorImpl(const DiscriminatorOptions& opts = {}) : opts_(opts) {
        const auto& c = opts.channels;
        conv0 = register_module(
            "conv0", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, c[0], 4).stride(2).padding(1)));
        conv1 = register_module(
            "conv1",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(c[0], c[1], 4).stride(2).padding(1)));
        bn1 = register_module("bn1", make_bn(c[1]));
        conv2 = register_module(
            "conv2",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(c[1], c[2], 4).stride(2).padding(1)));
        bn2 = register_module("bn2", make_bn(c[2]));
        conv3 = register_module(
            "conv3",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(c[2], c[3], 4).stride(2).padding(1)));
        bn3 = register_module("bn3", make_bn(c[3]));
        conv4 = register_module(
            "conv4",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(c[3], c[4], 4).stride(1).padding(1)));
        bn4 = register_module("bn4", make_bn(c[4]));
        conv5 = register_module(
            "conv5", torch::nn::Conv2d(torch::nn::Conv2dOptions(c[4], 1, 4).stride(1).padding(1)));
    }

    // Returns (B,) probabilities strictly inside (0, 1).
    torch::Tensor forward(torch::Tensor x) {
        if (x.dim() != 4 || x.size(1) != 3)
            throw std::invalid_argument("discriminator: expected (B, 3, H, W) input");
        if (x.size(2) < 64 || x.size(3) < 64)
            throw std::invalid_argument("discriminator: input must be at least 64x64, got " +
                                        std::to_string(x.size(2)) + "x" +
                                        std::to_string(x.size(3)));
        const double s = opts_.leaky_slope;
        x = torch::leaky_relu(conv0->forward(x), s);
        x = torch::leaky_relu(bn1->forward(conv1->forward(x)), s);
        x = torch::leaky_relu(bn2->forward(conv2->forward(x)), s);
        x = torch::leaky_relu(bn3->forward(conv3->forward(x)), s);
        x = torch::leaky_relu(bn4->forward(conv4->forward(x)), s);
        x = conv5->forward(x);                // (B, 1, h, w) logit map
        x = x.mean(/*dim=*/{2, 3}).squeeze(1);  // global average pool -> (B,)
        return torch::sigmoid(x);
    }

    const DiscriminatorOptions& options() const { return opts_; }

    torch::nn::Conv2d conv0{nullptr}, conv1{nullptr}, conv2{nullptr}, conv3{nullptr},
        conv4{nullptr}, conv5{nullptr};
    torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr}, bn4{nullptr};

private:
    static torch::nn::BatchNorm2d make_bn(int64_t ch) {
        return torch::nn::BatchNorm2d(torch::nn::BatchNorm2dOptions(ch).eps(1e-5).momentum(0.01));
    }

    DiscriminatorOptions opts_;
};
TORCH_MODULE(Discriminator);

inline ArchDescriptor discriminator_descriptor(const DiscriminatorOptions& opts = {}) {
    const auto& c = opts.channels;
    ArchDescriptor d;
    d.kind = "discriminator";
    auto conv = [](int64_t in, int64_t out, int64_t s) {
        return LayerSpec{LayerKind::Conv, in, out, 4, s, true};
    };
    auto bn = [](int64_t ch) { return LayerSpec{LayerKind::BatchNorm, ch, ch, 0, 1, true}; };
    auto act = [](LayerKind kind) { return LayerSpec{kind, 0, 0, 0, 1, false}; };
    d.layers = {conv(3, c[0], 2), act(LayerKind::LeakyReLU),
                conv(c[0], c[1], 2), bn(c[1]), act(LayerKind::LeakyReLU),
                conv(c[1], c[2], 2), bn(c[2]), act(LayerKind::LeakyReLU),
                conv(c[2], c[3], 2), bn(c[3]), act(LayerKind::LeakyReLU),
                conv(c[3], c[4], 1), bn(c[4]), act(LayerKind::LeakyReLU),
                conv(c[4], 1, 1), act(LayerKind::GlobalAvgPool), act(LayerKind::Sigmoid)};
    return d;
}

inline Discriminator build_discriminator(uint64_t seed, const DiscriminatorOptions& opts = {}) {
    torch::manual_seed(mix_seed(seed) ^ 0xd15cULL);
    Discriminator d(opts);
    init_weights(*d);
    return d;
}

}  // namespace deblur

#endif
