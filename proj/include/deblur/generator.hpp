#ifndef DEBLUR_GENERATOR_HPP
#define DEBLUR_GENERATOR_HPP

#include <torch/torch.h>

#include <stdexcept>
#include <string>

#include "deblur/arch.hpp"

namespace deblur {

// DCGAN-style init; called under a seeded global RNG so builds are reproducible.
inline void init_weights(torch::nn::Module& m) {
    torch::NoGradGuard no_grad;
    for (auto& mod : m.modules(/*include_self=*/false)) {
        if (auto* conv = mod->as<torch::nn::Conv2d>()) {
            conv->weight.normal_(0.0, 0.02);
            if (conv->options.bias()) conv->bias.zero_();
        } else if (auto* bn = mod->as<torch::nn::BatchNorm2d>()) {
            bn->weight.normal_(1.0, 0.02);
            bn->bias.zero_();
        }
    }
}

// conv-BN-ReLU-dropout-conv-BN with additive identity skip; shape-preserving.
struct ResNetBlockImpl : torch::nn::Module {
    ResNetBlockImpl(int64_t channels, double dropout_rate, double bn_momentum = 0.01)
        : conv1(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)),
          bn1(torch::nn::BatchNorm2dOptions(channels).eps(1e-5).momentum(bn_momentum)),
          drop(torch::nn::DropoutOptions(dropout_rate)),
          conv2(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)),
          bn2(torch::nn::BatchNorm2dOptions(channels).eps(1e-5).momentum(bn_momentum)) {
        register_module("conv1", conv1);
        register_module("bn1", bn1);
        register_module("drop", drop);
        register_module("conv2", conv2);
        register_module("bn2", bn2);
    }

    torch::Tensor forward(torch::Tensor x) {
        auto y = torch::relu(bn1->forward(conv1->forward(x)));
        y = drop->forward(y);
        y = bn2->forward(conv2->forward(y));
        return x + y;
    }

    torch::nn::Conv2d conv1, conv2{nullptr};
    torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
    torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(ResNetBlock);

struct GeneratorOptions {
    int64_t base_channels = 64;
    int64_t resnet_blocks = 9;
    double dropout_rate = 0.5;
    bool global_skip = true;
    double bn_momentum = 0.01;  // running-stat update rate (0.01 = 0.99 decay)
};

// Encoder / 9 ResNet blocks / decoder, 24 convolutions total:
// 7x7 head, two stride-2 3x3 downs, 9 blocks (18 convs), two resize-convs,
// 7x7 tail into Tanh. Optional logit-space skip from input to the tail so a
// freshly built model starts near the identity map.
struct GeneratorImpl : torch::nn::Module {
    explicit GeneratorImpl(const GeneratorOptions& opts = {}) : opts_(opts) {
        const int64_t c = opts.base_channels;
        head = register_module(
            "head", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, c, 7).padding(3)));
        head_bn = register_module("head_bn", make_bn(c));
        down1 = register_module(
            "down1", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 2 * c, 3).stride(2).padding(1)));
        down1_bn = register_module("down1_bn", make_bn(2 * c));
        down2 = register_module(
            "down2",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * c, 4 * c, 3).stride(2).padding(1)));
        down2_bn = register_module("down2_bn", make_bn(4 * c));
        for (int64_t i = 0; i < opts.resnet_blocks; ++i)
            blocks.push_back(register_module(
                "block" + std::to_string(i),
                ResNetBlock(4 * c, opts.dropout_rate, opts.bn_momentum)));
        up1 = register_module(
            "up1", torch::nn::Conv2d(torch::nn::Conv2dOptions(4 * c, 2 * c, 3).padding(1)));
        up1_bn = register_module("up1_bn", make_bn(2 * c));
        up2 = register_module(
            "up2", torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * c, c, 3).padding(1)));
        up2_bn = register_module("up2_bn", make_bn(c));
        tail = register_module(
            "tail", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 3, 7).padding(3)));
    }

    torch::Tensor forward(torch::Tensor z) {
        if (z.dim() != 4 || z.size(1) != 3)
            throw std::invalid_argument("generator: expected (B, 3, H, W) input");
        if (z.size(2) % 4 != 0 || z.size(3) % 4 != 0)
            throw std::invalid_argument(
                "generator: H and W must be divisible by 4 (use pad_to_multiple), got " +
                std::to_string(z.size(2)) + "x" + std::to_string(z.size(3)));
        auto x = torch::relu(head_bn->forward(head->forward(z)));
        x = torch::relu(down1_bn->forward(down1->forward(x)));
        x = torch::relu(down2_bn->forward(down2->forward(x)));
        for (auto& b : blocks) x = b->forward(x);
        x = upsample2x(x);
        x = torch::relu(up1_bn->forward(up1->forward(x)));
        x = upsample2x(x);
        x = torch::relu(up2_bn->forward(up2->forward(x)));
        x = tail->forward(x);
        if (opts_.global_skip)
            x = x + torch::atanh(torch::clamp(z, -0.999, 0.999));
        return torch::tanh(x);
    }

    const GeneratorOptions& options() const { return opts_; }

    torch::nn::Conv2d head{nullptr}, down1{nullptr}, down2{nullptr}, up1{nullptr}, up2{nullptr},
        tail{nullptr};
    torch::nn::BatchNorm2d head_bn{nullptr}, down1_bn{nullptr}, down2_bn{nullptr},
        up1_bn{nullptr}, up2_bn{nullptr};
    std::vector<ResNetBlock> blocks;

private:
    torch::nn::BatchNorm2d make_bn(int64_t ch) const {
        return torch::nn::BatchNorm2d(
            torch::nn::BatchNorm2dOptions(ch).eps(1e-5).momentum(opts_.bn_momentum));
    }

    static torch::Tensor upsample2x(const torch::Tensor& x) {
        namespace F = torch::nn::functional;
        return F::interpolate(
            x, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0})
                   .mode(torch::kNearest));
    }

    GeneratorOptions opts_;
};
TORCH_MODULE(Generator);

inline ArchDescriptor generator_descriptor(const GeneratorOptions& opts = {}) {
    const int64_t c = opts.base_channels;
    ArchDescriptor d;
    d.kind = "generator";
    d.resnet_blocks = opts.resnet_blocks;
    d.dropout_rate = opts.dropout_rate;
    d.global_skip = opts.global_skip;
    auto conv = [](int64_t in, int64_t out, int64_t k, int64_t s) {
        return LayerSpec{LayerKind::Conv, in, out, k, s, true};
    };
    auto bn = [](int64_t ch) { return LayerSpec{LayerKind::BatchNorm, ch, ch, 0, 1, true}; };
    auto act = [](LayerKind kind) { return LayerSpec{kind, 0, 0, 0, 1, false}; };
    d.layers = {conv(3, c, 7, 1), bn(c), act(LayerKind::ReLU),
                conv(c, 2 * c, 3, 2), bn(2 * c), act(LayerKind::ReLU),
                conv(2 * c, 4 * c, 3, 2), bn(4 * c), act(LayerKind::ReLU)};
    for (int64_t i = 0; i < opts.resnet_blocks; ++i) {
        d.layers.push_back(conv(4 * c, 4 * c, 3, 1));
        d.layers.push_back(bn(4 * c));
        d.layers.push_back(act(LayerKind::ReLU));
        d.layers.push_back(act(LayerKind::Dropout));
        d.layers.push_back(conv(4 * c, 4 * c, 3, 1));
        d.layers.push_back(bn(4 * c));
    }
    d.layers.push_back(act(LayerKind::Upsample));
    d.layers.push_back(conv(4 * c, 2 * c, 3, 1));
    d.layers.push_back(bn(2 * c));
    d.layers.push_back(act(LayerKind::ReLU));
    d.layers.push_back(act(LayerKind::Upsample));
    d.layers.push_back(conv(2 * c, c, 3, 1));
    d.layers.push_back(bn(c));
    d.layers.push_back(act(LayerKind::ReLU));
    d.layers.push_back(conv(c, 3, 7, 1));
    d.layers.push_back(act(LayerKind::Tanh));
    return d;
}

inline Generator build_generator(uint64_t seed, const GeneratorOptions& opts = {}) {
    torch::manual_seed(seed);
    Generator g(opts);
    init_weights(*g);
    return g;
}

}  // namespace deblur

#endif
