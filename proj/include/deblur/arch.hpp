#ifndef DEBLUR_ARCH_HPP
#define DEBLUR_ARCH_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace deblur {

enum class LayerKind {
    Conv,
    BatchNorm,
    ReLU,
    LeakyReLU,
    Tanh,
    Sigmoid,
    Dropout,
    Upsample,
    GlobalAvgPool,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::BatchNorm: return "batch_norm";
        case LayerKind::ReLU: return "relu";
        case LayerKind::LeakyReLU: return "leaky_relu";
        case LayerKind::Tanh: return "tanh";
        case LayerKind::Sigmoid: return "sigmoid";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Upsample: return "upsample";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
    }
    return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    for (int k = 0; k <= static_cast<int>(LayerKind::GlobalAvgPool); ++k)
        if (s == layer_kind_name(static_cast<LayerKind>(k))) return static_cast<LayerKind>(k);
    throw std::invalid_argument("unknown layer kind: " + s);
}

struct LayerSpec {
    LayerKind kind;
    int64_t in_ch = 0;
    int64_t out_ch = 0;
    int64_t kernel = 0;
    int64_t stride = 1;
    bool bias = true;
};

// Flat layer list both networks are built from; layer and parameter counts are
// always derived from this, never hardcoded.
struct ArchDescriptor {
    std::string kind;  // "generator" or "discriminator"
    std::vector<LayerSpec> layers;
    int64_t resnet_blocks = 0;
    double dropout_rate = 0.0;
    bool global_skip = false;

    int64_t conv_count() const {
        int64_t n = 0;
        for (const auto& l : layers)
            if (l.kind == LayerKind::Conv) ++n;
        return n;
    }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& l : layers) {
            if (l.kind == LayerKind::Conv)
                n += l.kernel * l.kernel * l.in_ch * l.out_ch + (l.bias ? l.out_ch : 0);
            else if (l.kind == LayerKind::BatchNorm)
                n += 2 * l.out_ch;  // affine weight + bias
        }
        return n;
    }

    nlohmann::json to_json() const {
        nlohmann::json layers_j = nlohmann::json::array();
        for (const auto& l : layers)
            layers_j.push_back({{"kind", layer_kind_name(l.kind)},
                                {"in_ch", l.in_ch},
                                {"out_ch", l.out_ch},
                                {"kernel", l.kernel},
                                {"stride", l.stride},
                                {"bias", l.bias}});
        return {{"kind", kind},
                {"layers", layers_j},
                {"resnet_blocks", resnet_blocks},
                {"dropout_rate", dropout_rate},
                {"global_skip", global_skip}};
    }

    static ArchDescriptor from_json(const nlohmann::json& j) {
        ArchDescriptor d;
        d.kind = j.at("kind").get<std::string>();
        d.resnet_blocks = j.at("resnet_blocks").get<int64_t>();
        d.dropout_rate = j.at("dropout_rate").get<double>();
        d.global_skip = j.value("global_skip", false);
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.kind = layer_kind_from_name(lj.at("kind").get<std::string>());
            l.in_ch = lj.at("in_ch").get<int64_t>();
            l.out_ch = lj.at("out_ch").get<int64_t>();
            l.kernel = lj.at("kernel").get<int64_t>();
            l.stride = lj.at("stride").get<int64_t>();
            l.bias = lj.at("bias").get<bool>();
            d.layers.push_back(l);
        }
        return d;
    }

    bool operator==(const ArchDescriptor& o) const { return to_json() == o.to_json(); }
};

struct LayerAudit {
    int64_t conv_count;
    int64_t param_count;
};

inline LayerAudit count_layers_and_params(const ArchDescriptor& d) {
    return {d.conv_count(), d.param_count()};
}

}  // namespace deblur

#endif
