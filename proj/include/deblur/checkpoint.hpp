#ifndef DEBLUR_CHECKPOINT_HPP
#define DEBLUR_CHECKPOINT_HPP

#include <torch/torch.h>

#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "deblur/arch.hpp"
#include "deblur/discriminator.hpp"
#include "deblur/generator.hpp"

namespace deblur {

constexpr int kCheckpointFormatVersion = 1;

// Single-file archive: named parameter arrays under "generator"/"discriminator"
// sub-archives plus a JSON manifest with the architecture descriptors.
// Loading validates the stored descriptor against the builder's.

inline void write_manifest(torch::serialize::OutputArchive& archive, const nlohmann::json& manifest) {
    archive.write("manifest", c10::IValue(manifest.dump()));
}

inline nlohmann::json read_manifest(torch::serialize::InputArchive& archive) {
    c10::IValue v;
    if (!archive.try_read("manifest", v))
        throw std::runtime_error("checkpoint: missing manifest");
    return nlohmann::json::parse(v.toStringRef());
}

struct ModelCheckpoint {
    Generator generator{nullptr};
    Discriminator discriminator{nullptr};
    nlohmann::json manifest;
};

inline nlohmann::json model_manifest(const GeneratorOptions& gopts,
                                     const DiscriminatorOptions& dopts, uint64_t seed) {
    auto gd = generator_descriptor(gopts);
    auto dd = discriminator_descriptor(dopts);
    return {{"format_version", kCheckpointFormatVersion},
            {"seed", seed},
            {"dropout_rate", gopts.dropout_rate},
            {"bn_momentum", gopts.bn_momentum},
            {"generator", gd.to_json()},
            {"discriminator", dd.to_json()}};
}

inline void save_models(const std::string& path, Generator& g, Discriminator& d,
                        const nlohmann::json& manifest) {
    torch::serialize::OutputArchive archive;
    torch::serialize::OutputArchive garch, darch;
    g->save(garch);
    d->save(darch);
    archive.write("generator", garch);
    archive.write("discriminator", darch);
    write_manifest(archive, manifest);
    archive.save_to(path);
}

inline GeneratorOptions generator_options_from_manifest(const nlohmann::json& manifest) {
    auto gd = ArchDescriptor::from_json(manifest.at("generator"));
    GeneratorOptions gopts;
    gopts.resnet_blocks = gd.resnet_blocks;
    gopts.dropout_rate = gd.dropout_rate;
    gopts.global_skip = gd.global_skip;
    gopts.base_channels = gd.layers.at(0).out_ch;
    gopts.bn_momentum = manifest.value("bn_momentum", 0.01);
    return gopts;
}

inline DiscriminatorOptions discriminator_options_from_manifest(const nlohmann::json& manifest) {
    auto dd = ArchDescriptor::from_json(manifest.at("discriminator"));
    DiscriminatorOptions dopts;
    int i = 0;
    for (const auto& l : dd.layers)
        if (l.kind == LayerKind::Conv && l.out_ch != 1 && i < 5)
            dopts.channels[i++] = l.out_ch;
    return dopts;
}

inline ModelCheckpoint load_models(const std::string& path) {
    torch::serialize::InputArchive archive;
    archive.load_from(path);
    ModelCheckpoint ck;
    ck.manifest = read_manifest(archive);
    if (ck.manifest.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint: unsupported format version");

    auto gopts = generator_options_from_manifest(ck.manifest);
    auto dopts = discriminator_options_from_manifest(ck.manifest);
    // Descriptor must round-trip exactly; rejects weights for a different topology.
    if (generator_descriptor(gopts).to_json() != ck.manifest.at("generator") ||
        discriminator_descriptor(dopts).to_json() != ck.manifest.at("discriminator"))
        throw std::runtime_error("checkpoint: architecture descriptor mismatch");

    ck.generator = Generator(gopts);
    ck.discriminator = Discriminator(dopts);
    torch::serialize::InputArchive garch, darch;
    archive.read("generator", garch);
    archive.read("discriminator", darch);
    ck.generator->load(garch);
    ck.discriminator->load(darch);
    return ck;
}

}  // namespace deblur

#endif
