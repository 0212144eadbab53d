#ifndef DEBLUR_TRAINER_HPP
#define DEBLUR_TRAINER_HPP

#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/checkpoint.hpp"
#include "deblur/dataset.hpp"
#include "deblur/discriminator.hpp"
#include "deblur/generator.hpp"
#include "deblur/losses.hpp"
#include "deblur/metrics.hpp"

namespace deblur {

// True when the numeric backend reproduces runs bit-exactly on one machine;
// tests fall back to 1e-5 relative tolerance when false.
constexpr bool kBackendDeterministic = true;

struct TrainConfig {
    int64_t epochs = 40;
    int64_t batch_size = 16;
    double learning_rate = 0.005;
    int64_t patch_size = 256;
    double lambda_p = 100.0;
    double lambda_a = 1.0;
    uint64_t seed = 1;
    int64_t d_steps_per_g_step = 1;
    std::string optimizer = "adam";  // adam | sgd
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double sgd_momentum = 0.9;
    int64_t checkpoint_every = 5;  // epochs
    int64_t val_max_images = 4;
    GeneratorOptions generator_opts;
    DiscriminatorOptions discriminator_opts;

    void validate() const {
        if (epochs < 1 || batch_size < 1 || patch_size < 1 || d_steps_per_g_step < 1 ||
            checkpoint_every < 1)
            throw std::invalid_argument("TrainConfig: counts must be positive");
        if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
        if (optimizer != "adam" && optimizer != "sgd")
            throw std::invalid_argument("TrainConfig: optimizer must be adam or sgd");
    }

    nlohmann::json to_json() const {
        return {{"epochs", epochs},
                {"batch_size", batch_size},
                {"learning_rate", learning_rate},
                {"patch_size", patch_size},
                {"lambda_p", lambda_p},
                {"lambda_a", lambda_a},
                {"seed", seed},
                {"d_steps_per_g_step", d_steps_per_g_step},
                {"optimizer", optimizer},
                {"adam_beta1", adam_beta1},
                {"adam_beta2", adam_beta2},
                {"sgd_momentum", sgd_momentum},
                {"checkpoint_every", checkpoint_every},
                {"val_max_images", val_max_images}};
    }
};

inline std::unique_ptr<torch::optim::Optimizer> make_optimizer(
    const std::vector<torch::Tensor>& params, const TrainConfig& cfg) {
    if (cfg.optimizer == "sgd")
        return std::make_unique<torch::optim::SGD>(
            params, torch::optim::SGDOptions(cfg.learning_rate).momentum(cfg.sgd_momentum));
    return std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(cfg.learning_rate)
                    .betas({cfg.adam_beta1, cfg.adam_beta2}));
}

struct TrainState {
    Generator generator{nullptr};
    Discriminator discriminator{nullptr};
    std::unique_ptr<torch::optim::Optimizer> opt_g, opt_d;
    int64_t epoch = 0;  // completed epochs
    int64_t step = 0;   // completed steps
    std::vector<LossReport> loss_history;
};

inline TrainState init_train_state(const TrainConfig& cfg) {
    cfg.validate();
    TrainState st;
    st.generator = build_generator(cfg.seed, cfg.generator_opts);
    st.discriminator = build_discriminator(cfg.seed, cfg.discriminator_opts);
    st.opt_g = make_optimizer(st.generator->parameters(), cfg);
    st.opt_d = make_optimizer(st.discriminator->parameters(), cfg);
    return st;
}

// Full resumable checkpoint: models, optimizer slots, progress counters and
// loss history in one archive.
inline void save_train_state(const std::string& path, TrainState& st, const TrainConfig& cfg) {
    torch::serialize::OutputArchive archive;
    torch::serialize::OutputArchive garch, darch, ogarch, odarch;
    st.generator->save(garch);
    st.discriminator->save(darch);
    st.opt_g->save(ogarch);
    st.opt_d->save(odarch);
    archive.write("generator", garch);
    archive.write("discriminator", darch);
    archive.write("opt_g", ogarch);
    archive.write("opt_d", odarch);

    nlohmann::json manifest = model_manifest(cfg.generator_opts, cfg.discriminator_opts, cfg.seed);
    manifest["epoch"] = st.epoch;
    manifest["step"] = st.step;
    manifest["config"] = cfg.to_json();
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : st.loss_history)
        hist.push_back({{"d_loss", r.d_loss},
                        {"g_adv", r.g_adv},
                        {"g_perc", r.g_perc},
                        {"g_total", r.g_total}});
    manifest["loss_history"] = hist;
    write_manifest(archive, manifest);
    archive.save_to(path);
}

inline TrainState load_train_state(const std::string& path, TrainConfig& cfg) {
    torch::serialize::InputArchive archive;
    archive.load_from(path);
    nlohmann::json manifest = read_manifest(archive);

    cfg.generator_opts = generator_options_from_manifest(manifest);
    cfg.discriminator_opts = discriminator_options_from_manifest(manifest);
    if (generator_descriptor(cfg.generator_opts).to_json() != manifest.at("generator") ||
        discriminator_descriptor(cfg.discriminator_opts).to_json() != manifest.at("discriminator"))
        throw std::runtime_error("checkpoint: architecture descriptor mismatch");
    cfg.seed = manifest.at("seed").get<uint64_t>();

    TrainState st;
    st.generator = Generator(cfg.generator_opts);
    st.discriminator = Discriminator(cfg.discriminator_opts);
    torch::serialize::InputArchive garch, darch, ogarch, odarch;
    archive.read("generator", garch);
    archive.read("discriminator", darch);
    st.generator->load(garch);
    st.discriminator->load(darch);
    st.opt_g = make_optimizer(st.generator->parameters(), cfg);
    st.opt_d = make_optimizer(st.discriminator->parameters(), cfg);
    archive.read("opt_g", ogarch);
    archive.read("opt_d", odarch);
    st.opt_g->load(ogarch);
    st.opt_d->load(odarch);
    st.epoch = manifest.at("epoch").get<int64_t>();
    st.step = manifest.at("step").get<int64_t>();
    for (const auto& h : manifest.at("loss_history"))
        st.loss_history.push_back({h.at("d_loss").get<double>(), h.at("g_adv").get<double>(),
                                   h.at("g_perc").get<double>(), h.at("g_total").get<double>()});
    return st;
}

namespace detail {
inline void check_finite(double v, const char* term, int64_t epoch, int64_t step) {
    if (!std::isfinite(v))
        throw std::runtime_error(std::string("non-finite ") + term + " at epoch " +
                                 std::to_string(epoch) + " step " + std::to_string(step));
}
}  // namespace detail

// One alternation: D update on {x, G(z) detached}, then G update on the
// combined perceptual + adversarial objective with D frozen.
inline LossReport train_step(TrainState& st, const Batch& batch, const TrainConfig& cfg,
                             const PerceptualExtractor& phi) {
    st.generator->train();
    st.discriminator->train();
    const auto& z = batch.blurred;
    const auto& x = batch.sharp;

    auto fake = st.generator->forward(z);

    LossReport report;
    for (int64_t k = 0; k < cfg.d_steps_per_g_step; ++k) {
        st.opt_d->zero_grad();
        auto d_real = st.discriminator->forward(x);
        auto d_fake = st.discriminator->forward(fake.detach());
        auto d_loss = discriminator_loss(d_real, d_fake);
        d_loss.backward();
        st.opt_d->step();
        report.d_loss = d_loss.item<double>();
    }
    detail::check_finite(report.d_loss, "d_loss", st.epoch, st.step);

    st.opt_g->zero_grad();
    st.opt_d->zero_grad();  // drop gradients leaked through the fresh D forward
    auto d_fake = st.discriminator->forward(fake);
    auto g_adv = generator_adversarial_loss(d_fake);
    auto g_perc = perceptual_loss(phi, x, fake);
    auto g_total = generator_total_loss(g_perc, g_adv, cfg.lambda_p, cfg.lambda_a);
    g_total.backward();
    st.opt_g->step();

    report.g_adv = g_adv.item<double>();
    report.g_perc = g_perc.item<double>();
    report.g_total = g_total.item<double>();
    detail::check_finite(report.g_adv, "g_adv", st.epoch, st.step);
    detail::check_finite(report.g_perc, "g_perc", st.epoch, st.step);

    ++st.step;
    st.loss_history.push_back(report);
    return report;
}

// Inference on a full image: unit_signed conversion, pad to a multiple of 4,
// deterministic forward, crop, back to byte. Returns wall-clock seconds.
inline std::pair<ImageTensor, double> deblur_image(Generator& gen, const ImageTensor& img) {
    auto t0 = std::chrono::steady_clock::now();
    gen->eval();
    torch::NoGradGuard no_grad;
    ImageTensor u = convert_range(img, RangeTag::UnitSigned);
    auto [padded, rec] = pad_to_multiple(u, 4);
    auto nchw = padded.data.permute({2, 0, 1}).unsqueeze(0);
    auto out = gen->forward(nchw).squeeze(0).permute({1, 2, 0}).contiguous();
    ImageTensor restored = crop_to_record({out, RangeTag::UnitSigned}, rec);
    ImageTensor result = convert_range(restored, RangeTag::Byte);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {result, secs};
}

inline EvalReport evaluate(Generator& gen, const PairedDataset& ds) {
    return evaluate_with([&](const ImageTensor& blurred) { return deblur_image(gen, blurred); },
                         ds);
}

struct FitPaths {
    std::string checkpoint_dir;
    std::string log_path;
};

struct EpochSummary {
    int64_t epoch;
    LossReport mean_losses;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
    int64_t steps = 0;
    int64_t skipped_pairs = 0;
    double wall_seconds = 0.0;
};

// Training log: CSV with one row per step (val columns empty) and one summary
// row per epoch with epoch-mean losses and validation metrics.
inline constexpr const char* kLogHeader =
    "epoch,step,d_loss,g_adv,g_perc,g_total,val_psnr,val_ssim,wall_seconds";

inline std::pair<double, double> validate_on(Generator& gen, const PairedDataset& val_ds,
                                             int64_t max_images) {
    double psnr_sum = 0.0, ssim_sum = 0.0;
    int64_t n = std::min<int64_t>(max_images, static_cast<int64_t>(val_ds.size()));
    if (n == 0) return {0.0, 0.0};
    int64_t used = 0;
    for (int64_t i = 0; i < n; ++i) {
        ImagePair pair = val_ds.load(static_cast<size_t>(i));
        auto [restored, secs] = deblur_image(gen, pair.blurred);
        double p = psnr(restored, pair.sharp);
        if (std::isinf(p)) continue;  // identical output, exclude from mean
        psnr_sum += p;
        ssim_sum += ssim(restored, pair.sharp);
        ++used;
    }
    if (used == 0) return {0.0, 0.0};
    return {psnr_sum / used, ssim_sum / used};
}

// Runs epochs of alternating updates; deterministic per (config, seed). The
// torch RNG is re-seeded per epoch so resuming from an epoch checkpoint is
// step-identical to an uninterrupted run.
inline TrainState fit(const PairedDataset& train_ds, const PairedDataset& val_ds,
                      const TrainConfig& cfg_in, const PerceptualExtractor& phi,
                      const FitPaths& paths, const std::string& resume_path = "",
                      std::vector<EpochSummary>* summaries = nullptr) {
    namespace fs = std::filesystem;
    TrainConfig cfg = cfg_in;
    cfg.validate();
    if (train_ds.size() == 0) throw std::invalid_argument("fit: empty training dataset");

    TrainState st;
    if (resume_path.empty()) {
        st = init_train_state(cfg);
    } else {
        st = load_train_state(resume_path, cfg);
        std::cerr << "resuming from '" << resume_path << "' at epoch " << st.epoch << "\n";
    }

    if (!paths.checkpoint_dir.empty()) fs::create_directories(paths.checkpoint_dir);
    std::ofstream log;
    if (!paths.log_path.empty()) {
        bool fresh = !fs::exists(paths.log_path) || resume_path.empty();
        log.open(paths.log_path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw std::runtime_error("fit: cannot open log '" + paths.log_path + "'");
        if (fresh) {
            log << "# config " << cfg.to_json().dump() << "\n";
            log << kLogHeader << "\n";
        }
    }

    for (int64_t epoch = st.epoch; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        torch::manual_seed(combine_seed(cfg.seed, static_cast<uint64_t>(epoch), 0xe90cULL));
        BatchStream stream(train_ds, cfg.batch_size, cfg.patch_size, cfg.seed, epoch);
        LossReport sum;
        int64_t steps = 0;
        while (auto batch = stream.next()) {
            LossReport r = train_step(st, *batch, cfg, phi);
            sum.d_loss += r.d_loss;
            sum.g_adv += r.g_adv;
            sum.g_perc += r.g_perc;
            sum.g_total += r.g_total;
            ++steps;
            if (log)
                log << epoch << "," << st.step << "," << r.d_loss << "," << r.g_adv << ","
                    << r.g_perc << "," << r.g_total << ",,,"
                    << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                    << "\n";
        }
        if (steps == 0) throw std::runtime_error("fit: epoch produced no batches");
        EpochSummary es;
        es.epoch = epoch;
        es.steps = steps;
        es.skipped_pairs = stream.skipped();
        es.mean_losses = {sum.d_loss / steps, sum.g_adv / steps, sum.g_perc / steps,
                          sum.g_total / steps};
        if (val_ds.size() > 0)
            std::tie(es.val_psnr, es.val_ssim) = validate_on(st.generator, val_ds, cfg.val_max_images);
        es.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        st.epoch = epoch + 1;

        if (log) {
            log << epoch << "," << st.step << "," << es.mean_losses.d_loss << ","
                << es.mean_losses.g_adv << "," << es.mean_losses.g_perc << ","
                << es.mean_losses.g_total << "," << es.val_psnr << "," << es.val_ssim << ","
                << es.wall_seconds << "\n";
            log.flush();
        }
        std::cerr << "epoch " << epoch << ": d_loss " << es.mean_losses.d_loss << " g_total "
                  << es.mean_losses.g_total << " val_psnr " << es.val_psnr << " val_ssim "
                  << es.val_ssim << " (" << es.wall_seconds << "s)\n";
        if (summaries) summaries->push_back(es);

        if (!paths.checkpoint_dir.empty() &&
            ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)) {
            auto ckpath = fs::path(paths.checkpoint_dir) /
                          ("epoch_" + std::to_string(epoch + 1) + ".pt");
            save_train_state(ckpath.string(), st, cfg);
        }
    }

    if (!paths.checkpoint_dir.empty())
        save_train_state((fs::path(paths.checkpoint_dir) / "final.pt").string(), st, cfg);
    return st;
}

}  // namespace deblur

#endif
