// deblur: motion-blur restoration toolkit.
// Subcommands: synth, train, deblur, evaluate, inspect.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "deblur/blur_synth.hpp"
#include "deblur/checkpoint.hpp"
#include "deblur/dataset.hpp"
#include "deblur/metrics.hpp"
#include "deblur/trainer.hpp"

namespace fs = std::filesystem;
using namespace deblur;

namespace {

std::unique_ptr<PerceptualExtractor> make_phi(const std::string& source, uint64_t seed,
                                              const std::string& weights) {
    if (source == "pretrained")
        return std::make_unique<VggFeatureExtractor>(PhiSource::Pretrained, seed, weights);
    if (source == "seeded-random")
        return std::make_unique<VggFeatureExtractor>(PhiSource::SeededRandom, seed);
    throw std::runtime_error("unknown --phi source: " + source);
}

struct TrainArgs {
    TrainConfig cfg;
    std::string data_root;
    std::string checkpoint_dir = "checkpoints";
    std::string log_path = "train_log.csv";
    std::string resume;
    std::string phi_source = "seeded-random";
    std::string phi_weights;
    double val_fraction = 0.1;
    bool grid_patches = false;  // kept for exact-reproduction experiments
    bool no_global_skip = false;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = a.cfg;
    cfg.generator_opts.global_skip = !a.no_global_skip;
    cfg.validate();
    std::cout << "config: epochs=" << cfg.epochs << " batch_size=" << cfg.batch_size
              << " learning_rate=" << cfg.learning_rate << " patch_size=" << cfg.patch_size
              << " lambda_p=" << cfg.lambda_p << " lambda_a=" << cfg.lambda_a
              << " seed=" << cfg.seed << " optimizer=" << cfg.optimizer << "\n";
    auto ds = discover(a.data_root);
    auto [train_ds, val_ds] = split(ds, a.val_fraction, cfg.seed);
    std::cerr << "dataset: " << train_ds.size() << " train / " << val_ds.size() << " val pairs\n";
    auto phi = make_phi(a.phi_source, cfg.seed, a.phi_weights);
    std::vector<EpochSummary> summaries;
    fit(train_ds, val_ds, cfg, *phi, {a.checkpoint_dir, a.log_path}, a.resume, &summaries);
    for (const auto& es : summaries)
        std::cout << "epoch " << es.epoch << " steps " << es.steps << " g_total "
                  << es.mean_losses.g_total << " val_psnr " << es.val_psnr << " val_ssim "
                  << es.val_ssim << "\n";
    std::cout << "final checkpoint: " << (fs::path(a.checkpoint_dir) / "final.pt").string() << "\n";
    return 0;
}

ImageTensor concat_side_by_side(const ImageTensor& left, const ImageTensor& right) {
    return {torch::cat({convert_range(left, RangeTag::Byte).data,
                        convert_range(right, RangeTag::Byte).data},
                       1),
            RangeTag::Byte};
}

int run_deblur(const std::string& checkpoint, const std::string& input, const std::string& out,
               bool side_by_side) {
    auto ck = load_models(checkpoint);
    std::vector<std::string> inputs;
    if (fs::is_directory(input))
        inputs = list_image_files(input);
    else
        inputs.push_back(input);
    if (inputs.empty()) throw std::runtime_error("no decodable images at '" + input + "'");

    fs::path out_path = out.empty() ? fs::path() : fs::path(out);
    bool out_is_dir = !out.empty() && (inputs.size() > 1 || fs::is_directory(out_path));
    if (out_is_dir) fs::create_directories(out_path);

    for (const auto& in : inputs) {
        ImageTensor img = load_image(in);
        auto [restored, secs] = deblur_image(ck.generator, img);
        ImageTensor result = side_by_side ? concat_side_by_side(img, restored) : restored;
        fs::path dest;
        if (out.empty())
            dest = fs::path(in).parent_path() / (fs::path(in).stem().string() + "_deblurred.png");
        else if (out_is_dir)
            dest = out_path / (fs::path(in).stem().string() + "_deblurred.png");
        else
            dest = out_path;
        save_image(result, dest.string());
        std::cout << in << " -> " << dest.string() << " (" << secs << " s)\n";
    }
    return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& data_root,
                 const std::string& report_path, bool identity) {
    auto ds = discover(data_root);
    EvalReport report;
    nlohmann::json echo{{"data", data_root}, {"identity", identity}};
    if (identity) {
        report = evaluate_with(
            [](const ImageTensor& img) {
                return std::make_pair(convert_range(img, RangeTag::Byte), 1e-9);
            },
            ds);
    } else {
        auto ck = load_models(checkpoint);
        echo["checkpoint"] = checkpoint;
        echo["manifest"] = ck.manifest;
        report = evaluate(ck.generator, ds);
    }
    report.config_echo = echo;
    if (!report_path.empty()) {
        std::ofstream f(report_path);
        if (!f) throw std::runtime_error("cannot write report '" + report_path + "'");
        f << report.to_json().dump(2) << "\n";
    }
    std::cout << report.to_table();
    std::cout << "baseline (blurred vs sharp): mean PSNR " << report.baseline_psnr_agg.mean
              << " dB, mean SSIM " << report.baseline_ssim_agg.mean << "\n";
    return 0;
}

int run_inspect(const std::string& checkpoint, uint64_t seed, bool as_json) {
    ArchDescriptor gd, dd;
    if (!checkpoint.empty()) {
        auto ck = load_models(checkpoint);
        gd = ArchDescriptor::from_json(ck.manifest.at("generator"));
        dd = ArchDescriptor::from_json(ck.manifest.at("discriminator"));
    } else {
        (void)seed;
        gd = generator_descriptor();
        dd = discriminator_descriptor();
    }
    auto ga = count_layers_and_params(gd);
    auto da = count_layers_and_params(dd);
    if (as_json) {
        nlohmann::json j{
            {"discriminator", {{"conv_layers", da.conv_count}, {"params", da.param_count}}},
            {"generator", {{"conv_layers", ga.conv_count}, {"params", ga.param_count}}},
            {"total",
             {{"conv_layers", da.conv_count + ga.conv_count},
              {"params", da.param_count + ga.param_count}}}};
        std::cout << j.dump(2) << "\n";
    } else {
        auto fmt = [](int64_t p) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(p) / 1e6);
            return std::string(buf);
        };
        std::cout << "Type            Conv2d Layers   Params\n";
        std::cout << "Discriminator   " << da.conv_count << "               " << fmt(da.param_count)
                  << "\n";
        std::cout << "Generator       " << ga.conv_count << "              " << fmt(ga.param_count)
                  << "\n";
        std::cout << "Total           " << (da.conv_count + ga.conv_count) << "              "
                  << fmt(da.param_count + ga.param_count) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"motion-deblurring GAN toolkit"};
    app.require_subcommand(1);
    // flat key=value file with subcommand-scoped keys, e.g. "train.epochs=2";
    // command-line flags override file values
    app.set_config("--config", "",
                   "flat key=value config file (keys like train.epochs); flags override");

    // synth
    auto* synth = app.add_subcommand("synth", "generate blur/sharp pairs from sharp images");
    std::string sharp_dir, out_dir;
    int64_t len_lo = 5, len_hi = 15;
    uint64_t synth_seed = 1;
    synth->add_option("--sharp-dir", sharp_dir, "directory of sharp images")->required();
    synth->add_option("--out", out_dir, "output dataset root (blur/ + sharp/)")->required();
    synth->add_option("--min-length", len_lo, "minimum blur length in pixels");
    synth->add_option("--max-length", len_hi, "maximum blur length in pixels");
    synth->add_option("--seed", synth_seed, "random seed");

    // train
    auto* train = app.add_subcommand("train", "adversarial training on a paired dataset");
    TrainArgs ta;
    train->add_option("--data", ta.data_root, "dataset root with blur/ + sharp/")->required();
    train->add_option("--epochs", ta.cfg.epochs, "training epochs");
    train->add_option("--batch-size", ta.cfg.batch_size, "batch size");
    train->add_option("--learning-rate", ta.cfg.learning_rate, "constant learning rate");
    train->add_option("--patch-size", ta.cfg.patch_size, "training patch size");
    train->add_option("--lambda-p", ta.cfg.lambda_p, "perceptual loss weight");
    train->add_option("--lambda-a", ta.cfg.lambda_a, "adversarial loss weight");
    train->add_option("--seed", ta.cfg.seed, "random seed");
    train->add_option("--optimizer", ta.cfg.optimizer, "adam or sgd");
    train->add_option("--d-steps", ta.cfg.d_steps_per_g_step, "discriminator steps per generator step");
    train->add_option("--checkpoint-every", ta.cfg.checkpoint_every, "checkpoint interval in epochs");
    train->add_option("--checkpoint-dir", ta.checkpoint_dir, "checkpoint output directory");
    train->add_option("--log", ta.log_path, "CSV training log path");
    train->add_option("--resume", ta.resume, "resume from a training checkpoint");
    train->add_option("--val-fraction", ta.val_fraction, "validation split fraction");
    train->add_option("--val-max-images", ta.cfg.val_max_images, "validation images per epoch");
    train->add_option("--phi", ta.phi_source, "perceptual extractor: pretrained | seeded-random");
    train->add_option("--phi-weights", ta.phi_weights, "path to exported VGG16 weights");
    train->add_option("--bn-momentum", ta.cfg.generator_opts.bn_momentum,
                      "generator BatchNorm running-stat update rate");
    train->add_flag("--no-global-skip", ta.no_global_skip,
                    "disable the generator's input-to-output skip");

    // deblur
    auto* debl = app.add_subcommand("deblur", "restore one image or a directory");
    std::string ck_path, input_path, deblur_out;
    bool side_by_side = false;
    debl->add_option("--checkpoint", ck_path, "model checkpoint")->required();
    debl->add_option("--input", input_path, "input image or directory")->required();
    debl->add_option("--out", deblur_out, "output file or directory");
    debl->add_flag("--side-by-side", side_by_side, "write input|output concatenation");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "PSNR/SSIM/time report on a paired dataset");
    std::string eval_ck, eval_data, report_path = "eval_report.json";
    bool identity = false;
    eval->add_option("--checkpoint", eval_ck, "model checkpoint");
    eval->add_option("--data", eval_data, "dataset root with blur/ + sharp/")->required();
    eval->add_option("--report", report_path, "JSON report output path");
    eval->add_flag("--identity", identity, "evaluate the identity stub instead of a model");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "print layer and parameter counts");
    std::string inspect_ck;
    uint64_t inspect_seed = 1;
    bool as_json = false;
    inspect->add_option("--checkpoint", inspect_ck, "model checkpoint (default: fresh build)");
    inspect->add_option("--seed", inspect_seed, "build seed when no checkpoint given");
    inspect->add_flag("--json", as_json, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) {
            int64_t n = synthesize_pairs(sharp_dir, out_dir, {len_lo, len_hi}, synth_seed);
            std::cout << n << " pairs written\n";
            return 0;
        }
        if (*train) return run_train(ta);
        if (*debl) {
            if (!fs::exists(ck_path)) {
                std::cerr << "error: checkpoint not found: " << ck_path << "\n";
                return 2;
            }
            return run_deblur(ck_path, input_path, deblur_out, side_by_side);
        }
        if (*eval) {
            if (!identity && !fs::exists(eval_ck)) {
                std::cerr << "error: checkpoint not found: " << eval_ck << "\n";
                return 2;
            }
            return run_evaluate(eval_ck, eval_data, report_path, identity);
        }
        if (*inspect) return run_inspect(inspect_ck, inspect_seed, as_json);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
