#ifndef DEBLUR_DATASET_HPP
#define DEBLUR_DATASET_HPP

#include <torch/torch.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/blur_synth.hpp"
#include "deblur/imaging.hpp"
#include "deblur/rng.hpp"

namespace deblur {

// One matched blur/sharp file pair, loaded on demand.
struct PairEntry {
    std::string id;
    std::string blur_path;
    std::string sharp_path;
};

struct PairedDataset {
    std::vector<PairEntry> pairs;  // lexicographic by id
    std::string root;

    size_t size() const { return pairs.size(); }

    ImagePair load(size_t i) const {
        const auto& e = pairs.at(i);
        return {load_image(e.blur_path), load_image(e.sharp_path), e.id};
    }
};

// Matches blur/<name> against sharp/<name>; orphans are warned and dropped.
inline PairedDataset discover(const std::string& root) {
    namespace fs = std::filesystem;
    auto blur_dir = (fs::path(root) / "blur").string();
    auto sharp_dir = (fs::path(root) / "sharp").string();
    if (!fs::is_directory(blur_dir) || !fs::is_directory(sharp_dir))
        throw std::runtime_error("discover: '" + root + "' must contain blur/ and sharp/");

    auto stem_map = [](const std::vector<std::string>& files) {
        std::vector<std::pair<std::string, std::string>> m;  // id -> path
        for (const auto& f : files) m.emplace_back(fs::path(f).stem().string(), f);
        return m;
    };
    auto blur_files = stem_map(list_image_files(blur_dir));
    auto sharp_files = stem_map(list_image_files(sharp_dir));

    std::set<std::string> sharp_ids;
    for (const auto& [id, _] : sharp_files) sharp_ids.insert(id);
    std::set<std::string> blur_ids;
    for (const auto& [id, _] : blur_files) blur_ids.insert(id);

    PairedDataset ds;
    ds.root = root;
    for (const auto& [id, bpath] : blur_files) {
        auto it = std::find_if(sharp_files.begin(), sharp_files.end(),
                               [&](const auto& p) { return p.first == id; });
        if (it == sharp_files.end()) {
            std::cerr << "warning: orphan blur file excluded: " << fs::path(bpath).filename().string()
                      << "\n";
            continue;
        }
        ds.pairs.push_back({id, bpath, it->second});
    }
    for (const auto& [id, spath] : sharp_files)
        if (!blur_ids.count(id))
            std::cerr << "warning: orphan sharp file excluded: " << fs::path(spath).filename().string()
                      << "\n";

    std::sort(ds.pairs.begin(), ds.pairs.end(),
              [](const PairEntry& a, const PairEntry& b) { return a.id < b.id; });
    if (ds.pairs.empty())
        throw std::runtime_error("discover: no matched blur/sharp pairs under '" + root + "'");
    return ds;
}

// Seeded shuffle then partition; val gets round(fraction * n) pairs, at least 1
// and at most n - 1.
inline std::pair<PairedDataset, PairedDataset> split(const PairedDataset& ds, double val_fraction,
                                                     uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("split: val_fraction must be in (0, 1)");
    std::vector<PairEntry> shuffled = ds.pairs;
    Rng rng(combine_seed(seed, 0x5911ULL));
    rng.shuffle(shuffled);
    int64_t n = static_cast<int64_t>(shuffled.size());
    int64_t n_val = std::llround(val_fraction * static_cast<double>(n));
    n_val = std::clamp<int64_t>(n_val, 1, n - 1);
    PairedDataset train{{}, ds.root}, val{{}, ds.root};
    val.pairs.assign(shuffled.begin(), shuffled.begin() + n_val);
    train.pairs.assign(shuffled.begin() + n_val, shuffled.end());
    auto by_id = [](const PairEntry& a, const PairEntry& b) { return a.id < b.id; };
    std::sort(train.pairs.begin(), train.pairs.end(), by_id);
    std::sort(val.pairs.begin(), val.pairs.end(), by_id);
    return {train, val};
}

// One training batch in unit_signed range, NCHW layout.
struct Batch {
    torch::Tensor blurred;  // (B, 3, P, P) in [-1, 1]
    torch::Tensor sharp;    // (B, 3, P, P) in [-1, 1]
    std::vector<std::string> ids;
    std::vector<PatchPosition> positions;  // crop offsets, identical for both sides
};

// Deterministic per (seed, epoch): seeded shuffle of the pair list, one random
// patch per pair, same offset applied to blurred and sharp. Lazy loading; the
// final short batch is emitted.
class BatchStream {
public:
    BatchStream(const PairedDataset& ds, int64_t batch_size, int64_t patch_size, uint64_t seed,
                int64_t epoch)
        : ds_(ds), batch_size_(batch_size), patch_size_(patch_size), seed_(seed), epoch_(epoch) {
        if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
        order_.resize(ds.size());
        for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        Rng rng(combine_seed(seed, static_cast<uint64_t>(epoch)));
        rng.shuffle(order_);
    }

    int64_t skipped() const { return skipped_; }

    std::optional<Batch> next() {
        std::vector<torch::Tensor> bs, ss;
        Batch batch;
        while (cursor_ < order_.size() && static_cast<int64_t>(bs.size()) < batch_size_) {
            size_t idx = order_[cursor_++];
            ImagePair pair = ds_.load(idx);
            if (pair.blurred.height() < patch_size_ || pair.blurred.width() < patch_size_) {
                std::cerr << "warning: pair '" << pair.id << "' smaller than patch size, skipped\n";
                ++skipped_;
                continue;
            }
            uint64_t pos_seed = combine_seed(seed_, static_cast<uint64_t>(epoch_), idx);
            auto pos = patch_positions(pair.blurred.height(), pair.blurred.width(), patch_size_,
                                       PatchMode::Random, 1, pos_seed)[0];
            auto crop = [&](const ImageTensor& img) {
                auto t = img.data.slice(0, pos.row, pos.row + patch_size_)
                             .slice(1, pos.col, pos.col + patch_size_);
                ImageTensor patch{t.contiguous(), img.tag};
                return convert_range(patch, RangeTag::UnitSigned).data.permute({2, 0, 1});
            };
            bs.push_back(crop(pair.blurred));
            ss.push_back(crop(pair.sharp));
            batch.ids.push_back(pair.id);
            batch.positions.push_back(pos);
        }
        if (bs.empty()) return std::nullopt;
        batch.blurred = torch::stack(bs).contiguous();
        batch.sharp = torch::stack(ss).contiguous();
        return batch;
    }

private:
    const PairedDataset& ds_;
    int64_t batch_size_;
    int64_t patch_size_;
    uint64_t seed_;
    int64_t epoch_;
    std::vector<size_t> order_;
    size_t cursor_ = 0;
    int64_t skipped_ = 0;
};

}  // namespace deblur

#endif
