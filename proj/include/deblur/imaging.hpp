#ifndef DEBLUR_IMAGING_HPP
#define DEBLUR_IMAGING_HPP

#include <torch/torch.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/rng.hpp"

namespace deblur {

// Value range an image's samples live in.
enum class RangeTag {
    Byte,        // [0, 255]
    Unit,        // [0, 1]
    UnitSigned,  // [-1, 1]
};

inline const char* range_tag_name(RangeTag t) {
    switch (t) {
        case RangeTag::Byte: return "byte";
        case RangeTag::Unit: return "unit";
        case RangeTag::UnitSigned: return "unit_signed";
    }
    return "?";
}

// H x W x 3 float32 image with a declared value range.
struct ImageTensor {
    torch::Tensor data;  // (H, W, 3) float32, contiguous
    RangeTag tag = RangeTag::Byte;

    int64_t height() const { return data.size(0); }
    int64_t width() const { return data.size(1); }

    void validate() const {
        if (data.dim() != 3 || data.size(2) != 3)
            throw std::invalid_argument("ImageTensor: expected (H, W, 3), got " +
                                        std::to_string(data.dim()) + "-d tensor");
        if (data.size(0) < 1 || data.size(1) < 1)
            throw std::invalid_argument("ImageTensor: empty image");
    }
};

// Aligned (blurred z, sharp x) sample.
struct ImagePair {
    ImageTensor blurred;
    ImageTensor sharp;
    std::string id;
};

inline ImageTensor load_image(const std::string& path) {
    cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (mat.empty())
        throw std::runtime_error("load_image: cannot read '" + path + "'");
    if (mat.channels() == 1) {
        std::cerr << "warning: grayscale input replicated to 3 channels: " << path << "\n";
        cv::cvtColor(mat, mat, cv::COLOR_GRAY2BGR);
    } else if (mat.channels() == 4) {
        cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
    } else if (mat.channels() != 3) {
        throw std::runtime_error("load_image: unsupported channel count in '" + path + "'");
    }
    if (mat.depth() != CV_8U)
        mat.convertTo(mat, CV_8U);
    cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);

    auto t = torch::empty({mat.rows, mat.cols, 3}, torch::kFloat32);
    auto acc = t.accessor<float, 3>();
    for (int r = 0; r < mat.rows; ++r) {
        const uint8_t* row = mat.ptr<uint8_t>(r);
        for (int c = 0; c < mat.cols; ++c)
            for (int ch = 0; ch < 3; ++ch)
                acc[r][c][ch] = static_cast<float>(row[c * 3 + ch]);
    }
    return {t, RangeTag::Byte};
}

ImageTensor convert_range(const ImageTensor& img, RangeTag target);

inline void save_image(const ImageTensor& img, const std::string& path) {
    img.validate();
    ImageTensor b = convert_range(img, RangeTag::Byte);
    auto t = b.data.contiguous();
    auto acc = t.accessor<float, 3>();
    cv::Mat mat(static_cast<int>(b.height()), static_cast<int>(b.width()), CV_8UC3);
    for (int r = 0; r < mat.rows; ++r) {
        uint8_t* row = mat.ptr<uint8_t>(r);
        for (int c = 0; c < mat.cols; ++c)
            for (int ch = 0; ch < 3; ++ch)
                row[c * 3 + ch] = static_cast<uint8_t>(acc[r][c][ch]);
    }
    cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, mat))
        throw std::runtime_error("save_image: cannot write '" + path + "'");
}

// Affine map between value ranges. byte -> unit_signed is v/127.5 - 1;
// landing on byte rounds half-up and clamps to [0, 255].
inline ImageTensor convert_range(const ImageTensor& img, RangeTag target) {
    img.validate();
    if (img.tag == target) return img;
    // to unit [0,1]
    torch::Tensor u;
    switch (img.tag) {
        case RangeTag::Byte: u = img.data / 255.0f; break;
        case RangeTag::Unit: u = img.data; break;
        case RangeTag::UnitSigned: u = (img.data + 1.0f) * 0.5f; break;
    }
    torch::Tensor out;
    switch (target) {
        case RangeTag::Byte:
            out = torch::clamp(torch::floor(u * 255.0f + 0.5f), 0.0f, 255.0f);
            break;
        case RangeTag::Unit:
            out = u.clone();
            break;
        case RangeTag::UnitSigned:
            out = u * 2.0f - 1.0f;
            break;
    }
    return {out.contiguous(), target};
}

enum class PatchMode { Random, Grid };

struct PatchPosition {
    int64_t row;
    int64_t col;
};

// Patch positions only; extraction crops at these offsets. Paired callers use
// the same seed on blurred and sharp so positions coincide.
inline std::vector<PatchPosition> patch_positions(int64_t height, int64_t width, int64_t size,
                                                  PatchMode mode, int64_t count_or_stride,
                                                  uint64_t seed) {
    if (size > height || size > width)
        throw std::invalid_argument("extract_patches: patch size " + std::to_string(size) +
                                    " exceeds image dims " + std::to_string(height) + "x" +
                                    std::to_string(width));
    std::vector<PatchPosition> out;
    if (mode == PatchMode::Random) {
        Rng rng(seed);
        for (int64_t i = 0; i < count_or_stride; ++i) {
            int64_t r = rng.next_range(0, height - size);
            int64_t c = rng.next_range(0, width - size);
            out.push_back({r, c});
        }
    } else {
        int64_t stride = count_or_stride;
        if (stride < 1) throw std::invalid_argument("extract_patches: stride must be >= 1");
        std::vector<int64_t> rows, cols;
        for (int64_t r = 0;; r += stride) {
            if (r + size >= height) { rows.push_back(height - size); break; }
            rows.push_back(r);
        }
        for (int64_t c = 0;; c += stride) {
            if (c + size >= width) { cols.push_back(width - size); break; }
            cols.push_back(c);
        }
        for (int64_t r : rows)
            for (int64_t c : cols)
                out.push_back({r, c});
    }
    return out;
}

inline std::vector<ImageTensor> extract_patches(const ImageTensor& img, int64_t size,
                                                PatchMode mode, int64_t count_or_stride,
                                                uint64_t seed) {
    img.validate();
    auto positions = patch_positions(img.height(), img.width(), size, mode, count_or_stride, seed);
    std::vector<ImageTensor> out;
    out.reserve(positions.size());
    for (auto [r, c] : positions)
        out.push_back({img.data.slice(0, r, r + size).slice(1, c, c + size).contiguous(), img.tag});
    return out;
}

struct CropRecord {
    int64_t height;
    int64_t width;
};

// Reflect-pads bottom/right so both dims divide `multiple`.
inline std::pair<ImageTensor, CropRecord> pad_to_multiple(const ImageTensor& img, int64_t multiple) {
    img.validate();
    if (multiple < 1) throw std::invalid_argument("pad_to_multiple: multiple must be >= 1");
    CropRecord rec{img.height(), img.width()};
    int64_t ph = (multiple - img.height() % multiple) % multiple;
    int64_t pw = (multiple - img.width() % multiple) % multiple;
    if (ph == 0 && pw == 0) return {img, rec};
    auto chw = img.data.permute({2, 0, 1}).unsqueeze(0);  // (1,3,H,W)
    // reflect needs pad < dim; tiny images fall back to replicate
    auto mode = (ph < img.height() && pw < img.width())
                    ? torch::nn::functional::PadFuncOptions::mode_t(torch::kReflect)
                    : torch::nn::functional::PadFuncOptions::mode_t(torch::kReplicate);
    auto padded = torch::nn::functional::pad(
        chw, torch::nn::functional::PadFuncOptions({0, pw, 0, ph}).mode(mode));
    return {{padded.squeeze(0).permute({1, 2, 0}).contiguous(), img.tag}, rec};
}

inline ImageTensor crop_to_record(const ImageTensor& img, const CropRecord& rec) {
    img.validate();
    return {img.data.slice(0, 0, rec.height).slice(1, 0, rec.width).contiguous(), img.tag};
}

}  // namespace deblur

#endif
