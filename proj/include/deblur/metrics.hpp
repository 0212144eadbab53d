#ifndef DEBLUR_METRICS_HPP
#define DEBLUR_METRICS_HPP

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "deblur/dataset.hpp"
#include "deblur/imaging.hpp"

namespace deblur {

// 10*log10(255^2 / MSE) on byte-range images; +inf when identical.
inline double psnr(const ImageTensor& a, const ImageTensor& b) {
    a.validate();
    b.validate();
    if (a.tag != RangeTag::Byte || b.tag != RangeTag::Byte)
        throw std::invalid_argument("psnr: inputs must be byte range");
    if (!a.data.sizes().equals(b.data.sizes()))
        throw std::invalid_argument("psnr: shape mismatch");
    double mse = torch::mean(torch::square(a.data.to(torch::kFloat64) -
                                           b.data.to(torch::kFloat64)))
                     .item<double>();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace detail {

inline torch::Tensor gaussian_window(int64_t size, double sigma) {
    auto coords = torch::arange(size, torch::kFloat64) - static_cast<double>(size - 1) / 2.0;
    auto g = torch::exp(-(coords * coords) / (2.0 * sigma * sigma));
    g = g / g.sum();
    return torch::outer(g, g);  // (size, size), sums to 1
}

}  // namespace detail

// Standard windowed SSIM: 11x11 Gaussian (sigma 1.5), C1=(0.01*255)^2,
// C2=(0.03*255)^2, valid windows, per channel then averaged.
inline double ssim(const ImageTensor& a, const ImageTensor& b) {
    a.validate();
    b.validate();
    if (a.tag != RangeTag::Byte || b.tag != RangeTag::Byte)
        throw std::invalid_argument("ssim: inputs must be byte range");
    if (!a.data.sizes().equals(b.data.sizes()))
        throw std::invalid_argument("ssim: shape mismatch");
    const int64_t win = 11;
    if (a.height() < win || a.width() < win)
        throw std::invalid_argument("ssim: image smaller than 11x11 window");
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);

    auto w = detail::gaussian_window(win, 1.5).view({1, 1, win, win}).repeat({3, 1, 1, 1});
    auto x = a.data.to(torch::kFloat64).permute({2, 0, 1}).unsqueeze(0);
    auto y = b.data.to(torch::kFloat64).permute({2, 0, 1}).unsqueeze(0);

    namespace F = torch::nn::functional;
    auto filt = [&](const torch::Tensor& t) {
        return F::conv2d(t, w, F::Conv2dFuncOptions().groups(3));
    };
    auto mu_x = filt(x), mu_y = filt(y);
    auto mu_xx = mu_x * mu_x, mu_yy = mu_y * mu_y, mu_xy = mu_x * mu_y;
    auto sigma_xx = filt(x * x) - mu_xx;
    auto sigma_yy = filt(y * y) - mu_yy;
    auto sigma_xy = filt(x * y) - mu_xy;

    auto num = (2.0 * mu_xy + c1) * (2.0 * sigma_xy + c2);
    auto den = (mu_xx + mu_yy + c1) * (sigma_xx + sigma_yy + c2);
    return torch::mean(num / den).item<double>();
}

struct EvalRecord {
    std::string id;
    double psnr_db = 0.0;
    double ssim_val = 0.0;
    double seconds = 0.0;
    double baseline_psnr_db = 0.0;  // PSNR(blurred, sharp)
    double baseline_ssim = 0.0;
    std::string error;  // non-empty entries are excluded from aggregates
};

struct MetricAggregate {
    double highest = 0.0;
    double lowest = 0.0;
    double mean = 0.0;
};

struct EvalReport {
    std::vector<EvalRecord> records;
    MetricAggregate psnr_agg, ssim_agg, time_agg;
    MetricAggregate baseline_psnr_agg, baseline_ssim_agg;
    int64_t psnr_inf_excluded = 0;  // identical-image records left out of the PSNR mean
    int64_t failed = 0;
    nlohmann::json config_echo;

    static MetricAggregate aggregate(const std::vector<double>& v) {
        MetricAggregate agg;
        if (v.empty()) return agg;
        agg.highest = *std::max_element(v.begin(), v.end());
        agg.lowest = *std::min_element(v.begin(), v.end());
        double sum = 0.0;
        for (double x : v) sum += x;
        agg.mean = sum / static_cast<double>(v.size());
        return agg;
    }

    void recompute_aggregates() {
        std::vector<double> ps, ss, ts, bps, bss;
        psnr_inf_excluded = 0;
        failed = 0;
        for (const auto& r : records) {
            if (!r.error.empty()) { ++failed; continue; }
            if (std::isinf(r.psnr_db))
                ++psnr_inf_excluded;
            else
                ps.push_back(r.psnr_db);
            ss.push_back(r.ssim_val);
            ts.push_back(r.seconds);
            if (!std::isinf(r.baseline_psnr_db)) bps.push_back(r.baseline_psnr_db);
            bss.push_back(r.baseline_ssim);
        }
        psnr_agg = aggregate(ps);
        ssim_agg = aggregate(ss);
        time_agg = aggregate(ts);
        baseline_psnr_agg = aggregate(bps);
        baseline_ssim_agg = aggregate(bss);
    }

    nlohmann::json to_json() const {
        auto agg_j = [](const MetricAggregate& a) {
            return nlohmann::json{{"highest", a.highest}, {"lowest", a.lowest}, {"mean", a.mean}};
        };
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : records) {
            nlohmann::json rj{{"id", r.id},
                              {"ssim", r.ssim_val},
                              {"seconds", r.seconds},
                              {"baseline_ssim", r.baseline_ssim}};
            rj["psnr_db"] = std::isinf(r.psnr_db) ? nlohmann::json("inf") : nlohmann::json(r.psnr_db);
            rj["baseline_psnr_db"] = std::isinf(r.baseline_psnr_db)
                                         ? nlohmann::json("inf")
                                         : nlohmann::json(r.baseline_psnr_db);
            if (!r.error.empty()) rj["error"] = r.error;
            recs.push_back(rj);
        }
        return {{"records", recs},
                {"psnr", agg_j(psnr_agg)},
                {"ssim", agg_j(ssim_agg)},
                {"time", agg_j(time_agg)},
                {"baseline_psnr", agg_j(baseline_psnr_agg)},
                {"baseline_ssim", agg_j(baseline_ssim_agg)},
                {"psnr_inf_excluded", psnr_inf_excluded},
                {"failed", failed},
                {"config", config_echo}};
    }

    // Aligned text table: rows PSNR/SSIM/Time, columns Highest/Lowest/Mean.
    std::string to_table() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4);
        os << std::setw(8) << "Metrics" << std::setw(12) << "Highest" << std::setw(12) << "Lowest"
           << std::setw(12) << "Mean" << "\n";
        auto row = [&](const char* name, const MetricAggregate& a) {
            os << std::setw(8) << name << std::setw(12) << a.highest << std::setw(12) << a.lowest
               << std::setw(12) << a.mean << "\n";
        };
        row("PSNR", psnr_agg);
        row("SSIM", ssim_agg);
        row("Time", time_agg);
        if (psnr_inf_excluded > 0)
            os << "(" << psnr_inf_excluded << " identical-image PSNR record(s) excluded from mean)\n";
        return os.str();
    }
};

// Restorer maps a blurred byte image to (restored byte image, seconds).
using Restorer = std::function<std::pair<ImageTensor, double>(const ImageTensor&)>;

inline EvalReport evaluate_with(const Restorer& restore, const PairedDataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    EvalReport report;
    for (size_t i = 0; i < ds.size(); ++i) {
        EvalRecord rec;
        try {
            ImagePair pair = ds.load(i);
            rec.id = pair.id;
            auto [restored, secs] = restore(pair.blurred);
            rec.seconds = secs;
            rec.psnr_db = psnr(restored, pair.sharp);
            rec.ssim_val = ssim(restored, pair.sharp);
            rec.baseline_psnr_db = psnr(pair.blurred, pair.sharp);
            rec.baseline_ssim = ssim(pair.blurred, pair.sharp);
        } catch (const std::exception& e) {
            if (rec.id.empty()) rec.id = ds.pairs.at(i).id;
            rec.error = e.what();
        }
        report.records.push_back(rec);
    }
    report.recompute_aggregates();
    return report;
}

}  // namespace deblur

#endif
