/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <set>

#include "cdan/dataset.hpp"
#include "cdan/error.hpp"

namespace cdan {
namespace {

void require_same_dims(const char* op, std::size_t h1, std::size_t w1, std::size_t h2, std::size_t w2) {
    if (h1 != h2 || w1 != w2) {
        throw ShapeError(std::string(op) + ": image sizes " + std::to_string(h1) + "x" + std::to_string(w1) + " and " +
                         std::to_string(h2) + "x" + std::to_string(w2) + " differ");
    }
}

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w,
                                 const std::array<double, kSsimWindow>& taps) {
    const std::size_t k = kSsimWindow, oh = h - k + 1, ow = w - k + 1;
    std::vector<double> rows(h * ow), out(oh * ow);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += taps[t] * plane[y * w + x + t];
            rows[y * ow + x] = acc;
        }
    }
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += taps[t] * rows[(y + t) * ow + x];
            out[y * ow + x] = acc;
        }
    }
    return out;
}

std::string format_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

double psnr(const Image& x, const Image& y) {
    require_same_dims("psnr", x.height, x.width, y.height, y.width);
    if (x.pixels.empty()) throw ShapeError("psnr: empty images");
    std::uint64_t sse = 0;
    for (std::size_t i = 0; i < x.pixels.size(); ++i) {
        const int d = int(x.pixels[i]) - int(y.pixels[i]);
        sse += std::uint64_t(d * d);
    }
    if (sse == 0) return std::numeric_limits<double>::infinity();
    const double mse = double(sse) / double(x.pixels.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

std::array<double, kSsimWindow> ssim_gaussian_taps() {
    std::array<double, kSsimWindow> taps{};
    const double center = double(kSsimWindow / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const double d = double(i) - center;
        taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        total += taps[i];
    }
    for (double& t : taps) t /= total;
    return taps;
}

double ssim(const FloatImage& x, const FloatImage& y) {
    require_same_dims("ssim", x.height, x.width, y.height, y.width);
    if (x.channels != y.channels || x.channels == 0) throw ShapeError("ssim: channel counts differ");
    if (x.height < kSsimWindow || x.width < kSsimWindow) {
        throw ShapeError("ssim: images of " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                         " are smaller than the " + std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) +
                         " window");
    }
    const auto taps = ssim_gaussian_taps();
    const std::size_t plane = x.height * x.width;
    std::vector<double> xx(plane), yy(plane), xy(plane);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < x.channels; ++c) {
        const double* px = x.values.data() + c * plane;
        const double* py = y.values.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            xx[i] = px[i] * px[i];
            yy[i] = py[i] * py[i];
            xy[i] = px[i] * py[i];
        }
        const auto mu_x = filter_valid(px, x.height, x.width, taps);
        const auto mu_y = filter_valid(py, x.height, x.width, taps);
        const auto e_xx = filter_valid(xx.data(), x.height, x.width, taps);
        const auto e_yy = filter_valid(yy.data(), x.height, x.width, taps);
        const auto e_xy = filter_valid(xy.data(), x.height, x.width, taps);
        for (std::size_t i = 0; i < mu_x.size(); ++i) {
            const double var_x = e_xx[i] - mu_x[i] * mu_x[i];
            const double var_y = e_yy[i] - mu_y[i] * mu_y[i];
            const double cov = e_xy[i] - mu_x[i] * mu_y[i];
            const double num = (2.0 * mu_x[i] * mu_y[i] + kSsimC1) * (2.0 * cov + kSsimC2);
            const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kSsimC1) * (var_x + var_y + kSsimC2);
            total += num / den;
        }
        count += mu_x.size();
    }
    return total / double(count);
}

double ssim(const Image& x, const Image& y) { return ssim(to_float(x), to_float(y)); }

MetricReport summarize(std::vector<ImageScore> scores) {
    MetricReport report;
    report.images = std::move(scores);
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const ImageScore& s : report.images) {
        ssim_sum += s.ssim;
        if (std::isinf(s.psnr_db)) {
            ++report.infinite_psnr;
            report.warnings.push_back(s.filename + ": prediction equals ground truth, PSNR is infinite and excluded from the mean");
        } else {
            psnr_sum += s.psnr_db;
        }
    }
    const std::size_t finite = report.images.size() - report.infinite_psnr;
    report.mean_psnr_db = finite ? psnr_sum / double(finite) : std::numeric_limits<double>::infinity();
    report.mean_ssim = report.images.empty() ? 0.0 : ssim_sum / double(report.images.size());
    return report;
}

MetricReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir) {
    namespace fs = std::filesystem;
    const auto pred = list_png_files(pred_dir);
    const auto gt = list_png_files(gt_dir);
    if (pred.empty()) throw IoError("no PNG files in '" + pred_dir + "'");
    const std::set<std::string> gt_set(gt.begin(), gt.end()), pred_set(pred.begin(), pred.end());
    for (const auto& name : pred) {
        if (!gt_set.count(name)) throw IoError("missing counterpart: " + (fs::path(gt_dir) / name).string());
    }
    for (const auto& name : gt) {
        if (!pred_set.count(name)) throw IoError("missing counterpart: " + (fs::path(pred_dir) / name).string());
    }
    std::vector<ImageScore> scores;
    for (const auto& name : pred) {
        const Image p = read_png((fs::path(pred_dir) / name).string());
        const Image g = read_png((fs::path(gt_dir) / name).string());
        scores.push_back({name, psnr(p, g), ssim(p, g)});
    }
    return summarize(std::move(scores));
}

std::string report_csv(const MetricReport& report) {
    std::string csv = "filename,psnr_db,ssim\n";
    for (const ImageScore& s : report.images) csv += s.filename + "," + format_value(s.psnr_db) + "," + format_value(s.ssim) + "\n";
    csv += "mean," + format_value(report.mean_psnr_db) + "," + format_value(report.mean_ssim) + "\n";
    return csv;
}

}  // namespace cdan
