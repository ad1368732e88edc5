/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <string>
#include <vector>

#include "cdan/image.hpp"

namespace cdan {

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Peak signal-to-noise ratio in dB with MAX = 255. Identical images give
/// +infinity.
double psnr(const Image& x, const Image& y);

/// Normalized 1-D Gaussian taps of the SSIM window.
std::array<double, kSsimWindow> ssim_gaussian_taps();

/// Mean SSIM over all valid window positions and channels of [0, 1] images.
/// Both dims must be at least kSsimWindow.
double ssim(const FloatImage& x, const FloatImage& y);
double ssim(const Image& x, const Image& y);

struct ImageScore {
    std::string filename;
    double psnr_db;
    double ssim;
};

struct MetricReport {
    std::vector<ImageScore> images;
    double mean_psnr_db = 0.0;  // over finite entries only
    double mean_ssim = 0.0;
    std::size_t infinite_psnr = 0;
    std::vector<std::string> warnings;
};

/// Scores every *.png in `pred_dir` against the same name in `gt_dir`,
/// in lexicographic order. Missing counterparts are an error.
MetricReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir);

MetricReport summarize(std::vector<ImageScore> scores);

/// "filename,psnr_db,ssim" rows followed by a "mean" row.
std::string report_csv(const MetricReport& report);

}  // namespace cdan
