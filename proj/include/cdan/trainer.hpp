/*
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdan/dataset.hpp"
#include "cdan/losses.hpp"
#include "cdan/model.hpp"
#include "cdan/nn.hpp"

namespace cdan {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed, named parameter list.
class Adam {
public:
    Adam(std::vector<nn::ParamRef> params, AdamOptions options = {});

    /// Applies one update from the accumulated gradients, then clears them.
    /// Throws naming the first parameter without a gradient.
    void step();

    std::uint64_t steps() const { return t_; }
    const AdamOptions& options() const { return options_; }
    std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
    std::span<const double> second_moment(std::size_t i) const { return v_[i]; }

private:
    std::vector<nn::ParamRef> params_;
    AdamOptions options_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::uint64_t t_ = 0;
};

struct TrainConfig {
    std::size_t epochs = 80;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double lambda = 0.25;
    std::uint64_t seed = 0;
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    std::size_t checkpoint_every = 0;
    /// Stop after this many optimizer steps (0 = run all epochs).
    std::size_t max_steps = 0;
    /// Directory for checkpoints and loss.csv; empty keeps everything in memory.
    std::string out_dir;
    CdanConfig model;
};

struct StepRecord {
    std::size_t step;
    std::size_t epoch;
    double mse;
    double perceptual;
    double composite;
};

struct TrainResult {
    CdanModel model;
    std::vector<StepRecord> history;
};

using StepCallback = std::function<void(const StepRecord&)>;

/// Composite-loss training with Adam. Batches follow epoch_order(seed, epoch)
/// and the trailing partial batch is dropped. `extractor` may be null when
/// lambda == 0.
TrainResult train(const TrainConfig& config, const std::vector<ImagePair>& dataset,
                  std::shared_ptr<const FeatureExtractor> extractor, const StepCallback& on_step = {});

/// CSV header and row writer for the loss log.
std::string loss_csv_header();
std::string loss_csv_row(const StepRecord& record);

}  // namespace cdan
