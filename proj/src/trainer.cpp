/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cdan/checkpoint.hpp"
#include "cdan/error.hpp"

namespace cdan {

Adam::Adam(std::vector<nn::ParamRef> params, AdamOptions options) : params_(std::move(params)), options_(options) {
    for (const nn::ParamRef& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

void Adam::step() {
    for (const nn::ParamRef& p : params_) {
        if (!p.tensor.has_grad()) throw Error("Adam: parameter '" + p.name + "' has no gradient");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(options_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(options_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& param = params_[i].tensor;
        auto values = param.mutable_data();
        const auto grad = param.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * grad[k];
            v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * grad[k] * grad[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            values[k] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
        }
        param.zero_grad();
    }
}

std::string loss_csv_header() { return "step,epoch,mse,perceptual,composite"; }

std::string loss_csv_row(const StepRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g", r.step, r.epoch, r.mse, r.perceptual, r.composite);
    return buf;
}

TrainResult train(const TrainConfig& config, const std::vector<ImagePair>& dataset,
                  std::shared_ptr<const FeatureExtractor> extractor, const StepCallback& on_step) {
    namespace fs = std::filesystem;
    if (config.epochs < 1) throw ValueError("train: epochs must be >= 1");
    if (config.batch_size < 1) throw ValueError("train: batch size must be >= 1");
    if (dataset.size() < config.batch_size) {
        throw ValueError("train: dataset of " + std::to_string(dataset.size()) + " pairs is smaller than one batch of " +
                         std::to_string(config.batch_size));
    }
    if (config.lambda > 0.0 && !extractor) throw ValueError("train: lambda > 0 needs a feature extractor");

    CdanModel model(config.model, config.seed);
    Adam adam(model.registry().params, {.lr = config.lr});
    Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const LossConfig loss{config.lambda, std::move(extractor)};

    std::ofstream log;
    auto checkpoint_path = [&](const std::string& name) { return (fs::path(config.out_dir) / name).string(); };
    if (!config.out_dir.empty()) {
        fs::create_directories(config.out_dir);
        log.open(checkpoint_path("loss.csv"), std::ios::trunc);
        if (!log) throw IoError("cannot write loss log in '" + config.out_dir + "'");
        log << loss_csv_header() << '\n';
    }

    std::vector<StepRecord> history;
    const std::size_t batches = dataset.size() / config.batch_size;
    std::size_t step = 0;
    bool done = false;
    for (std::size_t epoch = 0; epoch < config.epochs && !done; ++epoch) {
        const auto order = epoch_order(dataset.size(), config.seed, epoch);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::span<const std::size_t> idx(order.data() + b * config.batch_size, config.batch_size);
            const auto [low, high] = make_batch(dataset, idx);
            // The forward pass updates running stats, so keep the last finite ones for abort.cdan.
            std::vector<std::vector<double>> stats_before;
            for (const auto& buf : model.registry().buffers) stats_before.push_back(*buf.values);
            const Tensor pred = model.forward(low, ops::Mode::train, &dropout_rng);
            const LossTerms terms = composite_loss(loss, pred, high);
            const double composite = terms.total.item();
            if (!std::isfinite(composite)) {
                const auto& buffers = model.registry().buffers;
                for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].values = stats_before[i];
                if (!config.out_dir.empty()) save_checkpoint(model, {config.seed, epoch}, checkpoint_path("abort.cdan"));
                throw NonFiniteLossError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                                         std::to_string(epoch) + "): mse=" + std::to_string(terms.mse) +
                                         " perceptual=" + std::to_string(terms.perceptual) +
                                         " composite=" + std::to_string(composite));
            }
            terms.total.backward();
            adam.step();

            const StepRecord record{step, epoch, terms.mse, terms.perceptual, composite};
            history.push_back(record);
            if (log) log << loss_csv_row(record) << '\n' << std::flush;
            if (on_step) on_step(record);
            ++step;
            if (config.max_steps && step >= config.max_steps) {
                done = true;
                break;
            }
        }
        if (!config.out_dir.empty() && config.checkpoint_every && (epoch + 1) % config.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "epoch_%03zu.cdan", epoch + 1);
            save_checkpoint(model, {config.seed, epoch + 1}, checkpoint_path(name));
        }
    }
    if (!config.out_dir.empty()) {
        const std::uint64_t finished = history.empty() ? 0 : history.back().epoch + 1;
        save_checkpoint(model, {config.seed, finished}, checkpoint_path("final.cdan"));
    }
    return {std::move(model), std::move(history)};
}

}  // namespace cdan
