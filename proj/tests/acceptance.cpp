/*
 * SPDX-License-Identifier: Apache-2.0
 */
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "cdan/checkpoint.hpp"
#include "cdan/losses.hpp"
#include "cdan/metrics.hpp"
#include "cdan/model.hpp"
#include "cdan/postprocess.hpp"
#include "cdan/trainer.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

using namespace cdan;
using namespace cdan::testing;
using ops::Mode;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kOverfitMseLimit = 0.01;
constexpr double kOverfitBudgetSeconds = 300.0;
constexpr std::size_t kOverfitSteps = 200;
constexpr double kPsnrTol = 1e-9;
constexpr double kSsimOracleTol = 1e-6;
constexpr double kSsimConstantTol = 1e-12;
constexpr double kAdamTol = 1e-12;

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records a failed condition, keeping the first few messages.
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (pass || detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what;
        pass = false;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

Tensor weighted_sum(const Tensor& t, std::uint64_t seed = 99) {
    return ops::sum(ops::mul(t, projection_weights(t.shape(), seed)));
}

std::vector<NamedLeaf> leaves_of(const nn::Registry& reg) {
    std::vector<NamedLeaf> leaves;
    for (const auto& p : reg.params) leaves.push_back({p.name, p.tensor});
    return leaves;
}

CdanConfig small_model() {
    CdanConfig c;
    c.encoder_channels = {3, 8, 8, 12, 16};
    c.decoder_channels = {16, 12, 8, 8, 6};
    c.dense_layers = 2;
    c.growth_rate = 4;
    c.cbam_reduction = 4;
    return c;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto start = Clock::now();
    Outcome out;
    Rng rng(2024);
    double worst = 0.0;
    std::string worst_name;
    std::size_t checks = 0, coords = 0, kinks = 0;
    auto run = [&](const std::string& name, const std::function<Tensor()>& loss, std::vector<NamedLeaf> leaves,
                   std::size_t samples) {
        const GradCheckResult r = check_gradients(loss, std::move(leaves), samples, 1000 + checks);
        ++checks;
        coords += r.checked;
        kinks += r.kinks;
        out.expect(r.checked > 0, name + " checked nothing");
        out.expect(r.max_rel_error <= kGradTol, name + ": " + r.worst);
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_name = name;
        }
    };

    {
        Tensor x = random_tensor({2, 3, 7, 6}, rng, -1, 1, true);
        Tensor w = random_tensor({4, 3, 3, 3}, rng, -1, 1, true);
        Tensor b = random_tensor({4}, rng, -1, 1, true);
        run("conv2d", [&] { return weighted_sum(ops::conv2d(x, w, b, 2, 1)); }, {{"x", x}, {"w", w}, {"b", b}}, 40);
        run("conv2d s1p0", [&] { return weighted_sum(ops::conv2d(x, w, b, 1, 0)); }, {{"x", x}, {"w", w}, {"b", b}}, 40);
    }
    {
        Tensor x = random_tensor({2, 3, 5, 4}, rng, -1, 1, true);
        Tensor w = random_tensor({3, 2, 4, 4}, rng, -1, 1, true);
        Tensor b = random_tensor({2}, rng, -1, 1, true);
        run("conv_transpose2d", [&] { return weighted_sum(ops::conv_transpose2d(x, w, b, 2, 1)); },
            {{"x", x}, {"w", w}, {"b", b}}, 40);
        Tensor w3 = random_tensor({3, 2, 3, 3}, rng, -1, 1, true);
        run("conv_transpose2d k3", [&] { return weighted_sum(ops::conv_transpose2d(x, w3, b, 1, 1)); },
            {{"x", x}, {"w", w3}, {"b", b}}, 40);
    }
    {
        Tensor x = random_tensor({2, 3, 4, 4}, rng, -2, 2, true);
        Tensor g = random_tensor({3}, rng, 0.5, 1.5, true);
        Tensor b = random_tensor({3}, rng, -1, 1, true);
        for (Mode mode : {Mode::train, Mode::eval}) {
            run(mode == Mode::train ? "batch_norm train" : "batch_norm eval",
                [&] {
                    auto stats = ops::BatchNormStats{{0.1, -0.2, 0.3}, {1.5, 0.7, 2.0}};
                    return weighted_sum(ops::batch_norm(x, g, b, stats, mode));
                },
                {{"x", x}, {"gamma", g}, {"beta", b}}, 40);
        }
    }
    {
        Tensor x = random_tensor({2, 3, 4, 4}, rng, -1, 1, true);
        Tensor y = random_tensor({2, 3, 4, 4}, rng, -1, 1, true);
        Tensor ac = random_tensor({2, 3, 1, 1}, rng, -1, 1, true);
        Tensor as = random_tensor({2, 1, 4, 4}, rng, -1, 1, true);
        const std::vector<NamedLeaf> xy = {{"x", x}, {"y", y}};
        run("relu", [&] { return weighted_sum(ops::relu(x)); }, {{"x", x}}, 96);
        run("sigmoid", [&] { return weighted_sum(ops::sigmoid(x)); }, {{"x", x}}, 96);
        run("max_pool2d", [&] { return weighted_sum(ops::max_pool2d(x)); }, {{"x", x}}, 96);
        run("add", [&] { return weighted_sum(ops::add(x, y)); }, xy, 30);
        run("sub", [&] { return weighted_sum(ops::sub(x, y)); }, xy, 30);
        run("mul", [&] { return weighted_sum(ops::mul(x, y)); }, xy, 30);
        run("scale", [&] { return weighted_sum(ops::scale(x, -2.5)); }, {{"x", x}}, 30);
        run("mean", [&] { return ops::mean(ops::mul(x, x)); }, {{"x", x}}, 30);
        run("concat_channels", [&] { return weighted_sum(ops::concat_channels(x, y)); }, xy, 30);
        run("global_avg_pool", [&] { return weighted_sum(ops::global_avg_pool(x)); }, {{"x", x}}, 96);
        run("global_max_pool", [&] { return weighted_sum(ops::global_max_pool(x)); }, {{"x", x}}, 96);
        run("channel_mean", [&] { return weighted_sum(ops::channel_mean(x)); }, {{"x", x}}, 96);
        run("channel_max", [&] { return weighted_sum(ops::channel_max(x)); }, {{"x", x}}, 96);
        run("broadcast_mul channel", [&] { return weighted_sum(ops::broadcast_mul(x, ac)); }, {{"x", x}, {"a", ac}}, 40);
        run("broadcast_mul spatial", [&] { return weighted_sum(ops::broadcast_mul(x, as)); }, {{"x", x}, {"a", as}}, 40);
        run("pad_reflect", [&] { return weighted_sum(ops::pad_reflect(x, 3, 2)); }, {{"x", x}}, 96);
        run("crop", [&] { return weighted_sum(ops::crop(x, 3, 2)); }, {{"x", x}}, 96);
        Tensor d = random_tensor({1, 2, 6, 6}, rng, -1, 1, true);
        run("dropout",
            [&] {
                Rng mask(77);
                return weighted_sum(ops::dropout(d, 0.3, Mode::train, mask));
            },
            {{"x", d}}, 72);
    }
    {
        Tensor pred = random_tensor({1, 3, 8, 8}, rng, 0, 1, true);
        const Tensor target = random_tensor({1, 3, 8, 8}, rng, 0, 1);
        run("mse_loss", [&] { return mse_loss(pred, target); }, {{"pred", pred}}, 60);
        const LossConfig loss{0.25, std::make_shared<VggFeatures>(VggFeatures::kDefaultDepth, 5)};
        run("composite_loss", [&] { return composite_loss(loss, pred, target).total; }, {{"pred", pred}}, 24);
    }
    for (Mode mode : {Mode::train, Mode::eval}) {
        nn::ConvBlock block(3, 5, rng);
        nn::Registry reg;
        block.register_into("block", reg);
        Tensor in = random_tensor({2, 3, 5, 5}, rng, -1, 1, true);
        auto leaves = leaves_of(reg);
        leaves.push_back({"x", in});
        run(mode == Mode::train ? "ConvBlock train" : "ConvBlock eval",
            [&] { return weighted_sum(block.forward(in, mode)); }, leaves, 20);
    }
    {
        nn::DenseBlock block(4, 3, 3, rng);
        nn::Registry reg;
        block.register_into("dense", reg);
        Tensor in = random_tensor({2, 4, 5, 5}, rng, -1, 1, true);
        auto leaves = leaves_of(reg);
        leaves.push_back({"x", in});
        run("DenseBlock", [&] { return weighted_sum(block.forward(in, Mode::train)); }, leaves, 12);
    }
    {
        nn::Cbam cbam(6, 2, rng);
        nn::Registry reg, channel_reg, spatial_reg;
        cbam.register_into("cbam", reg);
        cbam.channel.register_into("channel", channel_reg);
        cbam.spatial.register_into("spatial", spatial_reg);
        Tensor in = random_tensor({2, 6, 5, 5}, rng, -1, 1, true);
        auto with_input = [&](const nn::Registry& r) {
            auto leaves = leaves_of(r);
            leaves.push_back({"x", in});
            return leaves;
        };
        run("ChannelAttention", [&] { return weighted_sum(cbam.channel.forward(in)); }, with_input(channel_reg), 12);
        run("SpatialAttention", [&] { return weighted_sum(cbam.spatial.forward(in)); }, with_input(spatial_reg), 12);
        run("CBAM", [&] { return weighted_sum(cbam.forward(in)); }, with_input(reg), 12);
    }
    {
        CdanModel model(CdanConfig{}, 11);
        Tensor x = random_tensor({1, 3, 16, 16}, rng, 0, 1, true);
        std::vector<NamedLeaf> leaves{{"input", x}};
        for (const auto& p : model.registry().params) leaves.push_back({p.name, p.tensor});
        run("CDAN 1x3x16x16",
            [&] {
                Rng dropout_rng(21);
                return weighted_sum(model.forward(x, Mode::train, &dropout_rng), 5);
            },
            leaves, 6);
    }
    const double elapsed = seconds_since(start);
    out.expect(elapsed < kGradBudgetSeconds, "runtime " + fmt("%.1f", elapsed) + " s over budget");
    out.detail = std::to_string(checks) + " checks, " + std::to_string(coords) + " coordinates (" +
                 std::to_string(kinks) + " at kinks), worst " +
                 fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.1f", elapsed) + " s" +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

Outcome cbam_recomposition() {
    Outcome out;
    Rng rng(3);
    const std::size_t channels[] = {4, 16, 32, 64, 512};
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t c = channels[trial % 5];
        nn::Cbam cbam(c, 16, rng);
        const std::size_t n = 1 + trial % 2, h = 3 + trial % 4, w = 4 + trial % 3;
        const Tensor f = random_tensor({n, c, h, w}, rng, -3, 3);
        const Tensor mc = cbam.channel.forward(f);
        std::vector<double> refined(f.numel()), result(f.numel());
        for (std::size_t i = 0; i < f.numel(); ++i) refined[i] = f[i] * mc[i / (h * w)];
        const Tensor refined_t = Tensor::from_data(f.shape(), refined);
        const Tensor ms = cbam.spatial.forward(refined_t);
        for (std::size_t i = 0; i < f.numel(); ++i) {
            const std::size_t batch = i / (c * h * w), pixel = i % (h * w);
            result[i] = refined[i] * ms[batch * h * w + pixel];
        }
        out.expect(bitwise_equal(cbam.forward(f).data(), result), "trial " + std::to_string(trial) + " differs");
    }
    out.detail = "20 random inputs";
    return out;
}

Outcome shape_contract() {
    Outcome out;
    const NoGradGuard no_grad;
    const CdanModel model(CdanConfig{}, 1);
    Rng rng(4);
    ForwardTrace trace;
    const Tensor y = model.forward(random_tensor({1, 3, 200, 200}, rng, 0, 1), Mode::eval, nullptr, &trace);
    out.expect(trace.bottleneck == Shape{1, 512, 25, 25}, "bottleneck " + shape_str(trace.bottleneck));
    out.expect(y.shape() == Shape{1, 3, 200, 200}, "output " + shape_str(y.shape()));
    const Tensor big = model.forward(random_tensor({1, 3, 600, 400}, rng, 0, 1), Mode::eval);
    out.expect(big.shape() == Shape{1, 3, 600, 400}, "600x400 output " + shape_str(big.shape()));
    out.detail = "200x200 -> bottleneck " + shape_str(trace.bottleneck) + ", 600x400 -> " + shape_str(big.shape());
    return out;
}

Outcome dense_arithmetic() {
    Outcome out;
    Rng rng(5);
    std::string summary;
    for (std::size_t c : {32u, 64u, 128u, 256u}) {
        const nn::DenseBlock block(c, 4, 16, rng);
        const Tensor y = block.forward(random_tensor({1, c, 4, 4}, rng), Mode::eval);
        out.expect(block.out_channels() == c + 64 && y.dim(1) == c + 64,
                   std::to_string(c) + " -> " + std::to_string(y.dim(1)));
        summary += (summary.empty() ? "" : ", ") + std::to_string(c) + "->" + std::to_string(y.dim(1));
    }
    out.detail = summary;
    return out;
}

Outcome metric_oracles() {
    Outcome out;
    Rng rng(6);
    auto random_image = [&](std::size_t h, std::size_t w) {
        Image img(h, w);
        for (auto& p : img.pixels) p = std::uint8_t(rng.below(256));
        return img;
    };
    auto random_float = [&](std::size_t h, std::size_t w) {
        FloatImage img{3, h, w, std::vector<double>(3 * h * w)};
        for (double& v : img.values) v = rng.uniform();
        return img;
    };
    double psnr_err = 0.0, ssim_err = 0.0, const_err = 0.0;
    for (int k = 0; k < 10; ++k) {
        const Image a = random_image(24, 31), b = random_image(24, 31);
        psnr_err = std::max(psnr_err, std::abs(psnr(a, b) - psnr_oracle(a, b)));
    }
    for (int k = 0; k < 3; ++k) {
        const FloatImage a = random_float(19, 24);
        FloatImage b = a;
        for (double& v : b.values) v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
        ssim_err = std::max(ssim_err, std::abs(ssim(a, b) - ssim_oracle(a, b)));
        out.expect(ssim(a, a) == 1.0, "ssim(x, x) != 1");
    }
    for (auto [a, b] : {std::pair{0.2, 0.7}, {0.0, 1.0}, {0.5, 0.5}, {0.9, 0.1}}) {
        const FloatImage x{3, 16, 12, std::vector<double>(3 * 16 * 12, a)};
        const FloatImage y{3, 16, 12, std::vector<double>(3 * 16 * 12, b)};
        const double expected = (2 * a * b + 1e-4) / (a * a + b * b + 1e-4);
        const_err = std::max(const_err, std::abs(ssim(x, y) - expected));
    }
    out.expect(psnr_err <= kPsnrTol, "PSNR error " + fmt("%.2e", psnr_err));
    out.expect(ssim_err <= kSsimOracleTol, "SSIM oracle error " + fmt("%.2e", ssim_err));
    out.expect(const_err <= kSsimConstantTol, "constant SSIM error " + fmt("%.2e", const_err));
    out.detail = "PSNR err " + fmt("%.1e", psnr_err) + ", SSIM err " + fmt("%.1e", ssim_err) + ", constant err " +
                 fmt("%.1e", const_err) + (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

// Smooth test scenes whose channels stay inside [70, 185].
std::vector<Image> postprocess_scenes() {
    std::vector<Image> scenes;
    for (int s = 0; s < 5; ++s) {
        Image img(48, 64);
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    const double t = std::sin(0.11 * (s + 1) * x + 0.07 * (c + 1) * y + s) *
                                     std::cos(0.05 * (s + 2) * y - 0.13 * c * x);
                    img.pixels[(y * img.width + x) * 3 + c] = std::uint8_t(std::lround(127.5 + 57.0 * t));
                }
        scenes.push_back(std::move(img));
    }
    return scenes;
}

double exact_mean_luma(const Image& img) {
    double total = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); i += 3)
        total += 0.299 * img.pixels[i] + 0.587 * img.pixels[i + 1] + 0.114 * img.pixels[i + 2];
    return total / double(img.height * img.width);
}

Outcome postprocess_exactness() {
    Outcome out;
    const auto scenes = postprocess_scenes();
    double worst = 0.0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const Image& img = scenes[s];
        const Image other = scenes[(s + 1) % scenes.size()];
        out.expect(blend(img, other, 0.0) == img && blend(img, other, 1.0) == other, "blend endpoints");
        out.expect(enhance_color(img, 1.0) == img, "color alpha 1");
        out.expect(enhance_contrast(img, 1.0) == img, "contrast alpha 1");
        for (double alpha : {0.5, 1.12, 2.0}) {
            const Image enhanced = enhance_contrast(img, alpha);
            const double drift = std::abs(exact_mean_luma(enhanced) - exact_mean_luma(img));
            const int level_drift = std::abs(int(mean_luma(enhanced)) - int(mean_luma(img)));
            worst = std::max(worst, drift);
            out.expect(drift <= 1.0 && level_drift <= 1,
                       "scene " + std::to_string(s) + " alpha " + fmt("%.2f", alpha) + " drift " + fmt("%.3f", drift));
        }
    }
    out.detail = "5 scenes, worst mean-luma drift " + fmt("%.3f", worst) + " levels" +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

ImagePair overfit_pair() {
    ImagePair p{"scene", {3, 64, 64, std::vector<double>(3 * 64 * 64)}, {3, 64, 64, std::vector<double>(3 * 64 * 64)}};
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x) {
                const double h = 0.5 + 0.4 * std::sin(0.1 * x + 0.2 * y + c) * std::cos(0.05 * x * y / 64.0);
                p.high.values[(c * 64 + y) * 64 + x] = std::round(h * 255) / 255;
                p.low.values[(c * 64 + y) * 64 + x] = std::round(h * 0.2 * 255) / 255;
            }
    return p;
}

Outcome overfit_smoke() {
    Outcome out;
    const auto start = Clock::now();
    const ImagePair pair = overfit_pair();
    TrainConfig cfg;
    cfg.epochs = kOverfitSteps;
    cfg.batch_size = 1;
    cfg.lr = 1e-3;
    cfg.lambda = 0.0;
    cfg.seed = 3;
    const TrainResult r = train(cfg, {pair}, nullptr);
    const double per_pixel = 3.0 * 64 * 64;
    out.expect(r.history.size() == kOverfitSteps, std::to_string(r.history.size()) + " steps");
    const double first = r.history.front().mse / per_pixel, last = r.history.back().mse / per_pixel;

    const NoGradGuard no_grad;
    const auto [low, high] = make_batch({pair}, std::vector<std::size_t>{0});
    const double eval_mse = mse_loss(r.model.forward(low, Mode::eval), high).item() / per_pixel;
    const double elapsed = seconds_since(start);
    out.expect(last < kOverfitMseLimit, "final training MSE " + fmt("%.5f", last));
    out.expect(eval_mse < kOverfitMseLimit, "eval MSE " + fmt("%.5f", eval_mse));
    out.expect(elapsed < kOverfitBudgetSeconds, "runtime " + fmt("%.1f", elapsed) + " s over budget");
    out.detail = "per-pixel MSE " + fmt("%.5f", first) + " -> " + fmt("%.5f", last) + " (eval " + fmt("%.5f", eval_mse) +
                 "), " + fmt("%.1f", elapsed) + " s" + (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

Outcome determinism_and_persistence() {
    Outcome out;
    Rng rng(9);
    std::vector<ImagePair> data;
    for (int k = 0; k < 4; ++k) {
        ImagePair p{"p" + std::to_string(k), {3, 32, 32, {}}, {3, 32, 32, {}}};
        for (std::size_t i = 0; i < 3 * 32 * 32; ++i) {
            p.high.values.push_back(rng.uniform());
            p.low.values.push_back(0.25 * p.high.values.back());
        }
        data.push_back(std::move(p));
    }
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 2;
    cfg.lambda = 0.25;
    cfg.seed = 42;
    cfg.model = small_model();
    const auto vgg = std::make_shared<VggFeatures>(VggFeatures::kDefaultDepth, 1);
    const TrainResult a = train(cfg, data, vgg), b = train(cfg, data, vgg);
    out.expect(a.history.size() == 10 && b.history.size() == 10, "expected 10 steps");
    for (std::size_t k = 0; k < std::min(a.history.size(), b.history.size()); ++k) {
        out.expect(std::bit_cast<std::uint64_t>(a.history[k].composite) ==
                       std::bit_cast<std::uint64_t>(b.history[k].composite),
                   "step " + std::to_string(k) + " loss differs");
    }

    const fs::path dir = fs::temp_directory_path() / "cdan_acceptance_ckpt";
    fs::create_directories(dir);
    const std::string path = (dir / "model.cdan").string();
    save_checkpoint(a.model, {cfg.seed, 5}, path);
    const auto [loaded, meta] = load_checkpoint(path);
    out.expect(meta == CheckpointMeta{42, 5}, "metadata differs");
    const auto& ra = a.model.registry();
    const auto& rl = loaded.registry();
    out.expect(ra.params.size() == rl.params.size() && ra.buffers.size() == rl.buffers.size(), "registry sizes differ");
    std::size_t tensors = 0;
    for (std::size_t i = 0; i < std::min(ra.params.size(), rl.params.size()); ++i, ++tensors)
        out.expect(bitwise_equal(ra.params[i].tensor.data(), rl.params[i].tensor.data()), ra.params[i].name);
    for (std::size_t i = 0; i < std::min(ra.buffers.size(), rl.buffers.size()); ++i, ++tensors)
        out.expect(bitwise_equal(*ra.buffers[i].values, *rl.buffers[i].values), ra.buffers[i].name);
    {
        const NoGradGuard no_grad;
        const Tensor x = random_tensor({2, 3, 32, 40}, rng, 0, 1);
        out.expect(bitwise_equal(a.model.forward(x, Mode::eval).data(), loaded.forward(x, Mode::eval).data()),
                   "forward outputs differ");
    }
    fs::remove_all(dir);
    out.detail = "10-step trajectory, " + std::to_string(tensors) + " tensors round-tripped" +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

Outcome adam_oracle() {
    Outcome out;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double w_ref = 1.0, m = 0.0, v = 0.0, worst = 0.0;
    Tensor w = Tensor::scalar(1.0, true);
    Adam adam({{"w", w}}, {.lr = lr});
    for (int t = 1; t <= 5; ++t) {
        const double g = 2.0 * w_ref;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        w_ref -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);

        const double before = w.item();
        ops::mul(w, w).backward();
        adam.step();
        out.expect(w.item() < before, "step " + std::to_string(t) + " did not decrease");
        worst = std::max(worst, std::abs(w.item() - w_ref));
    }
    out.expect(worst <= kAdamTol, "deviation " + fmt("%.2e", worst));
    out.detail = "5 steps on w^2, max deviation " + fmt("%.1e", worst) + (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {2, "gradient suite", gradient_suite},
        {3, "CBAM recomposition", cbam_recomposition},
        {4, "shape contract", shape_contract},
        {5, "dense arithmetic", dense_arithmetic},
        {6, "metric oracles", metric_oracles},
        {7, "post-processing exactness", postprocess_exactness},
        {8, "overfit smoke", overfit_smoke},
        {9, "determinism and persistence", determinism_and_persistence},
        {10, "Adam oracle", adam_oracle},
    };

    std::printf("SKIP  1 full LOL benchmark: needs full training with pretrained VGG19 weights; see README\n");
    std::fflush(stdout);
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
    return failures == 0 ? 0 : 1;
}
