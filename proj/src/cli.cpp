/*
 * SPDX-License-Identifier: Apache-2.0
 */
#include "cdan/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>

#include "cdan/checkpoint.hpp"
#include "cdan/dataset.hpp"
#include "cdan/error.hpp"
#include "cdan/metrics.hpp"
#include "cdan/postprocess.hpp"
#include "cdan/trainer.hpp"

namespace cdan {
namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
public:
    using Error::Error;
};

// "600x400" -> height 400, width 600.
ResizeTarget parse_resize(const std::string& text) {
    static const std::regex pattern(R"((\d+)[xX](\d+))");
    std::smatch m;
    if (!std::regex_match(text, m, pattern)) throw UsageError("--resize expects WxH, got '" + text + "'");
    const ResizeTarget target{std::stoul(m[2]), std::stoul(m[1])};
    if (target.height == 0 || target.width == 0) throw UsageError("--resize dims must be positive");
    return target;
}

void require_dir(const std::string& path, const char* flag) {
    if (!fs::is_directory(path)) throw UsageError(std::string(flag) + ": directory '" + path + "' does not exist");
}

void require_file(const std::string& path, const char* flag) {
    if (!fs::is_regular_file(path)) throw UsageError(std::string(flag) + ": file '" + path + "' does not exist");
}

struct TrainArgs {
    std::string data, out, split, vgg_weights, resize = "200x200";
    std::size_t epochs = 80, batch = 16, checkpoint_every = 10, max_steps = 0, vgg_depth = VggFeatures::kDefaultDepth;
    double lr = 1e-3, lambda = 0.25;
    std::uint64_t seed = 0;
};

struct EnhanceArgs {
    std::string ckpt, in, out, resize;
    double alpha_color = 1.35, alpha_contrast = 1.12;
    bool no_postprocess = false;
};

struct EvalArgs {
    std::string pred, gt, out;
};

void run_train(const TrainArgs& a, std::ostream& out) {
    require_dir(a.data, "--data");
    if (!a.vgg_weights.empty()) require_file(a.vgg_weights, "--vgg-weights");
    const auto pairs = load_paired_dataset(a.data, a.split, parse_resize(a.resize));
    out << "loaded " << pairs.size() << " training pairs\n";

    std::shared_ptr<const FeatureExtractor> extractor;
    if (a.lambda > 0.0) {
        extractor = a.vgg_weights.empty()
                        ? std::make_shared<VggFeatures>(a.vgg_depth, a.seed)
                        : std::make_shared<VggFeatures>(VggFeatures::from_file(a.vgg_weights, a.vgg_depth));
    }
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.lr = a.lr;
    cfg.lambda = a.lambda;
    cfg.seed = a.seed;
    cfg.checkpoint_every = a.checkpoint_every;
    cfg.max_steps = a.max_steps;
    cfg.out_dir = a.out;
    train(cfg, pairs, extractor, [&out](const StepRecord& r) {
        out << "epoch " << r.epoch << " step " << r.step << " mse " << r.mse << " perceptual " << r.perceptual
            << " composite " << r.composite << '\n';
    });
    out << "wrote " << (fs::path(a.out) / "final.cdan").string() << '\n';
}

void run_enhance(const EnhanceArgs& a, std::ostream& out) {
    require_file(a.ckpt, "--ckpt");
    require_dir(a.in, "--in");
    std::optional<ResizeTarget> resize;
    if (!a.resize.empty()) resize = parse_resize(a.resize);
    const auto [model, meta] = load_checkpoint(a.ckpt);
    fs::create_directories(a.out);
    const EnhanceConfig post{a.alpha_color, a.alpha_contrast};
    const auto files = list_png_files(a.in);
    if (files.empty()) throw IoError("no PNG files in '" + a.in + "'");
    const NoGradGuard no_grad;
    for (const auto& name : files) {
        Image img = read_png((fs::path(a.in) / name).string());
        if (resize) img = resize_bilinear(img, resize->height, resize->width);
        const FloatImage input = to_float(img);
        const Tensor pred = model.forward(images_to_tensor({&input, 1}), ops::Mode::eval);
        Image result = to_u8(tensor_to_images(pred).front());
        if (!a.no_postprocess) result = postprocess(result, post);
        write_png((fs::path(a.out) / name).string(), result);
        out << "enhanced " << name << '\n';
    }
}

void run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    require_dir(a.pred, "--pred");
    require_dir(a.gt, "--gt");
    const MetricReport report = evaluate_dir(a.pred, a.gt);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    std::ofstream csv(a.out, std::ios::trunc);
    if (!csv) throw IoError("cannot write '" + a.out + "'");
    csv << report_csv(report);
    out << "images " << report.images.size() << " mean PSNR " << report.mean_psnr_db << " dB, mean SSIM "
        << report.mean_ssim << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"CDAN low-light image enhancement"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a model on paired low/high images");
    train_cmd->add_option("--data", train_args.data, "Dataset root containing low/ and high/")->required();
    train_cmd->add_option("--out", train_args.out, "Output directory for checkpoints and loss.csv")->required();
    train_cmd->add_option("--split", train_args.split, "Optional split subdirectory under --data");
    train_cmd->add_option("--epochs", train_args.epochs)->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch", train_args.batch)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train_args.lr)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lambda", train_args.lambda)->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--seed", train_args.seed);
    train_cmd->add_option("--vgg-weights", train_args.vgg_weights, "Named-tensor archive with VGG19 features");
    train_cmd->add_option("--vgg-depth", train_args.vgg_depth, "Feature-column depth for the perceptual loss");
    train_cmd->add_option("--resize", train_args.resize, "Training resolution WxH");
    train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every, "Epochs between checkpoints (0: final only)");
    train_cmd->add_option("--max-steps", train_args.max_steps, "Stop after this many steps (0: no limit)");

    EnhanceArgs enhance_args;
    auto* enhance_cmd = app.add_subcommand("enhance", "Enhance a directory of PNG images");
    enhance_cmd->add_option("--ckpt", enhance_args.ckpt, "Checkpoint (.cdan)")->required();
    enhance_cmd->add_option("--in", enhance_args.in, "Input directory")->required();
    enhance_cmd->add_option("--out", enhance_args.out, "Output directory")->required();
    enhance_cmd->add_option("--alpha-color", enhance_args.alpha_color);
    enhance_cmd->add_option("--alpha-contrast", enhance_args.alpha_contrast);
    enhance_cmd->add_flag("--no-postprocess", enhance_args.no_postprocess);
    enhance_cmd->add_option("--resize", enhance_args.resize, "Resize inputs to WxH before inference");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
    eval_cmd->add_option("--pred", eval_args.pred)->required();
    eval_cmd->add_option("--gt", eval_args.gt)->required();
    eval_cmd->add_option("--out", eval_args.out, "CSV report path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    try {
        if (*train_cmd) run_train(train_args, out);
        if (*enhance_cmd) run_enhance(enhance_args, out);
        if (*eval_cmd) run_eval(eval_args, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace cdan
