// eafpmed: prompt-adaptive multi-scale feature preprocessing toolkit.
//
// Subcommands: pretrain, train, eval, explain, metrics, synth.
// Exit codes: 0 success, 2 usage error, 3 data/format error, 4 divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/evaluate.hpp"
#include "eafpmed/explain.hpp"
#include "eafpmed/plot.hpp"
#include "eafpmed/pool.hpp"
#include "eafpmed/synth.hpp"
#include "eafpmed/train.hpp"
#include "eafpmed/util.hpp"

namespace {

using namespace eafpmed;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct CommonFlags {
    std::string data;
    bool use_synth = false;
    std::string prompt;
    std::string pool;
    std::string config;
    std::optional<std::uint32_t> seed;
    std::string out;
    std::optional<int> epochs;
    std::optional<bool> freeze_eafp;
    std::optional<int> batch_size;
    std::string mode;
    std::optional<int> input_size;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--data", flags.data, "Folder-per-category dataset root");
    cmd->add_flag("--synth", flags.use_synth, "Use the built-in synthetic fixture dataset");
    cmd->add_option("--prompt", flags.prompt, "Prompt key selecting the parameter set");
    cmd->add_option("--pool", flags.pool, "Parameter pool index JSON");
    cmd->add_option("--config", flags.config, "Run config JSON (flags win over file values)");
    cmd->add_option("--seed", flags.seed, "Run seed (mandatory for training)");
    cmd->add_option("--out", flags.out, "Output directory");
    cmd->add_option("--epochs", flags.epochs, "Training epochs");
    cmd->add_option("--freeze-eafp", flags.freeze_eafp, "Keep EAFP parameters fixed (default true)");
    cmd->add_option("--batch-size", flags.batch_size, "Mini-batch size");
    cmd->add_option("--mode", flags.mode, "eafp-on or eafp-off");
    cmd->add_option("--input-size", flags.input_size, "Working resolution for folder datasets");
}

harness::RunConfig make_run_config(const CommonFlags& flags) {
    harness::RunConfig config;
    if (!flags.config.empty()) config = harness::RunConfig::from_json_file(flags.config);
    if (!flags.data.empty()) {
        config.data_root = flags.data;
        config.synth.reset();
    } else if (flags.use_synth && !config.synth) {
        config.synth = harness::SynthSpec{};
        config.data_root.reset();
    }
    if (!flags.prompt.empty()) config.prompt = flags.prompt;
    if (!flags.pool.empty()) config.pool_path = flags.pool;
    if (flags.seed) config.seed = *flags.seed;
    if (!flags.out.empty()) config.out_dir = flags.out;
    if (flags.epochs) config.epochs = *flags.epochs;
    if (flags.freeze_eafp) config.freeze_eafp = *flags.freeze_eafp;
    if (flags.batch_size) config.batch_size = *flags.batch_size;
    if (flags.input_size) config.input_size = *flags.input_size;
    if (!flags.mode.empty()) {
        if (flags.mode == "eafp-on") {
            config.mode = model::EafpMode::On;
        } else if (flags.mode == "eafp-off") {
            config.mode = model::EafpMode::Off;
        } else {
            throw PromptError("--mode must be eafp-on or eafp-off, got '" + flags.mode + "'");
        }
    }
    return config;
}

std::string best_accuracy_text(const std::vector<harness::EpochRecord>& records) {
    double best = 0.0;
    for (const auto& r : records) best = std::max(best, r.test_accuracy);
    return format_fixed(best, 4);
}

std::vector<std::filesystem::path> write_curve_artifacts(
    const std::vector<harness::EpochRecord>& records, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> files;
    files.push_back(out_dir / "curves.csv");
    harness::write_curves_csv(records, files.back());
    files.push_back(out_dir / "loss.ppm");
    harness::render_loss_plot(records, files.back());
    files.push_back(out_dir / "accuracy.ppm");
    harness::render_accuracy_plot(records, files.back());
    return files;
}

int run_pretrain(const CommonFlags& flags) {
    harness::RunConfig config = make_run_config(flags);
    if (config.prompt.empty()) throw PromptError("pretrain: --prompt is required");
    if (config.pool_path.empty()) throw PromptError("pretrain: --pool is required");

    eafp::ParamPool pool;
    if (std::filesystem::exists(config.pool_path)) pool = eafp::load_pool(config.pool_path);
    const auto result = harness::pretrain(config, pool);
    eafp::save_pool(pool, config.pool_path);

    std::cout << "pretrained '" << config.prompt << "': best test accuracy "
              << best_accuracy_text(result.records) << "\n";
    if (!config.out_dir.empty()) {
        auto files = write_curve_artifacts(result.records, config.out_dir);
        harness::write_run_manifest(config.out_dir, files);
    }
    return kExitOk;
}

int run_train(const CommonFlags& flags) {
    harness::RunConfig config = make_run_config(flags);
    if (config.out_dir.empty()) throw PromptError("train: --out is required");
    if (config.mode == model::EafpMode::On && config.prompt.empty()) {
        throw PromptError("train: --prompt is required in eafp-on mode");
    }

    std::optional<eafp::ParamPool> pool;
    if (config.mode == model::EafpMode::On) {
        if (config.pool_path.empty()) throw PromptError("train: --pool is required in eafp-on mode");
        pool = eafp::load_pool(config.pool_path);
    }
    const auto result = harness::train(config, pool ? &*pool : nullptr);

    auto files = write_curve_artifacts(result.records, config.out_dir);
    harness::save_model(result.model, result.best_arrays, config.out_dir, "model");
    files.push_back(std::filesystem::path(config.out_dir) / "model.ckpt");
    files.push_back(std::filesystem::path(config.out_dir) / "model.json");
    {
        const auto path = std::filesystem::path(config.out_dir) / "run_config.json";
        std::ofstream echo(path, std::ios::trunc);
        echo << config.to_json().dump(2) << "\n";
        files.push_back(path);
    }
    harness::write_run_manifest(config.out_dir, files);
    std::cout << "trained: best test accuracy " << best_accuracy_text(result.records)
              << " at epoch " << result.best_epoch << "\n";
    return kExitOk;
}

int run_eval(const CommonFlags& flags, const std::string& model_path, bool emit_roc) {
    harness::RunConfig config = make_run_config(flags);
    if (model_path.empty()) throw PromptError("eval: --model is required");
    if (config.out_dir.empty()) throw PromptError("eval: --out is required");

    std::optional<eafp::ParamPool> pool;
    if (!config.pool_path.empty()) pool = eafp::load_pool(config.pool_path);
    auto classifier = harness::load_model(model_path, pool ? &*pool : nullptr);

    const data::Dataset dataset = harness::build_dataset(config);
    const auto result = harness::evaluate(classifier, dataset, config.batch_size);

    std::filesystem::create_directories(config.out_dir);
    std::vector<std::filesystem::path> files;
    {
        const auto path = std::filesystem::path(config.out_dir) / "confusion.csv";
        std::ofstream out(path, std::ios::trunc);
        result.cm.to_csv(out);
        files.push_back(path);
    }
    {
        const auto path = std::filesystem::path(config.out_dir) / "report.json";
        std::ofstream out(path, std::ios::trunc);
        out << result.report.to_json().dump(2) << "\n";
        files.push_back(path);
    }
    {
        const auto path = std::filesystem::path(config.out_dir) / "report.txt";
        std::ofstream out(path, std::ios::trunc);
        out << result.report.render_text();
        files.push_back(path);
    }
    if (emit_roc) {
        for (auto& p : harness::write_roc_csvs(result, dataset.categories, config.out_dir)) {
            files.push_back(p);
        }
    }
    harness::write_run_manifest(config.out_dir, files);
    std::cout << result.report.render_text();
    return kExitOk;
}

int run_explain(const CommonFlags& flags, const std::string& model_path,
                const std::string& image_path, const std::string& method, int category) {
    harness::RunConfig config = make_run_config(flags);
    if (model_path.empty()) throw PromptError("explain: --model is required");
    if (image_path.empty()) throw PromptError("explain: --image is required");
    if (config.out_dir.empty()) throw PromptError("explain: --out is required");
    if (method != "gradcam++" && method != "gb" && method != "camgb") {
        throw PromptError("explain: --method must be gradcam++, gb or camgb, got '" + method + "'");
    }

    std::optional<eafp::ParamPool> pool;
    if (!config.pool_path.empty()) pool = eafp::load_pool(config.pool_path);
    auto classifier = harness::load_model(model_path, pool ? &*pool : nullptr);

    Tensor<float> image = data::decode_image(image_path);
    image = data::resize_bilinear(image, config.input_size, config.input_size);

    if (category < 0) {
        data::Sample s;
        s.image = image;
        std::vector<data::Sample> one{s};
        category = model::predict(classifier, data::stack_images(one)).category[0];
    }

    std::filesystem::create_directories(config.out_dir);
    std::vector<std::filesystem::path> files;
    const auto out = std::filesystem::path(config.out_dir);
    if (method == "gradcam++") {
        const auto cam = explain::grad_campp(classifier, image, category);
        files.push_back(out / "gradcampp.ppm");
        explain::render_heatmap(cam.heatmap, cam.height, cam.width, files.back(), &image);
    } else if (method == "gb") {
        const auto gb = explain::guided_backprop(classifier, image, category);
        files.push_back(out / "gb.pgm");
        explain::render_signed_gray(gb, files.back());
    } else {
        const auto cam = explain::grad_campp(classifier, image, category);
        const auto gb = explain::guided_backprop(classifier, image, category);
        const auto merged = explain::cam_gb(cam, gb);
        files.push_back(out / "camgb.ppm");
        explain::render_heatmap(merged.heatmap, merged.height, merged.width, files.back(), &image);
    }
    harness::write_run_manifest(config.out_dir, files);
    std::cout << "explained category " << category << " via " << method << "\n";
    return kExitOk;
}

int run_metrics(const std::string& in_path, const std::string& out_dir) {
    if (in_path.empty()) throw PromptError("metrics: --in is required");
    const auto cm = metrics::ConfusionMatrix::from_csv_file(in_path);
    const auto report = metrics::report(cm);
    std::cout << report.to_json().dump(2) << "\n";
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const auto path = std::filesystem::path(out_dir) / "report.json";
        std::ofstream out(path, std::ios::trunc);
        out << report.to_json().dump(2) << "\n";
        harness::write_run_manifest(out_dir, {path});
    }
    return kExitOk;
}

int run_synth(const CommonFlags& flags, int categories, int per_category, int size) {
    harness::RunConfig config = make_run_config(flags);
    if (config.out_dir.empty()) throw PromptError("synth: --out is required");
    const auto dataset =
        data::synth_fixture(categories, per_category, size, config.required_seed());
    data::write_synth_dataset(dataset, config.out_dir);
    std::cout << "wrote " << dataset.samples.size() << " samples across "
              << dataset.categories.size() << " categories to " << config.out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EAFP-Med prompt-adaptive feature preprocessing toolkit"};
    app.require_subcommand(1);

    CommonFlags pretrain_flags, train_flags, eval_flags, explain_flags, synth_flags;
    std::string eval_model, explain_model, explain_image, metrics_in, metrics_out;
    std::string explain_method = "gradcam++";
    int explain_category = -1;
    bool emit_roc = false;
    int synth_categories = 3, synth_per_category = 40, synth_size = 64;

    auto* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain EAFP and register it in the pool");
    add_common_flags(pretrain_cmd, pretrain_flags);

    auto* train_cmd = app.add_subcommand("train", "Train the composed classifier");
    add_common_flags(train_cmd, train_flags);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model");
    add_common_flags(eval_cmd, eval_flags);
    eval_cmd->add_option("--model", eval_model, "model.json written by train");
    eval_cmd->add_flag("--emit-roc", emit_roc, "Write one-vs-rest ROC CSVs");

    auto* explain_cmd = app.add_subcommand("explain", "Render saliency for one image");
    add_common_flags(explain_cmd, explain_flags);
    explain_cmd->add_option("--model", explain_model, "model.json written by train");
    explain_cmd->add_option("--image", explain_image, "PGM/PPM input image");
    explain_cmd->add_option("--method", explain_method, "gradcam++|gb|camgb");
    explain_cmd->add_option("--category", explain_category,
                            "Target category (default: model prediction)");

    auto* metrics_cmd = app.add_subcommand("metrics", "Offline confusion-matrix report");
    metrics_cmd->add_option("--in", metrics_in, "Confusion matrix CSV");
    metrics_cmd->add_option("--out", metrics_out, "Optional output directory");

    auto* synth_cmd = app.add_subcommand("synth", "Emit a synthetic fixture dataset");
    add_common_flags(synth_cmd, synth_flags);
    synth_cmd->add_option("--categories", synth_categories, "Category count (2 or 3)");
    synth_cmd->add_option("--per-category", synth_per_category, "Samples per category");
    synth_cmd->add_option("--size", synth_size, "Image extent in pixels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (pretrain_cmd->parsed()) return run_pretrain(pretrain_flags);
        if (train_cmd->parsed()) return run_train(train_flags);
        if (eval_cmd->parsed()) return run_eval(eval_flags, eval_model, emit_roc);
        if (explain_cmd->parsed()) {
            return run_explain(explain_flags, explain_model, explain_image, explain_method,
                               explain_category);
        }
        if (metrics_cmd->parsed()) return run_metrics(metrics_in, metrics_out);
        if (synth_cmd->parsed()) {
            return run_synth(synth_flags, synth_categories, synth_per_category, synth_size);
        }
        std::cerr << "no subcommand\n";
        return kExitUsage;
    } catch (const PromptError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
