#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/evaluate.hpp"
#include "eafpmed/plot.hpp"
#include "eafpmed/train.hpp"
#include "eafpmed/util.hpp"
#include "golden_tables.hpp"

using namespace eafpmed;
using namespace eafpmed::harness;

namespace {

std::filesystem::path temp_dir(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

eafp::EafpConfig tiny_eafp() { return eafp::EafpConfig::defaults(1, 2); }

model::BackboneConfig tiny_backbone(int classes) {
    model::BackboneConfig cfg;
    cfg.in_channels = 1;
    cfg.stem_channels = 4;
    cfg.stage_widths = {4, 8};
    cfg.blocks_per_stage = {1, 1};
    cfg.downsample = {1, 2};
    cfg.classes = classes;
    return cfg;
}

RunConfig tiny_run(const char* prompt, int epochs, std::uint32_t seed) {
    RunConfig config;
    config.synth = SynthSpec{3, 6, 32};
    config.prompt = prompt;
    config.epochs = epochs;
    config.batch_size = 8;
    config.seed = seed;
    config.eafp_config = tiny_eafp();
    config.backbone_config = tiny_backbone(3);
    return config;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EAFPMED_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("sgd step follows the momentum update") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Sgd;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.0;

    auto theta = Tensor<float>::zeros(Shape{1}, true);
    sum(theta).backward();  // gradient 1
    std::vector<Tensor<float>> params{theta};
    OptimizerState state;
    optimizer_step(params, state, cfg);
    CHECK(theta.values()[0] == doctest::Approx(-0.1f));

    theta.zero_grad();  // zero gradient leaves the parameter unchanged
    optimizer_step(params, state, cfg);
    CHECK(theta.values()[0] == doctest::Approx(-0.1f));
}

TEST_CASE("adam's first step moves by about lr regardless of gradient scale") {
    for (float g : {1.0f, 100.0f, 1e-3f}) {
        OptimizerConfig cfg;
        cfg.kind = OptimizerKind::Adam;
        cfg.learning_rate = 1e-3;
        auto theta = Tensor<float>::zeros(Shape{1}, true);
        theta.grad_mut()[0] = g;
        std::vector<Tensor<float>> params{theta};
        OptimizerState state;
        optimizer_step(params, state, cfg);
        CHECK(theta.values()[0] == doctest::Approx(-1e-3f).epsilon(0.01));
    }
}

TEST_CASE("optimizer rejects a nonpositive learning rate") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.0;
    auto theta = Tensor<float>::zeros(Shape{1}, true);
    std::vector<Tensor<float>> params{theta};
    OptimizerState state;
    CHECK_THROWS_AS(optimizer_step(params, state, cfg), ShapeError);
}

TEST_CASE("pretrain registers the prompt and records every epoch") {
    RunConfig config = tiny_run("fixture", 2, 7);
    eafp::ParamPool pool;
    const auto result = pretrain(config, pool);
    CHECK(result.records.size() == 2);
    CHECK(pool.contains(eafp::PromptKey::from_text("fixture")));
    for (const auto& r : result.records) {
        CHECK(r.train_accuracy >= 0.0);
        CHECK(r.train_accuracy <= 1.0);
        CHECK(std::isfinite(r.train_loss));
    }
    // registered params round trip bitwise
    const auto stored = pool.lookup(eafp::PromptKey::from_text("fixture")).to_arrays();
    const auto trained = result.params.to_arrays();
    REQUIRE(stored.size() == trained.size());
    for (std::size_t i = 0; i < stored.size(); ++i) {
        for (std::size_t j = 0; j < stored[i].values.size(); ++j) {
            CHECK(std::memcmp(&stored[i].values[j], &trained[i].values[j], 4) == 0);
        }
    }
}

TEST_CASE("identical pretrain configs give bitwise identical parameter sets") {
    RunConfig config = tiny_run("fixture", 2, 11);
    eafp::ParamPool pool_a, pool_b;
    const auto a = pretrain(config, pool_a);
    const auto b = pretrain(config, pool_b);
    const auto arrays_a = a.params.to_arrays();
    const auto arrays_b = b.params.to_arrays();
    REQUIRE(arrays_a.size() == arrays_b.size());
    for (std::size_t i = 0; i < arrays_a.size(); ++i) {
        REQUIRE(arrays_a[i].values.size() == arrays_b[i].values.size());
        for (std::size_t j = 0; j < arrays_a[i].values.size(); ++j) {
            CHECK(std::memcmp(&arrays_a[i].values[j], &arrays_b[i].values[j], 4) == 0);
        }
    }
}

TEST_CASE("train records epochs and the best checkpoint matches the record maximum") {
    RunConfig config = tiny_run("fixture", 3, 13);
    eafp::ParamPool pool;
    pretrain(tiny_run("fixture", 1, 13), pool);

    const auto result = train(config, &pool);
    CHECK(result.records.size() == 3);
    double best = 0.0;
    for (const auto& r : result.records) best = std::max(best, r.test_accuracy);
    CHECK(result.best_test_accuracy == best);
    CHECK(result.records[static_cast<std::size_t>(result.best_epoch - 1)].test_accuracy == best);
    CHECK_FALSE(result.best_arrays.empty());
}

TEST_CASE("eafp-off training needs no pool and no prompt") {
    RunConfig config = tiny_run("", 1, 17);
    config.mode = model::EafpMode::Off;
    const auto result = train(config, nullptr);
    CHECK(result.records.size() == 1);
}

TEST_CASE("evaluate accumulates one decision per sample") {
    RunConfig config = tiny_run("", 1, 19);
    config.mode = model::EafpMode::Off;
    auto result = train(config, nullptr);
    const auto dataset = build_dataset(config);
    const auto eval = evaluate(result.model, dataset, 8);
    CHECK(eval.cm.population() == static_cast<std::int64_t>(dataset.samples.size()));
    CHECK(eval.labels.size() == dataset.samples.size());
    // row totals equal the per-category sample counts
    for (int k = 0; k < 3; ++k) {
        std::int64_t expect = 0;
        for (const auto& s : dataset.samples) expect += s.category == k;
        CHECK(eval.cm.row_total(k) == expect);
    }
    // overall accuracy ties back to the prediction list
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < eval.labels.size(); ++i) {
        correct += eval.labels[i] == eval.predicted[i];
    }
    CHECK(*eval.report.overall.oa ==
          doctest::Approx(static_cast<double>(correct) / static_cast<double>(eval.labels.size())));
}

TEST_CASE("a perfect predictor yields a diagonal matrix and OA 100%") {
    // single-category samples + a head biased toward that category
    Rng rng(23);
    model::Classifier<float> m;
    m.backbone = model::Backbone<float>::init(tiny_backbone(2), rng);
    for (auto& v : m.backbone.head_weight.values_mut()) v = 0.0f;
    m.backbone.head_bias.values_mut()[0] = 5.0f;
    m.backbone.head_bias.values_mut()[1] = 0.0f;

    auto ds = data::synth_fixture(2, 3, 32, 29);
    data::Dataset only_first;
    only_first.categories = ds.categories;
    for (const auto& s : ds.samples) {
        if (s.category == 0) only_first.samples.push_back(s);
    }
    const auto eval = evaluate(m, only_first, 4);
    CHECK(*eval.report.overall.oa == 1.0);
    CHECK(eval.cm.count(0, 0) == eval.cm.population());
}

TEST_CASE("offline metrics path reproduces the CMRI comparison row from its matrix") {
    const auto dir = temp_dir("offline_metrics");
    const auto& block = golden::find_block("cmri", "eafp_med_st");
    const auto csv_path = dir / "cmri_st.csv";
    {
        metrics::ConfusionMatrix cm(block.categories, block.counts);
        std::ofstream out(csv_path);
        cm.to_csv(out);
    }
    const auto cm = metrics::ConfusionMatrix::from_csv_file(csv_path);
    const auto report = metrics::report(cm);
    CHECK(std::abs(*report.overall.oa * 100.0 - 97.60) < 0.01);
    CHECK(std::abs(*report.overall.fnr_macro * 100.0 - 2.40) < 0.01);
    CHECK(std::abs(*report.overall.fpr_macro * 100.0 - 0.80) < 0.01);
    CHECK(std::abs(*report.overall.tnr_macro * 100.0 - 99.20) < 0.01);
    CHECK(std::abs(*report.overall.om * 100.0 - 96.81) < 0.01);
    std::filesystem::remove_all(dir);
}

TEST_CASE("curve artifacts are written and reproducible") {
    const auto dir = temp_dir("curves");
    std::vector<EpochRecord> records{{1, 1.0, 0.4, 1.1, 0.3}, {2, 0.5, 0.8, 0.6, 0.7}};
    write_curves_csv(records, dir / "curves.csv");
    render_loss_plot(records, dir / "loss.ppm");
    render_accuracy_plot(records, dir / "accuracy.ppm");
    write_run_manifest(dir, {dir / "curves.csv", dir / "loss.ppm", dir / "accuracy.ppm"});

    const auto h1 = hash_file_hex(dir / "curves.csv");
    write_curves_csv(records, dir / "curves.csv");
    CHECK(hash_file_hex(dir / "curves.csv") == h1);

    std::ifstream manifest(dir / "manifest.json");
    nlohmann::json j;
    manifest >> j;
    CHECK(j.at("files").size() == 3);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: synth then pretrain builds a pool with the prompt key") {
    const auto dir = temp_dir("cli_pipeline");
    const auto data_dir = (dir / "data").string();
    const auto pool_path = (dir / "pool.json").string();
    REQUIRE(run_cli("synth --out " + data_dir + " --seed 3 --per-category 6 --size 32") == 0);

    std::ofstream cfg(dir / "tiny.json");
    nlohmann::json j = {{"eafp", tiny_eafp().to_json()}, {"epochs", 1}, {"batch_size", 8}};
    cfg << j.dump() << "\n";
    cfg.close();

    REQUIRE(run_cli("pretrain --data " + data_dir + " --prompt synth --pool " + pool_path +
                    " --seed 5 --input-size 32 --config " + (dir / "tiny.json").string()) == 0);
    auto pool = eafp::load_pool(pool_path);
    CHECK(pool.contains(eafp::PromptKey::from_text("synth")));
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: metrics --in emits the published statistics as JSON") {
    const auto dir = temp_dir("cli_metrics");
    const auto& block = golden::find_block("cxri", "eafp_med_st");
    const auto csv_path = dir / "table.csv";
    {
        metrics::ConfusionMatrix cm(block.categories, block.counts);
        std::ofstream out(csv_path);
        cm.to_csv(out);
    }
    const std::string cmd = std::string(EAFPMED_CLI_PATH) + " metrics --in " + csv_path.string() +
                            " > " + (dir / "out.json").string() + " 2>/dev/null";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);

    std::ifstream in(dir / "out.json");
    nlohmann::json j;
    in >> j;
    CHECK(j.at("per_class").at("Nor").at("ACC").get<double>() == doctest::Approx(0.9906));
    CHECK(j.at("per_class").at("Nor").at("CEN").get<double>() == doctest::Approx(0.0458));
    CHECK(j.at("per_class").at("COV").at("TPR").get<double>() == doctest::Approx(1.0));
    CHECK(j.at("overall").at("OA_percent").get<double>() == doctest::Approx(99.06));
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: usage errors exit with code 2") {
    CHECK(run_cli("train --mode eafp-on --out /tmp/cli_usage_test --synth --seed 1") == 2);
    CHECK(run_cli("--definitely-not-a-flag") == 2);
    CHECK(run_cli("metrics") == 2);
}

TEST_CASE("cli: malformed input data exits with code 3") {
    const auto dir = temp_dir("cli_baddata");
    std::ofstream bad(dir / "bad.csv");
    bad << "a,b\n1,2\n";  // missing a row
    bad.close();
    CHECK(run_cli("metrics --in " + (dir / "bad.csv").string()) == 3);
    CHECK(run_cli("metrics --in " + (dir / "missing.csv").string()) == 3);
    std::filesystem::remove_all(dir);
}
