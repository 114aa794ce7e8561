// Acceptance suite: runs every release criterion and prints one pass/fail
// line per criterion. Exit code = number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eafpmed/errors.hpp"
#include "eafpmed/evaluate.hpp"
#include "eafpmed/explain.hpp"
#include "eafpmed/gradcheck.hpp"
#include "eafpmed/plot.hpp"
#include "eafpmed/train.hpp"
#include "eafpmed/util.hpp"
#include "golden_tables.hpp"

using namespace eafpmed;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// criterion 1: golden per-class tables
// ---------------------------------------------------------------------------
void golden_tables() {
    int values_checked = 0;
    for (const auto& block : golden::blocks()) {
        const metrics::ConfusionMatrix cm(block.categories, block.counts);
        for (int k = 0; k < cm.categories(); ++k) {
            const auto m = metrics::class_metrics(cm, k);
            for (const auto& [metric, printed] : block.expected) {
                const auto value = m.by_name(metric);
                require(value.has_value(), block.dataset + "/" + block.method + " " + metric +
                                               " is undefined");
                const auto& want = printed[static_cast<std::size_t>(k)];
                require(golden::matches_printed(*value, want),
                        block.dataset + "/" + block.method + " " + metric + " col " +
                            std::to_string(k) + ": computed " + format_double(*value) +
                            " vs printed " + want);
                ++values_checked;
            }
        }
    }
    require(values_checked == 17 * 11 * 3, "expected 561 golden values, checked " +
                                               std::to_string(values_checked));
}

// ---------------------------------------------------------------------------
// criterion 2: macro comparison rows
// ---------------------------------------------------------------------------
void macro_rows() {
    for (const auto& row : golden::macro_rows()) {
        const auto& block = golden::find_block(row.dataset, "eafp_med_st");
        const metrics::ConfusionMatrix cm(block.categories, block.counts);
        const auto o = metrics::overall_metrics(cm);
        const auto check = [&](const metrics::Metric& m, double want, const char* name) {
            require(m.has_value(), std::string(name) + " undefined for " + row.dataset);
            require(std::abs(*m * 100.0 - want) <= 0.01,
                    row.dataset + " " + name + ": " + format_double(*m * 100.0) + " vs " +
                        format_double(want));
        };
        check(o.oa, row.oa, "OA");
        check(o.fnr_macro, row.fnr_m, "FNR-M");
        check(o.fpr_macro, row.fpr_m, "FPR-M");
        check(o.tnr_macro, row.tnr_m, "TNR-M");
        check(o.om, row.om, "OM");
    }
}

// ---------------------------------------------------------------------------
// criterion 3: gradient suite
// ---------------------------------------------------------------------------
constexpr double kGradEps = 1e-5;
constexpr double kGradTol = 1e-4;

Tensor<double> randn(Rng& rng, const Shape& shape, bool requires_grad = true) {
    auto t = Tensor<double>::zeros(shape, requires_grad);
    for (auto& v : t.values_mut()) v = rng.normal(0.0, 1.0);
    return t;
}

void gradient_suite() {
    // every differentiable op over 100 seeded random small instances
    for (std::uint32_t seed = 0; seed < 100; ++seed) {
        Rng rng(1000 + seed);
        const int n = rng.uniform_int(1, 2), c_in = rng.uniform_int(1, 4);
        const int h = rng.uniform_int(2, 8), w = rng.uniform_int(2, 8);
        const int c_out = rng.uniform_int(1, 4);
        const int kernel = 2 * rng.uniform_int(0, 1) + 1;
        const int dilation = rng.uniform_int(1, 2);
        const ConvSpec spec{c_in, c_out, kernel, rng.uniform_int(1, 2),
                            ConvSpec::same_padding(kernel, dilation), dilation};

        auto x = randn(rng, Shape{n, c_in, h, w});
        auto wt = randn(rng, Shape{c_out, c_in, kernel, kernel});
        auto b = randn(rng, Shape{c_out});

        {
            std::vector<Tensor<double>> params{x, wt, b};
            auto fn = [&] {
                auto y = conv2d(x, wt, b, spec);
                return sum(mul(y, y));
            };
            require(finite_difference_check<double>(fn, params, kGradEps) < kGradTol,
                    "conv2d gradient seed " + std::to_string(seed));
        }
        {
            auto state = BnState<double>::init(c_in);
            auto fn = [&] {
                const auto rm = state.running_mean;
                const auto rv = state.running_var;
                auto y = batch_norm2d(x, state);
                state.running_mean = rm;
                state.running_var = rv;
                return sum(mul(y, y));
            };
            std::vector<Tensor<double>> params{x, state.gamma, state.beta};
            require(finite_difference_check<double>(fn, params, kGradEps) < kGradTol,
                    "batch_norm2d gradient seed " + std::to_string(seed));
        }
        {
            std::vector<Tensor<double>> params{x};
            auto fn = [&] {
                auto y = leaky_relu(x, 0.01);
                return sum(mul(y, y));
            };
            require(finite_difference_check<double>(fn, params, kGradEps) < kGradTol,
                    "leaky_relu gradient seed " + std::to_string(seed));
        }
        {
            auto other = randn(rng, x.shape());
            std::vector<Tensor<double>> params{x, other};
            auto fn = [&] {
                auto y = concat_channels(add(x, other), mul(x, other));
                return sum(mul(y, y));
            };
            require(finite_difference_check<double>(fn, params, kGradEps) < kGradTol,
                    "add/mul/concat gradient seed " + std::to_string(seed));
        }
        {
            std::vector<Tensor<double>> params{x};
            auto fn = [&] { return sum(global_avg_pool(mul(x, x))); };
            require(finite_difference_check<double>(fn, params, kGradEps) < kGradTol,
                    "global_avg_pool gradient seed " + std::to_string(seed));
        }
        {
            auto lw = randn(rng, Shape{3, c_in});
            auto lb = randn(rng, Shape{3});
            auto xin = randn(rng, Shape{n, c_in});
            std::vector<int> labels;
            for (int i = 0; i < n; ++i) labels.push_back(rng.uniform_int(0, 2));
            std::vector<Tensor<double>> params{xin, lw, lb};
            auto fn = [&] { return softmax_cross_entropy(linear(xin, lw, lb), labels).loss; };
            require(finite_difference_check<double>(fn, params, kGradEps) < kGradTol,
                    "linear/cross-entropy gradient seed " + std::to_string(seed));
        }
    }

    // full eafp_forward + head composite over 100 seeded instances
    eafp::EafpConfig cfg;
    cfg.in_channels = 1;
    cfg.global = eafp::ExtractorConfig::stack(eafp::FeatureScale::Global, 1, 2, 5, {1, 2});
    cfg.regional = eafp::ExtractorConfig::stack(eafp::FeatureScale::Regional, 1, 2, 5, {1});
    cfg.local = eafp::ExtractorConfig::stack(eafp::FeatureScale::Local, 4, 2, 3, {1});
    cfg.validate();
    for (std::uint32_t seed = 0; seed < 100; ++seed) {
        Rng rng(5000 + seed);
        auto params = eafp::EafpParams<double>::init(cfg, rng);
        auto image = Tensor<double>::zeros(Shape{1, 1, 8, 8});
        for (auto& v : image.values_mut()) v = rng.uniform(0.0, 1.0);
        auto head_w = randn(rng, Shape{2, 1});
        auto head_b = Tensor<double>::zeros(Shape{2}, true);
        const std::vector<int> labels{static_cast<int>(seed % 2)};

        auto all = params.parameters();
        all.push_back(head_w);
        all.push_back(head_b);
        auto fn = [&] {
            auto enhanced = eafp::eafp_forward(image, params);
            auto logits = linear(reshape(global_avg_pool(enhanced), Shape{1, 1}), head_w, head_b);
            return softmax_cross_entropy(logits, labels).loss;
        };
        require(finite_difference_check<double>(fn, all, kGradEps) < kGradTol,
                "eafp composite gradient seed " + std::to_string(seed));
    }
}

// ---------------------------------------------------------------------------
// criterion 4: structural invariants
// ---------------------------------------------------------------------------
void structural_invariants() {
    Rng rng(4242);
    auto params = eafp::EafpParams<float>::init(eafp::EafpConfig::defaults(1, 2), rng);

    // shape preservation across the full extent range
    for (int extent = 16; extent <= 128; ++extent) {
        auto image = Tensor<float>::zeros(Shape{1, 1, extent, 17 + (extent % 7)});
        for (auto& v : image.values_mut()) v = rng.uniform(0.0f, 1.0f);
        const auto out = eafp::eafp_forward(image, params);
        require(out.shape() == image.shape(),
                "shape drift at extent " + std::to_string(extent) + ": " + out.shape().str());
    }

    // zero-adaptor identity, bitwise
    auto identity_params = eafp::EafpParams<float>::init(eafp::EafpConfig::defaults(1, 4), rng);
    identity_params.zero_adaptors();
    auto image = Tensor<float>::zeros(Shape{2, 1, 32, 32});
    for (auto& v : image.values_mut()) v = rng.uniform(0.0f, 1.0f);
    const auto out = eafp::eafp_forward(image, identity_params);
    require(out.values().size() == image.values().size(), "identity size");
    for (std::size_t i = 0; i < image.values().size(); ++i) {
        require(std::memcmp(&out.values()[i], &image.values()[i], 4) == 0,
                "zero-adaptor identity broke at element " + std::to_string(i));
    }

    // prompt round trip and unknown-prompt error
    eafp::ParamPool pool;
    pool.register_params(eafp::PromptKey::from_text("chest-xray"), params);
    pool.add_alias("chest x-ray", eafp::PromptKey::from_text("chest-xray"));
    require(pool.resolve("  Chest   X-Ray ").str() == "chest-xray", "prompt normalization");
    bool threw = false;
    try {
        pool.resolve("ultrasound");
    } catch (const PromptError& e) {
        threw = std::string(e.what()).find("chest-xray") != std::string::npos;
    }
    require(threw, "unknown prompt must raise and list registered keys");

    // metric identities over 1000 random class stats
    std::mt19937 gen(777);
    std::uniform_int_distribution<int> count(0, 400);
    for (int trial = 0; trial < 1000; ++trial) {
        metrics::ClassStats s{count(gen), count(gen), count(gen), count(gen)};
        if (s.population() == 0) continue;
        const auto m = metrics::class_metrics(s, s.population(), 4);
        if (m.g && m.ooc) {
            require(std::abs(*m.g - *m.ooc) < 1e-12, "G != OOC at trial " + std::to_string(trial));
        }
        if (m.auc && m.tpr && m.tnr) {
            require(std::abs(*m.auc - (*m.tpr + *m.tnr) / 2.0) < 1e-15,
                    "AUC != (TPR+TNR)/2 at trial " + std::to_string(trial));
        }
    }
}

// ---------------------------------------------------------------------------
// criteria 5 and 6 share one trained fixture
// ---------------------------------------------------------------------------
struct TrainedFixture {
    harness::RunConfig on_config;
    eafp::ParamPool pool;
    harness::PretrainResult pretrain_result;
    harness::TrainResult on_result;
    harness::TrainResult off_result;
    data::Dataset test_split;
};

const TrainedFixture& trained_fixture() {
    static const TrainedFixture fixture = [] {
        TrainedFixture f;
        harness::RunConfig config;
        config.synth = harness::SynthSpec{3, 40, 64};
        config.prompt = "synth";
        config.epochs = 30;
        config.batch_size = 16;
        config.seed = 7;
        f.on_config = config;

        f.pretrain_result = harness::pretrain(config, f.pool);

        config.mode = model::EafpMode::On;
        config.freeze_eafp = true;
        f.on_result = harness::train(config, &f.pool);

        harness::RunConfig off = config;
        off.mode = model::EafpMode::Off;
        off.prompt.clear();
        f.off_result = harness::train(off, nullptr);

        const auto dataset = harness::build_dataset(config);
        auto [train_ds, test_ds] = data::split(dataset, config.split_ratio, config.required_seed());
        f.test_split = std::move(test_ds);
        return f;
    }();
    return fixture;
}

void desk_scale_end_to_end() {
    const auto& f = trained_fixture();
    require(f.on_result.records.size() == 30, "eafp-on run must record 30 epochs");
    require(f.off_result.records.size() == 30, "eafp-off run must record 30 epochs");

    require(f.on_result.best_test_accuracy >= 0.90,
            "eafp-on best test accuracy " + format_double(f.on_result.best_test_accuracy) +
                " below 0.90");
    const double on_final = f.on_result.records.back().test_accuracy;
    const double off_final = f.off_result.records.back().test_accuracy;
    require(on_final >= off_final, "eafp-on final " + format_double(on_final) +
                                       " < eafp-off final " + format_double(off_final));
}

void explainability_sanity() {
    const auto& f = trained_fixture();
    auto model = f.on_result.model;  // shared-handle copy; inference only
    model.set_mode(BnMode::Inference);

    int correct = 0, inside = 0;
    for (const auto& sample : f.test_split.samples) {
        std::vector<data::Sample> one{sample};
        const auto pred = model::predict(model, data::stack_images(one));
        if (pred.category[0] != sample.category) continue;
        ++correct;
        const auto cam = explain::grad_campp(model, sample.image, sample.category);
        for (float v : cam.heatmap) {
            require(std::isfinite(v) && v >= 0.0f && v <= 1.0f,
                    "heatmap value " + format_double(v) + " out of range");
        }
        if (sample.box && sample.box->contains(cam.argmax_row(), cam.argmax_col())) ++inside;
    }
    require(correct > 0, "no correctly classified test images");
    const double fraction = static_cast<double>(inside) / static_cast<double>(correct);
    require(fraction >= 0.80, "heatmap argmax inside the lesion box for " +
                                  format_double(100.0 * fraction) + "% of " +
                                  std::to_string(correct) + " correct test images (need 80%)");
}

// ---------------------------------------------------------------------------
// criterion 7: roc oracle
// ---------------------------------------------------------------------------
void roc_oracle() {
    std::mt19937 gen(31337);
    std::uniform_int_distribution<int> size(2, 50);
    std::uniform_int_distribution<int> label(0, 1);
    std::uniform_int_distribution<int> bucket(0, 7);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(gen);
        std::vector<double> scores;
        std::vector<int> labels;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            scores.push_back(bucket(gen) / 7.0);
            labels.push_back(label(gen));
            pos += labels.back();
        }
        if (pos == 0) labels[0] = 1;
        if (pos == n) labels[0] = 0;

        double wins = 0.0;
        std::int64_t pairs = 0;
        for (int i = 0; i < n; ++i) {
            if (labels[i] != 1) continue;
            for (int j = 0; j < n; ++j) {
                if (labels[j] != 0) continue;
                ++pairs;
                if (scores[i] > scores[j]) {
                    wins += 1.0;
                } else if (scores[i] == scores[j]) {
                    wins += 0.5;
                }
            }
        }
        const auto curve = metrics::roc_points(scores, labels, 1);
        require(std::abs(curve.auc - wins / static_cast<double>(pairs)) <= 1e-12,
                "AUC mismatch vs pairwise statistic at trial " + std::to_string(trial));
    }

    const std::vector<double> flat{0.3, 0.3, 0.3, 0.3, 0.3};
    const std::vector<int> labels{1, 0, 1, 0, 1};
    require(metrics::roc_points(flat, labels, 1).auc == 0.5,
            "degenerate equal-scores case must give exactly 0.5");
}

// ---------------------------------------------------------------------------
// criterion 8: CLI determinism
// ---------------------------------------------------------------------------
int run_cli(const std::string& args) {
    const std::string cmd = std::string(EAFPMED_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

void determinism() {
    const auto base = std::filesystem::temp_directory_path() / "eafp_acceptance_det";
    std::filesystem::remove_all(base);
    std::filesystem::create_directories(base);

    // a compact run config keeps the double run quick
    const auto cfg_path = base / "run.json";
    {
        eafp::EafpConfig tiny = eafp::EafpConfig::defaults(1, 2);
        model::BackboneConfig bb;
        bb.in_channels = 1;
        bb.stem_channels = 4;
        bb.stage_widths = {4, 8};
        bb.blocks_per_stage = {1, 1};
        bb.downsample = {1, 2};
        bb.classes = 3;
        nlohmann::json j = {{"synth", {{"categories", 3}, {"per_category", 8}, {"size", 32}}},
                            {"epochs", 2},
                            {"batch_size", 8},
                            {"eafp", tiny.to_json()},
                            {"backbone", bb.to_json()}};
        std::ofstream out(cfg_path);
        out << j.dump() << "\n";
    }

    for (const char* run : {"r1", "r2"}) {
        const auto dir = base / run;
        std::filesystem::create_directories(dir);
        const std::string cfg = " --config " + cfg_path.string() + " --seed 9 ";
        require(run_cli("pretrain" + cfg + "--prompt synth --pool " + (dir / "pool.json").string() +
                        " --out " + (dir / "pre").string()) == 0,
                std::string("pretrain run failed for ") + run);
        require(run_cli("train" + cfg + "--mode eafp-on --prompt synth --pool " +
                        (dir / "pool.json").string() + " --out " + (dir / "train").string()) == 0,
                std::string("train run failed for ") + run);
        require(run_cli(std::string("eval --config ") + cfg_path.string() + " --seed 9 --model " +
                        (dir / "train" / "model.json").string() + " --pool " +
                        (dir / "pool.json").string() + " --batch-size 8 --emit-roc --out " +
                        (dir / "eval").string()) == 0,
                std::string("eval run failed for ") + run);
    }

    const std::vector<std::string> artifacts{
        "pool.json",
        "synth.eafp.bin",
        "pre/curves.csv",
        "pre/loss.ppm",
        "pre/accuracy.ppm",
        "train/model.ckpt",
        "train/model.json",
        "train/curves.csv",
        "train/loss.ppm",
        "train/accuracy.ppm",
        "eval/confusion.csv",
        "eval/report.json",
        "eval/report.txt",
        "eval/roc_c0_global.csv",
        "eval/roc_c1_regional.csv",
        "eval/roc_c2_local.csv",
    };
    for (const auto& rel : artifacts) {
        const auto a = base / "r1" / rel;
        const auto b = base / "r2" / rel;
        require(std::filesystem::exists(a), rel + " missing from first run");
        require(std::filesystem::exists(b), rel + " missing from second run");
        require(hash_file_hex(a) == hash_file_hex(b), rel + " differs between identical runs");
    }
    std::filesystem::remove_all(base);
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<void()> body;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "golden-table metrics (17 metrics x 11 columns x 3 methods)", 1.0, golden_tables},
        {2, "macro metrics rows (CMRI, SK)", 1.0, macro_rows},
        {3, "gradient suite (per-op + composite, 100 seeds)", 120.0, gradient_suite},
        {4, "structural invariants", 600.0, structural_invariants},
        {5, "desk-scale end-to-end training", 600.0, desk_scale_end_to_end},
        {6, "explainability sanity", 60.0, explainability_sanity},
        {7, "roc oracle", 600.0, roc_oracle},
        {8, "determinism of identical runs", 600.0, determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string error;
        try {
            c.body();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double elapsed = seconds_since(start);
        if (error.empty() && elapsed > c.budget_seconds) {
            error = "exceeded runtime budget: " + format_fixed(elapsed, 1) + "s > " +
                    format_fixed(c.budget_seconds, 1) + "s";
        }
        if (error.empty()) {
            std::cout << "[criterion " << c.id << "] PASS " << c.title << " ("
                      << format_fixed(elapsed, 2) << "s)\n";
        } else {
            ++failures;
            std::cout << "[criterion " << c.id << "] FAIL " << c.title << " ("
                      << format_fixed(elapsed, 2) << "s): " << error << "\n";
        }
        std::cout.flush();
    }
    return failures;
}
