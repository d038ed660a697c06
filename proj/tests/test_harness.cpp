#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "polarbench/config.hpp"
#include "polarbench/dataset.hpp"
#include "polarbench/model.hpp"
#include "polarbench/train.hpp"
#include "test_util.hpp"

using namespace polarbench;
using polarbench::testing::max_abs_diff;
using polarbench::testing::random_matrix;

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
    const fs::path p = fs::temp_directory_path() / ("polarbench_test_" + name);
    std::ofstream(p, std::ios::binary) << contents;
    return p;
}

ModelSpec small_mlp(Activation act) {
    ModelSpec s;
    s.kind = ModelKind::mlp_classifier;
    s.layer_widths = {8, 8};
    s.activation = act;
    s.input_dim = 5;
    s.num_classes = 3;
    return s;
}

ModelSpec small_lm(Activation act) {
    ModelSpec s;
    s.kind = ModelKind::char_lm;
    s.layer_widths = {8, 8};
    s.activation = act;
    s.vocab_size = 6;
    s.context_length = 3;
    s.embedding_dim = 4;
    return s;
}

Batch mlp_batch(std::mt19937_64& rng, int n) {
    Batch b;
    b.features = random_matrix(n, 5, rng);
    for (int i = 0; i < n; ++i) b.targets.push_back(i % 3);
    return b;
}

Batch lm_batch(int n) {
    Batch b;
    b.contexts.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) b.contexts(i, j) = (i * 7 + j * 3) % 6;
        b.targets.push_back((i * 5 + 1) % 6);
    }
    return b;
}

// Central differences over every entry of every parameter tensor.
void check_gradients(const ModelSpec& spec, const Parameters& p, const Batch& batch) {
    const auto lg = forward_backward(spec, p, batch);
    const double h = 1e-5;
    auto check_tensor = [&](auto member, auto index_grad) {
        Parameters q = p;
        auto& tensors = member(q);
        for (std::size_t t = 0; t < tensors.size(); ++t) {
            auto& x = tensors[t];
            for (Index i = 0; i < x.size(); ++i) {
                const double saved = x.data()[i];
                x.data()[i] = saved + h;
                const double up = evaluate_loss(spec, q, batch);
                x.data()[i] = saved - h;
                const double down = evaluate_loss(spec, q, batch);
                x.data()[i] = saved;
                const double fd = (up - down) / (2 * h);
                const double an = index_grad(t, i);
                const double scale = std::max(std::abs(fd), std::abs(an));
                CHECK(std::abs(fd - an) <= 1e-4 * scale + 1e-8);
            }
        }
    };
    check_tensor([](Parameters& q) -> std::vector<DenseMatrix>& { return q.weights; },
                 [&](std::size_t t, Index i) { return lg.grads.weights[t].data()[i]; });
    check_tensor([](Parameters& q) -> std::vector<DenseVector>& { return q.biases; },
                 [&](std::size_t t, Index i) { return lg.grads.biases[t].data()[i]; });
    if (spec.kind == ModelKind::char_lm) {
        Parameters q = p;
        for (Index i = 0; i < q.embedding.size(); ++i) {
            const double saved = q.embedding.data()[i];
            q.embedding.data()[i] = saved + h;
            const double up = evaluate_loss(spec, q, batch);
            q.embedding.data()[i] = saved - h;
            const double down = evaluate_loss(spec, q, batch);
            q.embedding.data()[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double an = lg.grads.embedding.data()[i];
            CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(fd), std::abs(an)) + 1e-8);
        }
    }
}

RunConfig quick_config(Variant v) {
    RunConfig c;
    c.model.layer_widths = {32};
    c.optimizer.variant = v;
    c.optimizer.ns_steps = 5;
    c.steps = 50;
    c.batch_size = 64;
    c.seed = 11;
    c.snapshot_every = 10;
    c.eval_size = 256;
    return c;
}

}  // namespace

TEST_CASE("synthetic_gaussian is deterministic") {
    const Dataset a = load_dataset("synthetic_gaussian");
    const Dataset b = load_dataset("synthetic_gaussian");
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.num_classes == 8);
    BatchSampler sa(a, 16, 7), sb(b, 16, 7);
    const Batch ba = sa.next(), bb = sb.next();
    CHECK(ba.features == bb.features);
    CHECK(ba.targets == bb.targets);
    BatchSampler sc(a, 16, 8);
    CHECK(sc.next().targets != ba.targets);
}

TEST_CASE("byte files become next-byte windows") {
    std::string text;
    for (int i = 0; i < 100; ++i) text.push_back(static_cast<char>('a' + i % 7));
    const fs::path p = temp_file("windows.txt", text);
    const Dataset d = load_dataset(p.string(), 16);
    CHECK(d.kind == TaskKind::char_lm);
    CHECK(d.num_examples() == 84);
    CHECK(d.vocab_size() == 7);
    const Batch b = make_batch(d, {0, 83});
    CHECK(b.contexts.rows() == 2);
    CHECK(b.contexts.cols() == 16);
    CHECK(b.targets[0] == 16 % 7);
    CHECK(b.targets[1] == 99 % 7);
    fs::remove(p);

    CHECK_THROWS_AS(load_dataset("/nonexistent/corpus.txt"), ConfigError);
    const fs::path empty = temp_file("empty.txt", "");
    CHECK_THROWS_AS(load_dataset(empty.string()), ConfigError);
    fs::remove(empty);
}

TEST_CASE("tiny_text") {
    const std::string a = generate_tiny_text(5000);
    CHECK(a.size() == 5000);
    CHECK(a == generate_tiny_text(5000));
    const Dataset d = load_dataset("tiny_text", 16);
    CHECK(d.vocab_size() <= 256);
    CHECK(d.vocab_size() > 20);
    CHECK(d.num_examples() == kTinyTextBytes - 16);
}

TEST_CASE("held-out split") {
    const Dataset d = make_synthetic_gaussian(1000, 4, 3);
    const Split s = split_dataset(d);
    CHECK(s.train_begin == 0);
    CHECK(s.train_end == 900);
    CHECK(s.eval_begin == 900);
    CHECK(s.eval_end == 1000);
    CHECK(eval_batch(d, 50).size() == 50);
    CHECK(eval_batch(d, 5000).size() == 100);
}

TEST_CASE("zero weights give the uniform-softmax loss") {
    std::mt19937_64 rng(51);
    const ModelSpec spec = small_mlp(Activation::tanh);
    Parameters p = zeros_like(init_parameters(spec, 1));
    CHECK(forward_backward(spec, p, mlp_batch(rng, 9)).loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    const ModelSpec lm = small_lm(Activation::relu);
    Parameters q = zeros_like(init_parameters(lm, 1));
    CHECK(forward_backward(lm, q, lm_batch(4)).loss == doctest::Approx(std::log(6.0)).epsilon(1e-14));
}

TEST_CASE("gradients match central differences") {
    std::mt19937_64 rng(52);
    for (Activation act : {Activation::relu, Activation::tanh}) {
        SUBCASE(std::string(to_string(act)).c_str()) {
            const ModelSpec spec = small_mlp(act);
            Parameters p = init_parameters(spec, 3);
            for (auto& b : p.biases) b.setConstant(0.05);
            check_gradients(spec, p, mlp_batch(rng, 1));
            check_gradients(spec, p, mlp_batch(rng, 6));

            const ModelSpec lm = small_lm(act);
            Parameters q = init_parameters(lm, 4);
            check_gradients(lm, q, lm_batch(1));
            check_gradients(lm, q, lm_batch(5));
        }
    }
}

TEST_CASE("duplicated examples leave the mean gradient unchanged") {
    std::mt19937_64 rng(53);
    const ModelSpec spec = small_mlp(Activation::relu);
    const Parameters p = init_parameters(spec, 5);
    const Batch one = mlp_batch(rng, 1);
    Batch two;
    two.features = DenseMatrix(2, 5);
    two.features << one.features, one.features;
    two.targets = {one.targets[0], one.targets[0]};
    const auto a = forward_backward(spec, p, one);
    const auto b = forward_backward(spec, p, two);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-15));
    for (std::size_t l = 0; l < a.grads.weights.size(); ++l) {
        CHECK(max_abs_diff(a.grads.weights[l], b.grads.weights[l]) < 1e-15);
    }
}

TEST_CASE("model spec validation") {
    ModelSpec s = small_mlp(Activation::relu);
    s.layer_widths = {};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.layer_widths = {4, 0};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(parse_activation("gelu"), ConfigError);
    CHECK_THROWS_AS(parse_model_kind("transformer"), ConfigError);
}

TEST_CASE("run config validation") {
    RunConfig c = quick_config(Variant::muon);
    c.steps = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = quick_config(Variant::muon);
    c.snapshot_every = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    try {
        parse_run_config_text(R"({"model": {"layer_widths": [8], "width": 3},
                                  "optimizer": {"variant": "muon", "eta": -1},
                                  "steps": 0})",
                              "run.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("run.json") != std::string::npos);
        CHECK(what.find("model.width") != std::string::npos);
        CHECK(what.find("steps") != std::string::npos);
        CHECK(what.find("eta") != std::string::npos);
    }

    const RunConfig parsed = parse_run_config_text(
        R"({"model": {"kind": "char_lm", "layer_widths": [16, 16]},
            "optimizer": {"variant": "muon2f", "ns_steps": 3, "schedule": "exact"},
            "steps": 20, "snapshot_every": 5, "dataset": "tiny_text", "seed": 9})");
    CHECK(parsed.optimizer.variant == Variant::muon2f);
    CHECK(parsed.optimizer.schedule.at(0) == CoefficientSchedule::exact().at(0));
    const RunConfig again = parse_run_config(to_json(parsed));
    CHECK(to_json(again) == to_json(parsed));
}

TEST_CASE("seed override from the environment") {
    ::setenv("POLARBENCH_SEED", "424242", 1);
    CHECK(seed_from_environment() == std::optional<std::uint64_t>(424242));
    ::setenv("POLARBENCH_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(seed_from_environment(), ConfigError);
    ::unsetenv("POLARBENCH_SEED");
    CHECK_FALSE(seed_from_environment().has_value());
}

TEST_CASE("training is byte-for-byte deterministic") {
    RunConfig c = quick_config(Variant::muon2);
    c.steps = 20;
    const std::string a = train(c).to_jsonl();
    const std::string b = train(c).to_jsonl();
    CHECK(a == b);
    c.seed = 12;
    CHECK(train(c).to_jsonl() != a);
}

TEST_CASE("loss decreases over 50 steps for every variant") {
    for (Variant v : {Variant::muon, Variant::muon2, Variant::muon2f}) {
        const RunLog log = train(quick_config(v));
        REQUIRE(log.steps.size() == 50);
        CHECK_FALSE(log.diverged);
        double early = 0, late = 0;
        for (int i = 0; i < 5; ++i) {
            early += log.steps[static_cast<std::size_t>(i)].loss;
            late += log.steps[static_cast<std::size_t>(45 + i)].loss;
        }
        INFO(to_string(v));
        CHECK(late < early);
        CHECK(log.final_loss < std::log(8.0));
    }
}

TEST_CASE("run log structure") {
    const RunLog log = train(quick_config(Variant::muon2f));
    // One hidden matrix layer, 5 snapshot boundaries.
    REQUIRE(log.snapshots.size() == 5);
    for (std::size_t i = 0; i < log.steps.size(); ++i) CHECK(log.steps[i].step == static_cast<long>(i + 1));
    for (const auto& s : log.snapshots) {
        CHECK(s.step % 10 == 0);
        REQUIRE(s.report.has_value());
        double sq = 0;
        for (double x : s.report->sigmas) sq += x * x;
        CHECK(std::abs(sq - 1.0) < 1e-8);
    }
    const std::string text = log.to_jsonl();
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> types;
    while (std::getline(in, line)) types.push_back(nlohmann::json::parse(line).at("type"));
    CHECK(types.front() == "header");
    CHECK(types.back() == "summary");
    CHECK(std::count(types.begin(), types.end(), "step") == 50);
    CHECK(std::count(types.begin(), types.end(), "snapshot") == 5);

    const RunSummary s = summarize_jsonl(text);
    CHECK(s.variant == "muon2f");
    CHECK(s.ns_steps == 5);
    CHECK(s.seed == 11);
    CHECK_FALSE(s.diverged);
    CHECK(s.final_loss == doctest::Approx(log.final_loss).epsilon(1e-15));
    CHECK(s.mean_dead_fraction == doctest::Approx(log.mean_dead_fraction()));
    CHECK_THROWS_AS(summarize_jsonl("{\"type\": \"step\"}\n"), ConfigError);
}

TEST_CASE("divergence yields a partial log") {
    RunConfig c = quick_config(Variant::muon);
    c.optimizer.eta = 1e200;
    c.fallback.eta = 1e200;
    const RunLog log = train(c);
    CHECK(log.diverged);
    CHECK(log.diverged_step >= 1);
    CHECK(log.steps.size() < 50);
    CHECK_FALSE(log.failure.empty());
    const RunSummary s = summarize_jsonl(log.to_jsonl());
    CHECK(s.diverged);
    CHECK(std::isnan(s.final_loss));
}

TEST_CASE("snapshot with beta1 = 0 is the spectrum of the preconditioned gradient") {
    std::mt19937_64 rng(54);
    const DenseMatrix g = random_matrix(6, 9, rng);
    OptimizerConfig cfg;
    cfg.variant = Variant::muon2;
    cfg.beta1 = 0.0;
    const auto res = optimizer_step(DenseMatrix::Zero(6, 9), g, OptimizerState::zeros(6, 9, Variant::muon2), cfg);
    const auto bounds = zone_boundaries(cfg.schedule, cfg.ns_steps);
    const auto snap = snapshot_spectrum(res.state, cfg, bounds);
    REQUIRE(snap.has_value());
    const DenseMatrix v = (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const DenseMatrix tilde = g.cwiseQuotient((v.cwiseSqrt().array() + cfg.epsilon).matrix());
    const auto ref = spectrum_report(tilde, bounds, cfg.schedule, cfg.ns_steps);
    REQUIRE(ref.sigmas.size() == snap->sigmas.size());
    for (std::size_t i = 0; i < ref.sigmas.size(); ++i) CHECK(std::abs(ref.sigmas[i] - snap->sigmas[i]) < 1e-12);

    CHECK_FALSE(snapshot_spectrum(OptimizerState::zeros(6, 9, Variant::muon2), cfg, bounds).has_value());
}
