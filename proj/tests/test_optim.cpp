#include "doctest.h"

#include <cmath>
#include <random>

#include "polarbench/optim.hpp"
#include "polarbench/svd.hpp"
#include "test_util.hpp"

using namespace polarbench;
using polarbench::testing::max_abs_diff;
using polarbench::testing::random_matrix;

namespace {

OptimizerConfig config_for(Variant v, double eta = 0.02) {
    OptimizerConfig cfg;
    cfg.variant = v;
    cfg.eta = eta;
    return cfg;
}

DenseMatrix scalar_matrix(double x) {
    DenseMatrix m(1, 1);
    m(0, 0) = x;
    return m;
}

double phi_k(double x, int k) {
    const auto s = CoefficientSchedule::keller();
    for (int i = 0; i < k; ++i) {
        const auto t = s.at(static_cast<std::size_t>(i));
        x = t.a * x + t.b * x * x * x + t.c * std::pow(x, 5);
    }
    return x;
}

}  // namespace

TEST_CASE("variant names") {
    for (Variant v : {Variant::muon, Variant::muon2, Variant::muon2f}) {
        CHECK(parse_variant(to_string(v)) == v);
    }
    CHECK_THROWS_AS(parse_variant("adam"), ConfigError);
}

TEST_CASE("config validation") {
    OptimizerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OptimizerConfig{};
    cfg.eta = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OptimizerConfig{};
    cfg.epsilon = -1e-8;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OptimizerConfig{};
    cfg.ns_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OptimizerConfig{};
    cfg.schedule = CoefficientSchedule("two", {{2, -1.5, 0.5}, {2, -1.5, 0.5}});
    cfg.ns_steps = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("apply_update uses the aspect-ratio scale") {
    const DenseMatrix w = DenseMatrix::Zero(2, 8);
    const DenseMatrix o = DenseMatrix::Ones(2, 8);
    CHECK(max_abs_diff(apply_update(w, o, 0.5), DenseMatrix::Constant(2, 8, -1.0)) < 1e-15);
    const DenseMatrix tall = DenseMatrix::Ones(8, 2);
    CHECK(max_abs_diff(apply_update(DenseMatrix::Zero(8, 2), tall, 1.0),
                       DenseMatrix::Constant(8, 2, -0.5)) < 1e-15);
}

TEST_CASE("muon on a 1x1 matrix") {
    const auto cfg = config_for(Variant::muon, 1.0);
    const auto res = muon_step(scalar_matrix(0), scalar_matrix(1), OptimizerState::zeros(1, 1, Variant::muon), cfg);
    const double m = 0.05;
    const double expected = -phi_k(m / (m + kNsNormEpsilon), 5);
    CHECK(res.w(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(res.w(0, 0) + phi_k(1.0, 5)) < 1e-5);
    CHECK(res.state.m(0, 0) == doctest::Approx(0.05));
    CHECK(res.state.step_count == 1);
}

TEST_CASE("muon momentum recursion matches a hand-rolled EMA") {
    std::mt19937_64 rng(31);
    auto cfg = config_for(Variant::muon);
    DenseMatrix w = random_matrix(4, 6, rng);
    OptimizerState s = OptimizerState::zeros(4, 6, Variant::muon);
    DenseMatrix m = DenseMatrix::Zero(4, 6);
    for (int t = 0; t < 5; ++t) {
        const DenseMatrix g = random_matrix(4, 6, rng);
        m = 0.95 * m + 0.05 * g;
        const DenseMatrix expected_w = w - cfg.eta * std::sqrt(6.0 / 4.0) * newton_schulz(m, cfg.schedule, 5);
        auto res = muon_step(w, g, s, cfg);
        CHECK(max_abs_diff(res.state.m, m) < 1e-15);
        CHECK(max_abs_diff(res.w, expected_w) < 1e-14);
        w = res.w;
        s = res.state;
    }
}

TEST_CASE("zero gradient on a fresh state is degenerate") {
    for (Variant v : {Variant::muon, Variant::muon2, Variant::muon2f}) {
        CHECK_THROWS_AS(optimizer_step(DenseMatrix::Zero(3, 3), DenseMatrix::Zero(3, 3),
                                       OptimizerState::zeros(3, 3, v), config_for(v)),
                        DegenerateInputError);
    }
}

TEST_CASE("step input errors") {
    const auto cfg = config_for(Variant::muon2);
    const auto s = OptimizerState::zeros(3, 3, Variant::muon2);
    CHECK_THROWS_AS(muon2_step(DenseMatrix::Zero(3, 3), DenseMatrix::Ones(3, 2), s, cfg), DimensionError);
    DenseMatrix bad = DenseMatrix::Ones(3, 3);
    bad(1, 2) = std::nan("");
    CHECK_THROWS_AS(muon2_step(DenseMatrix::Zero(3, 3), bad, s, cfg), NumericError);
    CHECK_THROWS_AS(muon_step(DenseMatrix::Zero(3, 3), DenseMatrix::Ones(3, 3), s, cfg), ConfigError);
    CHECK_THROWS_AS(muon2_step(DenseMatrix::Zero(3, 3), DenseMatrix::Ones(3, 3),
                               OptimizerState::zeros(3, 3, Variant::muon), cfg),
                    ConfigError);
}

TEST_CASE("muon2 on a 1x1 matrix with epsilon = 0") {
    auto cfg = config_for(Variant::muon2, 1.0);
    cfg.epsilon = 0;
    for (double g : {3.0, -0.25}) {
        for (int k : {1, 3, 5}) {
            cfg.ns_steps = k;
            const auto res = muon2_step(scalar_matrix(0), scalar_matrix(g),
                                        OptimizerState::zeros(1, 1, Variant::muon2), cfg);
            // M̃ = 0.05 g / sqrt(0.05 g²) = sqrt(0.05) sign(g)
            const double tilde = std::sqrt(0.05);
            const double expected = -std::copysign(phi_k(tilde / (tilde + kNsNormEpsilon), k), g);
            CHECK(res.w(0, 0) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(std::abs(std::abs(res.w(0, 0)) - phi_k(1.0, k)) < 1e-5);
        }
    }
}

TEST_CASE("muon2 with a constant gradient feeds a rank-1 sign matrix to NS") {
    auto cfg = config_for(Variant::muon2);
    cfg.epsilon = 0;
    const DenseMatrix g = DenseMatrix::Constant(5, 3, -0.7);
    const auto res = muon2_step(DenseMatrix::Zero(5, 3), g, OptimizerState::zeros(5, 3, Variant::muon2), cfg);
    const DenseMatrix in = ns_input(res.state, cfg);
    const double scale = 0.05 / std::sqrt(0.05);
    CHECK(max_abs_diff(in, DenseMatrix::Constant(5, 3, -scale)) < 1e-15);
    const auto sig = singular_values(in);
    CHECK(sig(1) < 1e-12 * sig(0));
}

TEST_CASE("precondition") {
    std::mt19937_64 rng(32);
    const DenseMatrix m = random_matrix(4, 5, rng);
    CHECK(precondition(m, DenseMatrix::Ones(4, 5), 0.0) == m);
    const DenseMatrix v = random_matrix(4, 5, rng).cwiseAbs();
    // Monotone shrink in epsilon, entry by entry.
    DenseMatrix prev = precondition(m, v, 0.0);
    for (double eps : {1e-8, 1e-4, 1e-2, 1.0}) {
        const DenseMatrix cur = precondition(m, v, eps);
        CHECK((cur.cwiseAbs().array() <= prev.cwiseAbs().array()).all());
        prev = cur;
    }
    DenseMatrix zero_v = v;
    zero_v(2, 3) = 0;
    try {
        precondition(m, zero_v, 0.0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("(2, 3)") != std::string::npos);
    }
}

TEST_CASE("muon2 is invariant to power-of-two gradient scaling when epsilon = 0") {
    std::mt19937_64 rng(33);
    auto cfg = config_for(Variant::muon2);
    cfg.epsilon = 0;
    std::vector<DenseMatrix> grads;
    for (int t = 0; t < 4; ++t) grads.push_back(random_matrix(4, 6, rng));
    auto run = [&](double c) {
        DenseMatrix w = DenseMatrix::Zero(4, 6);
        OptimizerState s = OptimizerState::zeros(4, 6, Variant::muon2);
        for (const auto& g : grads) {
            auto res = muon2_step(w, DenseMatrix(c * g), s, cfg);
            w = res.w;
            s = res.state;
        }
        return w;
    };
    const DenseMatrix base = run(1.0);
    for (double c : {2.0, 0.25, 1024.0}) CHECK(run(c) == base);
}

TEST_CASE("muon2f factored moment") {
    FactoredMoment f{DenseVector::Zero(2), DenseVector::Zero(3)};
    CHECK_THROWS_AS(factored_second_moment(f), DegenerateInputError);
    f.row << 1, 3;
    f.col << 2, 1, 1;
    DenseMatrix expected(2, 3);
    expected << 0.5, 0.25, 0.25, 1.5, 0.75, 0.75;
    CHECK(max_abs_diff(factored_second_moment(f), expected) < 1e-15);
}

TEST_CASE("muon2f equals muon2 when G⊙G is rank one") {
    std::mt19937_64 rng(34);
    const DenseVector u = random_matrix(5, 1, rng);
    const DenseVector v = random_matrix(7, 1, rng);
    const DenseMatrix g = u * v.transpose();
    auto cfg2 = config_for(Variant::muon2);
    auto cfgf = config_for(Variant::muon2f);
    DenseMatrix w2 = random_matrix(5, 7, rng), wf = w2;
    auto s2 = OptimizerState::zeros(5, 7, Variant::muon2);
    auto sf = OptimizerState::zeros(5, 7, Variant::muon2f);
    for (int t = 0; t < 6; ++t) {
        const DenseMatrix gt = (1.0 + 0.5 * t) * g;
        auto r2 = muon2_step(w2, gt, s2, cfg2);
        auto rf = muon2f_step(wf, gt, sf, cfgf);
        const DenseMatrix v_full = std::get<DenseMatrix>(r2.state.second);
        const DenseMatrix v_hat = factored_second_moment(std::get<FactoredMoment>(rf.state.second));
        CHECK(max_abs_diff(v_full, v_hat) < 1e-12 * v_full.cwiseAbs().maxCoeff());
        CHECK(max_abs_diff(r2.w, rf.w) < 1e-12);
        w2 = r2.w;
        s2 = r2.state;
        wf = rf.w;
        sf = rf.state;
    }
}

TEST_CASE("muon2f equals muon2 on 1x1 streams") {
    std::mt19937_64 rng(35);
    std::normal_distribution<double> n01;
    DenseMatrix w2 = scalar_matrix(0.3), wf = w2;
    auto s2 = OptimizerState::zeros(1, 1, Variant::muon2);
    auto sf = OptimizerState::zeros(1, 1, Variant::muon2f);
    for (int t = 0; t < 20; ++t) {
        const DenseMatrix g = scalar_matrix(n01(rng));
        auto r2 = muon2_step(w2, g, s2, config_for(Variant::muon2));
        auto rf = muon2f_step(wf, g, sf, config_for(Variant::muon2f));
        CHECK(std::abs(r2.w(0, 0) - rf.w(0, 0)) < 1e-12);
        w2 = r2.w;
        s2 = r2.state;
        wf = rf.w;
        sf = rf.state;
    }
}

TEST_CASE("property: factored statistics conserve total second-moment mass") {
    std::mt19937_64 rng(36);
    DenseMatrix w = DenseMatrix::Zero(4, 4), w2 = w;
    auto sf = OptimizerState::zeros(4, 4, Variant::muon2f);
    auto s2 = OptimizerState::zeros(4, 4, Variant::muon2);
    for (int t = 0; t < 10; ++t) {
        const DenseMatrix g = random_matrix(4, 4, rng, 0.1 + t);
        auto rf = muon2f_step(w, g, sf, config_for(Variant::muon2f));
        auto r2 = muon2_step(w2, g, s2, config_for(Variant::muon2));
        w = rf.w;
        sf = rf.state;
        w2 = r2.w;
        s2 = r2.state;
        const auto& f = std::get<FactoredMoment>(sf.second);
        const double full = std::get<DenseMatrix>(s2.second).sum();
        CHECK(std::abs(f.row.sum() - f.col.sum()) < 1e-10 * full);
        CHECK(std::abs(factored_second_moment(f).sum() - full) < 1e-10 * full);
        CHECK((f.row.array() >= 0).all());
        CHECK((f.col.array() >= 0).all());
    }
}

TEST_CASE("bias correction and nesterov switches") {
    std::mt19937_64 rng(37);
    const DenseMatrix g = random_matrix(3, 4, rng);
    const DenseMatrix w = random_matrix(3, 4, rng);

    auto cfg = config_for(Variant::muon);
    cfg.nesterov = true;
    auto s = OptimizerState::zeros(3, 4, Variant::muon);
    s.m = random_matrix(3, 4, rng);
    const DenseMatrix m_new = 0.95 * s.m + 0.05 * g;
    const DenseMatrix look = 0.95 * m_new + 0.05 * g;
    const DenseMatrix expected = w - cfg.eta * std::sqrt(4.0 / 3.0) * newton_schulz(look, cfg.schedule, 5);
    CHECK(max_abs_diff(muon_step(w, g, s, cfg).w, expected) < 1e-14);

    // On the first step bias correction rescales M' by 1/(1-β₁) = 20, which NS
    // normalizes away up to its guard constant.
    auto plain = config_for(Variant::muon);
    auto corrected = plain;
    corrected.bias_correction = true;
    const auto fresh = OptimizerState::zeros(3, 4, Variant::muon);
    CHECK(max_abs_diff(muon_step(w, g, fresh, plain).w, muon_step(w, g, fresh, corrected).w) < 1e-7);
}

TEST_CASE("property: steps are deterministic and finite across scales") {
    std::mt19937_64 rng(38);
    for (Variant v : {Variant::muon, Variant::muon2, Variant::muon2f}) {
        for (double scale : {1e-6, 1.0, 1e6}) {
            const auto cfg = config_for(v);
            DenseMatrix w = random_matrix(6, 3, rng);
            auto s = OptimizerState::zeros(6, 3, v);
            for (int t = 0; t < 8; ++t) {
                const DenseMatrix g = random_matrix(6, 3, rng, scale);
                const auto a = optimizer_step(w, g, s, cfg);
                const auto b = optimizer_step(w, g, s, cfg);
                CHECK(a.w == b.w);
                CHECK(all_finite(a.w));
                // NS output has Frobenius norm at most about sqrt(rank) * max φ.
                CHECK((a.w - w).norm() < cfg.eta * std::sqrt(0.5) * 1.5 * std::sqrt(3.0));
                w = a.w;
                s = a.state;
            }
        }
    }
}

TEST_CASE("adamw fallback") {
    AdamConfig cfg;
    cfg.eta = 0.1;
    DenseVector w(3), g(3);
    w << 1.0, -2.0, 0.5;
    g << 0.3, -4.0, 0.0;
    const auto one = adamw_fallback_step(w, g, AdamState::zeros(3), cfg);
    // First bias-corrected step: m̂ = g, v̂ = g².
    for (Index i = 0; i < 3; ++i) {
        const double expected = w(i) - cfg.eta * g(i) / (std::abs(g(i)) + cfg.epsilon);
        CHECK(one.w(i) == doctest::Approx(expected).epsilon(1e-12));
    }
    // Second step against a hand-rolled recursion.
    DenseVector g2(3);
    g2 << -0.1, 1.0, 2.0;
    const auto two = adamw_fallback_step(one.w, g2, one.state, cfg);
    for (Index i = 0; i < 3; ++i) {
        const double m = 0.9 * (0.1 * g(i)) + 0.1 * g2(i);
        const double v = 0.999 * (0.001 * g(i) * g(i)) + 0.001 * g2(i) * g2(i);
        const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
        CHECK(two.w(i) == doctest::Approx(one.w(i) - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
    }
    cfg.weight_decay = 0.5;
    const auto decayed = adamw_fallback_step(w, DenseVector::Zero(3), AdamState::zeros(3), cfg);
    CHECK(max_abs_diff(decayed.w, DenseVector(0.95 * w)) < 1e-15);
    CHECK_THROWS_AS(adamw_fallback_step(w, DenseVector::Zero(2), AdamState::zeros(3), cfg), DimensionError);
}
