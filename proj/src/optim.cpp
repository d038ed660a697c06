#include "polarbench/optim.hpp"

#include <cmath>

namespace polarbench {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::muon: return "muon";
        case Variant::muon2: return "muon2";
        case Variant::muon2f: return "muon2f";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    if (name == "muon") return Variant::muon;
    if (name == "muon2") return Variant::muon2;
    if (name == "muon2f") return Variant::muon2f;
    throw ConfigError("unknown optimizer variant '" + std::string(name) +
                      "' (expected muon, muon2 or muon2f)");
}

void OptimizerConfig::validate() const {
    if (!(eta > 0) || !std::isfinite(eta)) throw ConfigError("optimizer.eta must be > 0");
    if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("optimizer.beta1 must be in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("optimizer.beta2 must be in [0, 1)");
    if (!(epsilon >= 0) || !std::isfinite(epsilon)) {
        throw ConfigError("optimizer.epsilon must be >= 0");
    }
    if (ns_steps < 1) throw ConfigError("optimizer.ns_steps must be >= 1");
    schedule.require_steps(ns_steps);
}

OptimizerState OptimizerState::zeros(Index rows, Index cols, Variant variant) {
    OptimizerState s;
    s.m = DenseMatrix::Zero(rows, cols);
    switch (variant) {
        case Variant::muon: break;
        case Variant::muon2: s.second = DenseMatrix(DenseMatrix::Zero(rows, cols)); break;
        case Variant::muon2f:
            s.second = FactoredMoment{DenseVector::Zero(rows), DenseVector::Zero(cols)};
            break;
    }
    return s;
}

namespace {

void check_inputs(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                  const OptimizerConfig& cfg, Variant expected) {
    if (cfg.variant != expected) {
        throw ConfigError(std::string(to_string(expected)) + " step called with variant " +
                          std::string(to_string(cfg.variant)));
    }
    require_same_shape(w, g, "optimizer step (weight vs gradient)");
    require_same_shape(w, s.m, "optimizer step (weight vs momentum)");
    if (!all_finite(g)) throw NumericError("optimizer step: non-finite gradient");
}

double bias_factor(double beta, long t) { return 1.0 - std::pow(beta, static_cast<double>(t)); }

// Numerator fed to the preconditioner / NS: M' (or its Nesterov lookahead),
// bias-corrected when requested.
DenseMatrix momentum_numerator(const DenseMatrix& m_new, const DenseMatrix& g,
                               const OptimizerConfig& cfg, long t) {
    DenseMatrix num = cfg.nesterov ? DenseMatrix(cfg.beta1 * m_new + (1.0 - cfg.beta1) * g)
                                   : m_new;
    if (cfg.bias_correction) num /= bias_factor(cfg.beta1, t);
    return num;
}

StepResult finish(const DenseMatrix& w, const DenseMatrix& ns_in, OptimizerState next,
                  const OptimizerConfig& cfg) {
    const DenseMatrix o = newton_schulz(ns_in, cfg.schedule, cfg.ns_steps);
    return {apply_update(w, o, cfg.eta), std::move(next)};
}

}  // namespace

DenseMatrix precondition(const DenseMatrix& m, const DenseMatrix& v, double epsilon) {
    return hadamard_divide(m, add_scalar(entrywise_sqrt(v), epsilon));
}

DenseMatrix factored_second_moment(const FactoredMoment& f) {
    const double total = f.row.sum();
    if (!(total > 0)) throw DegenerateInputError("factored second moment: sum(r) == 0");
    DenseMatrix v = f.row * f.col.transpose();
    v /= total;
    return v;
}

DenseMatrix apply_update(const DenseMatrix& w, const DenseMatrix& o, double eta) {
    require_same_shape(w, o, "apply_update");
    const double scale = std::sqrt(static_cast<double>(w.cols()) / static_cast<double>(w.rows()));
    return w - (eta * scale) * o;
}

StepResult muon_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                     const OptimizerConfig& cfg) {
    check_inputs(w, g, s, cfg, Variant::muon);
    OptimizerState next;
    next.step_count = s.step_count + 1;
    next.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    const DenseMatrix num = momentum_numerator(next.m, g, cfg, next.step_count);
    return finish(w, num, std::move(next), cfg);
}

StepResult muon2_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                      const OptimizerConfig& cfg) {
    check_inputs(w, g, s, cfg, Variant::muon2);
    const auto* v_prev = std::get_if<DenseMatrix>(&s.second);
    if (!v_prev) throw ConfigError("muon2 step: state has no full second moment");
    require_same_shape(w, *v_prev, "muon2 step (weight vs second moment)");

    OptimizerState next;
    next.step_count = s.step_count + 1;
    next.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    DenseMatrix v = cfg.beta2 * *v_prev + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    DenseMatrix v_used = cfg.bias_correction ? DenseMatrix(v / bias_factor(cfg.beta2, next.step_count))
                                             : v;
    const DenseMatrix tilde =
        precondition(momentum_numerator(next.m, g, cfg, next.step_count), v_used, cfg.epsilon);
    next.second = std::move(v);
    return finish(w, tilde, std::move(next), cfg);
}

StepResult muon2f_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                       const OptimizerConfig& cfg) {
    check_inputs(w, g, s, cfg, Variant::muon2f);
    const auto* f_prev = std::get_if<FactoredMoment>(&s.second);
    if (!f_prev) throw ConfigError("muon2f step: state has no factored second moment");
    if (f_prev->row.size() != w.rows() || f_prev->col.size() != w.cols()) {
        throw DimensionError("muon2f step: factored moment does not match " + shape_string(w));
    }

    OptimizerState next;
    next.step_count = s.step_count + 1;
    next.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    const DenseMatrix sq = g.cwiseProduct(g);
    FactoredMoment f;
    f.row = cfg.beta2 * f_prev->row + (1.0 - cfg.beta2) * sq.rowwise().sum();
    f.col = cfg.beta2 * f_prev->col + (1.0 - cfg.beta2) * sq.colwise().sum().transpose();
    DenseMatrix v_hat = factored_second_moment(f);
    if (cfg.bias_correction) v_hat /= bias_factor(cfg.beta2, next.step_count);
    const DenseMatrix tilde =
        precondition(momentum_numerator(next.m, g, cfg, next.step_count), v_hat, cfg.epsilon);
    next.second = std::move(f);
    return finish(w, tilde, std::move(next), cfg);
}

StepResult optimizer_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                          const OptimizerConfig& cfg) {
    switch (cfg.variant) {
        case Variant::muon: return muon_step(w, g, s, cfg);
        case Variant::muon2: return muon2_step(w, g, s, cfg);
        case Variant::muon2f: return muon2f_step(w, g, s, cfg);
    }
    throw ConfigError("unknown variant");
}

DenseMatrix ns_input(const OptimizerState& s, const OptimizerConfig& cfg) {
    DenseMatrix num = s.m;
    if (cfg.bias_correction && s.step_count > 0) num /= bias_factor(cfg.beta1, s.step_count);
    const double v_corr =
        (cfg.bias_correction && s.step_count > 0) ? bias_factor(cfg.beta2, s.step_count) : 1.0;
    switch (cfg.variant) {
        case Variant::muon: return num;
        case Variant::muon2: {
            const auto& v = std::get<DenseMatrix>(s.second);
            return precondition(num, DenseMatrix(v / v_corr), cfg.epsilon);
        }
        case Variant::muon2f: {
            const auto& f = std::get<FactoredMoment>(s.second);
            return precondition(num, DenseMatrix(factored_second_moment(f) / v_corr), cfg.epsilon);
        }
    }
    throw ConfigError("unknown variant");
}

AdamState AdamState::zeros(Index n) {
    return {DenseVector::Zero(n), DenseVector::Zero(n), 0};
}

AdamStepResult adamw_fallback_step(const DenseVector& w, const DenseVector& g,
                                   const AdamState& s, const AdamConfig& cfg) {
    if (w.size() != g.size() || w.size() != s.m.size() || w.size() != s.v.size()) {
        throw DimensionError("adamw_fallback_step: length mismatch");
    }
    AdamStepResult out;
    out.state.step_count = s.step_count + 1;
    out.state.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    out.state.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double t = static_cast<double>(out.state.step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    const DenseVector m_hat = out.state.m / c1;
    const DenseVector v_hat = out.state.v / c2;
    const DenseVector denom = (v_hat.array().sqrt() + cfg.epsilon).matrix();
    out.w = (1.0 - cfg.eta * cfg.weight_decay) * w - cfg.eta * m_hat.cwiseQuotient(denom);
    return out;
}

}  // namespace polarbench
