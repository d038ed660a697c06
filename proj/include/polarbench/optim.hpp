#pragma once

// Muon-family update rules as pure state transitions:
//
//   muon    M' = β₁M + (1-β₁)G,                    O = NS(M')
//   muon2   V' = β₂V + (1-β₂)G⊙G,  M̃ = M' ⊘ (√V' + ε),  O = NS(M̃)
//   muon2f  r, c row/column EMAs of G⊙G,  V̂ = r cᵀ / Σr,  M̃ = M' ⊘ (√V̂ + ε)
//
// and in every case W' = W - η √(cols/rows) O.
//
// Non-matrix parameters go through adamw_fallback_step.

#include <string>
#include <string_view>
#include <variant>

#include "polarbench/matrix.hpp"
#include "polarbench/polar.hpp"

namespace polarbench {

enum class Variant { muon, muon2, muon2f };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct OptimizerConfig {
    Variant variant = Variant::muon2;
    double eta = 0.02;
    double beta1 = 0.95;
    double beta2 = 0.95;
    double epsilon = 1e-8;
    int ns_steps = 5;
    CoefficientSchedule schedule = CoefficientSchedule::keller();
    // Ablation switches; both off reproduces the plain EMA rules above.
    bool nesterov = false;
    bool bias_correction = false;

    /// Throws ConfigError on out-of-range fields. epsilon = 0 is allowed here
    /// (exact-arithmetic tests); run configs require epsilon > 0.
    void validate() const;
};

/// Row/column second-moment statistics of the factored variant.
struct FactoredMoment {
    DenseVector row;  // length rows: EMA of per-row sums of G⊙G
    DenseVector col;  // length cols: EMA of per-column sums of G⊙G
};

struct OptimizerState {
    DenseMatrix m;
    std::variant<std::monostate, DenseMatrix, FactoredMoment> second;
    long step_count = 0;

    static OptimizerState zeros(Index rows, Index cols, Variant variant);
};

struct StepResult {
    DenseMatrix w;
    OptimizerState state;
};

StepResult muon_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                     const OptimizerConfig& cfg);
StepResult muon2_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                      const OptimizerConfig& cfg);
StepResult muon2f_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                       const OptimizerConfig& cfg);
/// Dispatches on cfg.variant.
StepResult optimizer_step(const DenseMatrix& w, const DenseMatrix& g, const OptimizerState& s,
                          const OptimizerConfig& cfg);

/// M ⊘ (√V + ε).
DenseMatrix precondition(const DenseMatrix& m, const DenseMatrix& v, double epsilon);
/// V̂ = r cᵀ / Σr. Throws DegenerateInputError when Σr == 0.
DenseMatrix factored_second_moment(const FactoredMoment& f);

/// The matrix Newton-Schulz would see for this state, before Frobenius
/// normalization: M for muon, M̃ for the preconditioned variants. The
/// Nesterov lookahead needs the current gradient and is not reflected here.
DenseMatrix ns_input(const OptimizerState& s, const OptimizerConfig& cfg);

/// W - η √(cols/rows) O.
DenseMatrix apply_update(const DenseMatrix& w, const DenseMatrix& o, double eta);

// ---------------------------------------------------------------------------
// Coordinate-wise fallback (Adam with decoupled weight decay).

struct AdamConfig {
    double eta = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

struct AdamState {
    DenseVector m;
    DenseVector v;
    long step_count = 0;

    static AdamState zeros(Index n);
};

struct AdamStepResult {
    DenseVector w;
    AdamState state;
};

AdamStepResult adamw_fallback_step(const DenseVector& w, const DenseVector& g,
                                   const AdamState& s, const AdamConfig& cfg);

}  // namespace polarbench
