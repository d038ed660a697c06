#pragma once

// Spectral quality metrics for polar approximations.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "polarbench/matrix.hpp"
#include "polarbench/polar.hpp"

namespace polarbench {

/// Norm applied to QᵀQ - I (Gram taken on the smaller side, r = min dim).
///
/// normalized_nuclear is the default: ‖·‖_* / r, i.e. the mean of |σᵢ² - 1|.
/// It gives |c² - 1| for any c·Q★ and reproduces the published uniform-grid
/// figures (0.03 exact target, 0.31 loose target). The others are kept for
/// comparison.
enum class OrthNorm { normalized_nuclear, normalized_frobenius, raw_frobenius, max_abs };

std::string_view to_string(OrthNorm n);
OrthNorm parse_orth_norm(std::string_view name);

struct PolarFactor {
    DenseMatrix q;               // U Vᵀ
    Index numerical_rank = 0;    // count of σ > 1e-10 σ_max
    bool rank_deficient = false; // null-space directions of q are arbitrary
};

/// Exact polar factor from the Jacobi SVD.
PolarFactor polar_oracle(const DenseMatrix& g);

/// ⟨q, q★⟩_F / (‖q‖_F ‖q★‖_F), clamped to [-1, 1].
template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& q, const Eigen::MatrixBase<B>& q_star) {
    require_same_shape(q, q_star, "cosine_similarity");
    const double nq = q.norm();
    const double ns = q_star.norm();
    if (nq == 0.0 || ns == 0.0) throw DegenerateInputError("cosine_similarity: zero operand");
    const double inner = q.cwiseProduct(q_star).sum();
    return std::clamp(inner / (nq * ns), -1.0, 1.0);
}

/// Cosine between U diag(φᵏ(σ)) Vᵀ and U Vᵀ computed from the spectrum alone.
double cosine_from_spectrum(std::span<const double> sigmas, const CoefficientSchedule& schedule,
                            int k);

double orthogonality_error(const DenseMatrix& q, OrthNorm norm = OrthNorm::normalized_nuclear);
/// Same metric for a matrix whose singular values are `sigmas`.
double orthogonality_error_from_spectrum(std::span<const double> sigmas,
                                         OrthNorm norm = OrthNorm::normalized_nuclear);

/// Shannon effective rank exp(-Σ pᵢ ln pᵢ), pᵢ = σᵢ / Σσ.
double effective_rank(std::span<const double> sigmas);

inline constexpr double kDefaultEpsTarget = 0.3;

struct ZoneBoundaries {
    double dead_hi = 0;   // smallest σ with φᵏ(σ) >= 1 - eps
    double conv_lo = 0;   // smallest σ with φ¹(σ) >= 1 - eps
    std::string schedule;
    int k = 0;
    double eps_target = kDefaultEpsTarget;
};

/// Both boundaries are located as the first crossing of the target on a log
/// grid over (0, 1], checked for monotonicity on the bracket, then bisected
/// to floating-point resolution. Throws AnalysisError when φ is not
/// increasing near the origin, when the target is never reached, or when the
/// crossing bracket is not monotone.
ZoneBoundaries zone_boundaries(const CoefficientSchedule& schedule, int k,
                               double eps_target = kDefaultEpsTarget);

struct ZoneFractions {
    double dead = 0;
    double transition = 0;
    double convergent = 0;
};

/// Counted membership; a σ equal to a boundary goes to the higher zone.
ZoneFractions zone_fractions(std::span<const double> sigmas, const ZoneBoundaries& b);

struct SpectrumReport {
    std::vector<double> sigmas;  // of the Frobenius-normalized input, non-increasing
    double effective_rank = 0;
    ZoneFractions zones;
    double cosine_to_polar = 0;
};

/// Spectrum statistics of an NS input matrix. Throws DegenerateInputError on
/// a zero matrix.
SpectrumReport spectrum_report(const DenseMatrix& ns_in, const ZoneBoundaries& bounds,
                               const CoefficientSchedule& schedule, int k);

/// n midpoints of equal cells of (0, 1].
std::vector<double> uniform_grid(int n);

nlohmann::json to_json(const ZoneBoundaries& b);
nlohmann::json to_json(const ZoneFractions& z);
nlohmann::json to_json(const SpectrumReport& r);

}  // namespace polarbench
