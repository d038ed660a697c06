#pragma once

// Newton-Schulz polar approximation.
//
// One step maps X -> aX + b(XXᵀ)X + c(XXᵀ)²X, which acts on each singular
// value through the odd quintic φ(σ) = aσ + bσ³ + cσ⁵ and leaves the
// singular vectors untouched. A CoefficientSchedule supplies one (a, b, c)
// triple per step; a single-triple schedule is reused at every step.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polarbench/matrix.hpp"

namespace polarbench {

struct CoefficientTriple {
    double a = 0;
    double b = 0;
    double c = 0;

    /// φ(1) = a + b + c, the image of a unit singular value.
    double at_one() const { return a + b + c; }
    friend bool operator==(const CoefficientTriple&, const CoefficientTriple&) = default;
};

class CoefficientSchedule {
public:
    CoefficientSchedule(std::string name, std::vector<CoefficientTriple> triples);

    /// Loose-target quintic used by Muon: σ -> roughly [0.7, 1.3].
    static CoefficientSchedule keller();
    /// Exact-target quintic (2, -1.5, 0.5): fixed point at 1 with zero slope.
    static CoefficientSchedule exact();

    const std::string& name() const { return name_; }
    std::span<const CoefficientTriple> triples() const { return triples_; }
    std::size_t size() const { return triples_.size(); }
    bool cyclic() const { return triples_.size() == 1; }

    /// Triple used at zero-based step `step`.
    const CoefficientTriple& at(std::size_t step) const;
    /// Throws ConfigError if a per-step schedule has fewer than k triples.
    void require_steps(int k) const;
    std::vector<double> phi_at_one() const;

private:
    std::string name_;
    std::vector<CoefficientTriple> triples_;
};

/// Parses {"name": ..., "triples": [[a,b,c], ...]}. JSON syntax errors are
/// reported with their line number.
CoefficientSchedule parse_schedule_json(std::string_view text, const std::string& origin = "");
CoefficientSchedule load_schedule(const std::filesystem::path& path);
/// "keller" / "exact" (case-insensitive) or a path to a schedule file.
CoefficientSchedule resolve_schedule(const std::string& name_or_path);
std::string schedule_to_json(const CoefficientSchedule& s);

/// Spectrum-side normalization guard: NS divides by ‖G‖_F + kNsNormEpsilon.
inline constexpr double kNsNormEpsilon = 1e-7;

template <typename Scalar>
Scalar phi_scalar(Scalar sigma, const CoefficientTriple& t) {
    const Scalar s2 = sigma * sigma;
    return sigma * (Scalar(t.a) + s2 * (Scalar(t.b) + s2 * Scalar(t.c)));
}

/// k-fold composition of φ following the schedule order.
template <typename Scalar>
Scalar phi_iterate(Scalar sigma, const CoefficientSchedule& schedule, int k) {
    if (k < 0) throw ConfigError("phi_iterate: negative step count");
    schedule.require_steps(k);
    for (int i = 0; i < k; ++i) sigma = phi_scalar(sigma, schedule.at(static_cast<std::size_t>(i)));
    return sigma;
}

namespace detail {

// Assumes rows <= cols so the Gram matrix is the small one.
template <typename Scalar>
Matrix<Scalar> ns_step_short_side(const Matrix<Scalar>& x, const CoefficientTriple& t) {
    const Matrix<Scalar> gram = x * x.transpose();
    const Matrix<Scalar> poly = Scalar(t.b) * gram + Scalar(t.c) * (gram * gram);
    Matrix<Scalar> out = Scalar(t.a) * x + poly * x;
    return out;
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> ns_step(const Matrix<Scalar>& x, const CoefficientTriple& t) {
    if (!all_finite(x)) throw NumericError("ns_step: non-finite input");
    Matrix<Scalar> out;
    if (x.rows() > x.cols()) {
        const Matrix<Scalar> xt = x.transpose();
        out = detail::ns_step_short_side(xt, t).transpose();
    } else {
        out = detail::ns_step_short_side(x, t);
    }
    if (!all_finite(out)) {
        throw NumericError("ns_step: overflow (input not normalized?)");
    }
    return out;
}

/// k Newton-Schulz steps on g / (‖g‖_F + kNsNormEpsilon).
template <typename Scalar>
Matrix<Scalar> newton_schulz(const Matrix<Scalar>& g, const CoefficientSchedule& schedule, int k) {
    if (k < 1) throw ConfigError("newton_schulz: step count must be >= 1");
    schedule.require_steps(k);
    if (!all_finite(g)) throw NumericError("newton_schulz: non-finite input");
    const Scalar norm = g.norm();
    if (norm == Scalar(0)) throw DegenerateInputError("newton_schulz: zero input matrix");

    const bool tall = g.rows() > g.cols();
    Matrix<Scalar> x = tall ? Matrix<Scalar>(g.transpose()) : g;
    x /= norm + Scalar(kNsNormEpsilon);
    for (int i = 0; i < k; ++i) {
        x = detail::ns_step_short_side(x, schedule.at(static_cast<std::size_t>(i)));
        if (!all_finite(x)) {
            throw NumericError("newton_schulz: overflow at step " + std::to_string(i + 1));
        }
    }
    if (tall) return x.transpose();
    return x;
}

}  // namespace polarbench
