#include "polarbench/diagnostics.hpp"

#include <cmath>
#include <numeric>

#include "polarbench/svd.hpp"

namespace polarbench {

using nlohmann::json;

std::string_view to_string(OrthNorm n) {
    switch (n) {
        case OrthNorm::normalized_nuclear: return "normalized_nuclear";
        case OrthNorm::normalized_frobenius: return "normalized_frobenius";
        case OrthNorm::raw_frobenius: return "raw_frobenius";
        case OrthNorm::max_abs: return "max_abs";
    }
    return "unknown";
}

OrthNorm parse_orth_norm(std::string_view name) {
    if (name == "normalized_nuclear") return OrthNorm::normalized_nuclear;
    if (name == "normalized_frobenius") return OrthNorm::normalized_frobenius;
    if (name == "raw_frobenius") return OrthNorm::raw_frobenius;
    if (name == "max_abs") return OrthNorm::max_abs;
    throw ConfigError("unknown orthogonality norm '" + std::string(name) + "'");
}

PolarFactor polar_oracle(const DenseMatrix& g) {
    if (g.norm() == 0.0) throw DegenerateInputError("polar_oracle: zero input matrix");
    const auto dec = svd(g);
    PolarFactor out;
    out.q = dec.u * dec.vt;
    const double cut = 1e-10 * dec.sigma(0);
    out.numerical_rank = (dec.sigma.array() > cut).count();
    out.rank_deficient = out.numerical_rank < dec.sigma.size();
    return out;
}

double cosine_from_spectrum(std::span<const double> sigmas, const CoefficientSchedule& schedule,
                            int k) {
    if (sigmas.empty()) throw DegenerateInputError("cosine_from_spectrum: empty spectrum");
    double sum = 0;
    double sum_sq = 0;
    bool nonzero = false;
    for (double s : sigmas) {
        if (s != 0.0) nonzero = true;
        const double y = phi_iterate(s, schedule, k);
        sum += y;
        sum_sq += y * y;
    }
    if (!nonzero || sum_sq == 0.0) {
        throw DegenerateInputError("cosine_from_spectrum: all-zero spectrum");
    }
    const double r = static_cast<double>(sigmas.size());
    return std::clamp(sum / (std::sqrt(r) * std::sqrt(sum_sq)), -1.0, 1.0);
}

double orthogonality_error(const DenseMatrix& q, OrthNorm norm) {
    const DenseMatrix gram = q.rows() <= q.cols() ? DenseMatrix(q * q.transpose())
                                                  : DenseMatrix(q.transpose() * q);
    const Index r = gram.rows();
    const DenseMatrix resid = gram - DenseMatrix::Identity(r, r);
    switch (norm) {
        case OrthNorm::normalized_nuclear: {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(resid, Eigen::EigenvaluesOnly);
            return eig.eigenvalues().cwiseAbs().sum() / static_cast<double>(r);
        }
        case OrthNorm::normalized_frobenius:
            return resid.norm() / std::sqrt(static_cast<double>(r));
        case OrthNorm::raw_frobenius: return resid.norm();
        case OrthNorm::max_abs: return resid.cwiseAbs().maxCoeff();
    }
    return 0;
}

double orthogonality_error_from_spectrum(std::span<const double> sigmas, OrthNorm norm) {
    if (sigmas.empty()) throw DegenerateInputError("orthogonality_error: empty spectrum");
    double abs_sum = 0;
    double sq_sum = 0;
    double max_abs = 0;
    for (double s : sigmas) {
        const double d = std::abs(s * s - 1.0);
        abs_sum += d;
        sq_sum += d * d;
        max_abs = std::max(max_abs, d);
    }
    const double r = static_cast<double>(sigmas.size());
    switch (norm) {
        case OrthNorm::normalized_nuclear: return abs_sum / r;
        case OrthNorm::normalized_frobenius: return std::sqrt(sq_sum / r);
        case OrthNorm::raw_frobenius: return std::sqrt(sq_sum);
        case OrthNorm::max_abs: return max_abs;
    }
    return 0;
}

double effective_rank(std::span<const double> sigmas) {
    double total = 0;
    for (double s : sigmas) {
        if (s < 0) throw NumericError("effective_rank: negative singular value");
        total += s;
    }
    if (!(total > 0)) throw DegenerateInputError("effective_rank: zero spectrum");
    double entropy = 0;
    for (double s : sigmas) {
        if (s == 0.0) continue;
        const double p = s / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

namespace {

constexpr double kScanLow = 1e-12;
constexpr int kScanPointsPerDecade = 400;
constexpr int kMonotoneSamples = 64;

template <typename F>
double first_crossing(F&& f, double target, const char* what) {
    const int decades = static_cast<int>(std::round(-std::log10(kScanLow)));
    const int n = decades * kScanPointsPerDecade;
    double prev = 0.0;  // f(0) = 0 < target for every odd polynomial
    for (int i = 0; i <= n; ++i) {
        const double sigma = kScanLow * std::pow(10.0, static_cast<double>(i) / kScanPointsPerDecade);
        const double x = std::min(sigma, 1.0);
        if (f(x) >= target) {
            double lo = prev;
            double hi = x;
            double last = f(lo);
            for (int j = 1; j <= kMonotoneSamples; ++j) {
                const double y = f(lo + (hi - lo) * j / kMonotoneSamples);
                if (y < last) {
                    throw AnalysisError(std::string(what) +
                                        ": polynomial map is not monotone on the crossing bracket [" +
                                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
                }
                last = y;
            }
            for (int it = 0; it < 400; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                (f(mid) >= target ? hi : lo) = mid;
            }
            return hi;
        }
        prev = x;
    }
    throw AnalysisError(std::string(what) + ": target never reached on (0, 1]");
}

}  // namespace

ZoneBoundaries zone_boundaries(const CoefficientSchedule& schedule, int k, double eps_target) {
    if (!(eps_target > 0 && eps_target < 1)) {
        throw ConfigError("zone_boundaries: eps_target must be in (0, 1)");
    }
    if (k < 1) throw ConfigError("zone_boundaries: k must be >= 1");
    schedule.require_steps(k);
    for (int i = 0; i < k; ++i) {
        if (!(schedule.at(static_cast<std::size_t>(i)).a > 0)) {
            throw AnalysisError("zone_boundaries: step " + std::to_string(i + 1) +
                                " has a <= 0, so φ is not increasing near 0");
        }
    }
    const double target = 1.0 - eps_target;
    ZoneBoundaries b;
    b.schedule = schedule.name();
    b.k = k;
    b.eps_target = eps_target;
    b.dead_hi = first_crossing([&](double s) { return phi_iterate(s, schedule, k); }, target,
                               "dead-zone boundary");
    b.conv_lo = first_crossing([&](double s) { return phi_scalar(s, schedule.at(0)); }, target,
                               "convergent-zone boundary");
    if (b.dead_hi > b.conv_lo) {
        throw AnalysisError("zone_boundaries: dead-zone boundary exceeds convergent boundary");
    }
    return b;
}

ZoneFractions zone_fractions(std::span<const double> sigmas, const ZoneBoundaries& b) {
    if (sigmas.empty()) return {};
    std::size_t dead = 0;
    std::size_t conv = 0;
    for (double s : sigmas) {
        if (s >= b.conv_lo) {
            ++conv;
        } else if (s < b.dead_hi) {
            ++dead;
        }
    }
    const double n = static_cast<double>(sigmas.size());
    const std::size_t trans = sigmas.size() - dead - conv;
    return {static_cast<double>(dead) / n, static_cast<double>(trans) / n,
            static_cast<double>(conv) / n};
}

SpectrumReport spectrum_report(const DenseMatrix& ns_in, const ZoneBoundaries& bounds,
                               const CoefficientSchedule& schedule, int k) {
    const double norm = ns_in.norm();
    if (!(norm > 0)) throw DegenerateInputError("spectrum_report: zero input matrix");
    const DenseMatrix normalized = ns_in / norm;
    const DenseVector sv = singular_values(normalized);
    SpectrumReport r;
    r.sigmas.assign(sv.data(), sv.data() + sv.size());
    r.effective_rank = effective_rank(r.sigmas);
    r.zones = zone_fractions(r.sigmas, bounds);
    r.cosine_to_polar = cosine_from_spectrum(r.sigmas, schedule, k);
    return r;
}

std::vector<double> uniform_grid(int n) {
    if (n < 1) throw ConfigError("uniform_grid: n must be >= 1");
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = (i + 0.5) / n;
    return g;
}

json to_json(const ZoneBoundaries& b) {
    return json{{"schedule", b.schedule},
                {"k", b.k},
                {"eps_target", b.eps_target},
                {"dead_hi", b.dead_hi},
                {"conv_lo", b.conv_lo}};
}

json to_json(const ZoneFractions& z) {
    return json{{"dead", z.dead}, {"transition", z.transition}, {"convergent", z.convergent}};
}

json to_json(const SpectrumReport& r) {
    return json{{"sigmas", r.sigmas},
                {"effective_rank", r.effective_rank},
                {"zone_fractions", to_json(r.zones)},
                {"cosine_to_polar", r.cosine_to_polar}};
}

}  // namespace polarbench
