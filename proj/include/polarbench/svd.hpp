#pragma once

// One-sided (Hestenes) Jacobi SVD. Used as the exact oracle for polar
// factors and spectra; never on the optimizer hot path.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "polarbench/matrix.hpp"

namespace polarbench {

template <typename Scalar>
struct SvdResult {
    Matrix<Scalar> u;      // rows x r, orthonormal columns
    Vector<Scalar> sigma;  // r = min(rows, cols), non-increasing
    Matrix<Scalar> vt;     // r x cols, orthonormal rows
};

struct JacobiOptions {
    int max_sweeps = 100;
    double tolerance = 1e-12;  // relative off-diagonal threshold |<a_i,a_j>| / (|a_i||a_j|)
    Index max_dimension = 4096;
};

namespace detail {

// Replaces rows flagged in `replace` by unit vectors orthogonal to every
// other row. Rows are candidates from the standard basis, orthogonalized
// twice with modified Gram-Schmidt.
template <typename Scalar>
void complete_orthonormal_rows(Matrix<Scalar>& rows, const std::vector<bool>& replace) {
    const Index n = rows.cols();
    Index next_basis = 0;
    for (Index i = 0; i < rows.rows(); ++i) {
        if (!replace[static_cast<std::size_t>(i)]) continue;
        for (; next_basis < n; ++next_basis) {
            Vector<Scalar> cand = Vector<Scalar>::Unit(n, next_basis);
            for (int pass = 0; pass < 2; ++pass) {
                for (Index j = 0; j < rows.rows(); ++j) {
                    if (j == i || (replace[static_cast<std::size_t>(j)] && j > i)) continue;
                    cand -= rows.row(j).dot(cand) * rows.row(j).transpose();
                }
            }
            const Scalar len = cand.norm();
            if (len > Scalar(0.5)) {
                rows.row(i) = (cand / len).transpose();
                ++next_basis;
                break;
            }
        }
    }
}

}  // namespace detail

/// Thin SVD m = u * diag(sigma) * vt.
///
/// Singular values come out sorted non-increasing. Each column of u has its
/// first nonzero entry positive, so the factorization is deterministic for a
/// fixed input. Throws NumericError (carrying the remaining off-diagonal
/// residual) if the sweep cap is hit.
template <typename Scalar>
SvdResult<Scalar> svd(const Matrix<Scalar>& m, const JacobiOptions& opts = {}) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw DimensionError("svd: empty matrix " + shape_string(m));
    }
    if (m.rows() > opts.max_dimension || m.cols() > opts.max_dimension) {
        throw DimensionError("svd: " + shape_string(m) + " exceeds desk-scale limit");
    }
    if (!all_finite(m)) throw NumericError("svd: non-finite input");

    // Work on the tall orientation; rows of `work` are the columns being
    // orthogonalized, rows of `basis` accumulate the right rotations.
    const bool wide = m.rows() < m.cols();
    Matrix<Scalar> work = wide ? Matrix<Scalar>(m) : Matrix<Scalar>(m.transpose());
    const Index r = work.rows();
    const Index len = work.cols();
    Matrix<Scalar> basis = Matrix<Scalar>::Identity(r, r);

    const Scalar tol = static_cast<Scalar>(opts.tolerance);
    Scalar residual = 0;
    bool converged = (r == 1);
    for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
        residual = 0;
        bool rotated = false;
        for (Index i = 0; i + 1 < r; ++i) {
            for (Index j = i + 1; j < r; ++j) {
                const Scalar alpha = work.row(i).squaredNorm();
                const Scalar beta = work.row(j).squaredNorm();
                const Scalar gamma = work.row(i).dot(work.row(j));
                if (alpha == Scalar(0) || beta == Scalar(0) || gamma == Scalar(0)) continue;
                const Scalar off = std::abs(gamma) / std::sqrt(alpha * beta);
                residual = std::max(residual, off);
                if (off <= tol) continue;
                rotated = true;
                const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
                const Scalar t = (zeta >= 0 ? Scalar(1) : Scalar(-1)) /
                                 (std::abs(zeta) + std::sqrt(Scalar(1) + zeta * zeta));
                const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
                const Scalar s = c * t;
                for (Index k = 0; k < len; ++k) {
                    const Scalar wi = work(i, k);
                    const Scalar wj = work(j, k);
                    work(i, k) = c * wi - s * wj;
                    work(j, k) = s * wi + c * wj;
                }
                for (Index k = 0; k < r; ++k) {
                    const Scalar vi = basis(i, k);
                    const Scalar vj = basis(j, k);
                    basis(i, k) = c * vi - s * vj;
                    basis(j, k) = s * vi + c * vj;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "svd: Jacobi did not converge in " << opts.max_sweeps
            << " sweeps, residual " << residual;
        throw NumericError(msg.str());
    }

    Vector<Scalar> sigma(r);
    for (Index i = 0; i < r; ++i) sigma(i) = work.row(i).norm();
    std::vector<Index> order(static_cast<std::size_t>(r));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return sigma(a) > sigma(b); });

    // Left vectors live along the long side (len), right vectors along r.
    Matrix<Scalar> left(r, len);
    Matrix<Scalar> right(r, r);
    Vector<Scalar> sorted(r);
    const Scalar smax = sigma(order[0]);
    const Scalar floor = smax * Scalar(1e-13);
    std::vector<bool> replace(static_cast<std::size_t>(r), false);
    for (Index k = 0; k < r; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        sorted(k) = sigma(src);
        right.row(k) = basis.row(src);
        if (sigma(src) > floor && sigma(src) > Scalar(0)) {
            left.row(k) = work.row(src) / sigma(src);
        } else {
            left.row(k).setZero();
            replace[static_cast<std::size_t>(k)] = true;
        }
    }
    detail::complete_orthonormal_rows(left, replace);

    // Sign convention on the vectors spanning the matrix's column space.
    Matrix<Scalar>& col_side = wide ? right : left;
    for (Index k = 0; k < r; ++k) {
        for (Index e = 0; e < col_side.cols(); ++e) {
            const Scalar x = col_side(k, e);
            if (std::abs(x) > Scalar(1e-14)) {
                if (x < 0) {
                    left.row(k) *= Scalar(-1);
                    right.row(k) *= Scalar(-1);
                }
                break;
            }
        }
    }

    SvdResult<Scalar> out;
    out.sigma = sorted;
    if (wide) {
        // m = (work)^T-free form: m = right^T diag(sigma) left
        out.u = right.transpose();
        out.vt = left;
    } else {
        out.u = left.transpose();
        out.vt = right;
    }
    return out;
}

template <typename Scalar>
Vector<Scalar> singular_values(const Matrix<Scalar>& m, const JacobiOptions& opts = {}) {
    return svd(m, opts).sigma;
}

}  // namespace polarbench
