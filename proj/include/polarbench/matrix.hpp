#pragma once

// Dense real-matrix kernels. Every matrix in the library is a row-major
// Eigen matrix; the free functions here add the shape and finiteness checks
// that the optimizer and diagnostics code rely on.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "polarbench/errors.hpp"

namespace polarbench {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;
using Index = Eigen::Index;

std::string shape_string(Index rows, Index cols);

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
    return shape_string(m.rows(), m.cols());
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b,
                        const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a) +
                             " vs " + shape_string(b));
    }
}

template <typename A, typename B>
Matrix<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a) + " by " +
                             shape_string(b));
    }
    Matrix<typename A::Scalar> out = a * b;
    return out;
}

template <typename Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
    return m.norm();
}

/// Entrywise product a ⊙ b.
template <typename A, typename B>
Matrix<typename A::Scalar> hadamard(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    require_same_shape(a, b, "hadamard");
    return a.cwiseProduct(b);
}

/// Entrywise quotient a ⊘ b. Every denominator entry must be strictly
/// positive; callers add their guard constant before calling.
template <typename A, typename B>
Matrix<typename A::Scalar> hadamard_divide(const Eigen::MatrixBase<A>& a,
                                           const Eigen::MatrixBase<B>& b) {
    using Scalar = typename A::Scalar;
    require_same_shape(a, b, "hadamard_divide");
    const Matrix<Scalar> denom = b;
    for (Index i = 0; i < denom.rows(); ++i) {
        for (Index j = 0; j < denom.cols(); ++j) {
            if (!(denom(i, j) > Scalar(0))) {
                throw NumericError("hadamard_divide: nonpositive denominator at (" +
                                   std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }
    return a.cwiseQuotient(denom);
}

template <typename Derived>
Matrix<typename Derived::Scalar> entrywise_sqrt(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    const Matrix<Scalar> m = a;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (m(i, j) < Scalar(0)) {
                throw NumericError("entrywise_sqrt: negative entry at (" + std::to_string(i) +
                                   ", " + std::to_string(j) + ")");
            }
        }
    }
    return m.cwiseSqrt();
}

template <typename Derived>
Matrix<typename Derived::Scalar> add_scalar(const Eigen::MatrixBase<Derived>& a,
                                            typename Derived::Scalar s) {
    return (a.array() + s).matrix();
}

// ---------------------------------------------------------------------------
// CSV fixtures: one matrix row per line, '.' decimal, 17 significant digits.

std::string to_csv(const DenseMatrix& m);
void write_csv(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix parse_csv(std::istream& in);
DenseMatrix read_csv(const std::filesystem::path& path);

}  // namespace polarbench
