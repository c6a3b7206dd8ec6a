#pragma once

// Small dense matrix exponential and principal logarithm.
//
// Both functions diagonalize in complex arithmetic when the eigenvector basis
// is well conditioned and otherwise fall back to Pade-based algorithms:
// scaling-and-squaring for exp, inverse scaling-and-squaring on the complex
// Schur form for log.

#include <msflab/error.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

namespace msflab {

using cplx = std::complex<double>;

template <int N = Eigen::Dynamic>
using ComplexMatrix = Eigen::Matrix<cplx, N, N>;
template <int N = Eigen::Dynamic>
using RealMatrix = Eigen::Matrix<double, N, N>;
template <int N = Eigen::Dynamic>
using ComplexVector = Eigen::Matrix<cplx, N, 1>;
template <int N = Eigen::Dynamic>
using RealVector = Eigen::Matrix<double, N, 1>;

namespace matrix_limits {
/// Eigenvector bases with a larger 2-norm condition number are not used.
inline constexpr double kEigenvectorCondition = 1e6;
/// log() refuses matrices with sigma_min < kSingular * sigma_max.
inline constexpr double kSingular = 1e-12;
/// Eigenvalues this close (relatively) to the negative real axis are put on it.
inline constexpr double kBranchSnap = 1e-14;
}  // namespace matrix_limits

template <int N>
struct EigenPairs {
    ComplexVector<N> values;
    ComplexMatrix<N> vectors;  ///< columns are unit eigenvectors
    double vector_condition = 1.0;
    bool ill_conditioned = false;  ///< vector_condition above kEigenvectorCondition
};

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const auto v = m(i, j);
            if constexpr (std::is_same_v<typename Derived::Scalar, cplx>) {
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
            } else {
                if (!std::isfinite(v)) return false;
            }
        }
    return true;
}

template <int N>
void require_square_finite(const ComplexMatrix<N>& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw Error(ErrorCode::InvalidParameter, std::string(who) + ": matrix must be square and non-empty");
    if (!all_finite(m)) throw Error(ErrorCode::InvalidParameter, std::string(who) + ": non-finite entry");
}

template <int N>
bool is_diagonal(const ComplexMatrix<N>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (i != j && m(i, j) != cplx{}) return false;
    return true;
}

inline cplx snap_to_branch(cplx z) {
    if (z.real() < 0.0 && std::abs(z.imag()) <= matrix_limits::kBranchSnap * std::abs(z)) return {z.real(), 0.0};
    return z;
}

inline bool on_negative_axis(cplx z) { return z.real() < 0.0 && z.imag() == 0.0; }

template <int N>
double norm1(const ComplexMatrix<N>& m) {
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

template <int N>
ComplexMatrix<N> identity_like(const ComplexMatrix<N>& m) {
    return ComplexMatrix<N>::Identity(m.rows(), m.cols());
}

// Diagonal [6/6] Pade with scaling so that ||A||_inf <= 1/2.
template <int N>
ComplexMatrix<N> pade_exp(const ComplexMatrix<N>& m) {
    constexpr int q = 6;
    const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
    const ComplexMatrix<N> a = m / std::ldexp(1.0, squarings);
    const ComplexMatrix<N> eye = identity_like(m);

    ComplexMatrix<N> power = eye;
    ComplexMatrix<N> num = eye;
    ComplexMatrix<N> den = eye;
    double c = 1.0;
    for (int k = 1; k <= q; ++k) {
        c *= static_cast<double>(q - k + 1) / static_cast<double>(k * (2 * q - k + 1));
        power = (power * a).eval();
        num += c * power;
        den += ((k % 2 == 0) ? c : -c) * power;
    }
    ComplexMatrix<N> result = den.partialPivLu().solve(num);
    for (int s = 0; s < squarings; ++s) result = (result * result).eval();
    return result;
}

// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_unit(int order) {
    std::vector<double> nodes(static_cast<std::size_t>(order));
    std::vector<double> weights(static_cast<std::size_t>(order));
    for (int i = 0; i < order; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
        weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return {nodes, weights};
}

// Principal square root of an upper-triangular matrix.
template <int N>
ComplexMatrix<N> sqrt_upper_triangular(const ComplexMatrix<N>& t) {
    const Eigen::Index n = t.rows();
    ComplexMatrix<N> r = ComplexMatrix<N>::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        r(j, j) = std::sqrt(t(j, j));
        for (Eigen::Index i = j - 1; i >= 0; --i) {
            cplx acc = t(i, j);
            for (Eigen::Index k = i + 1; k < j; ++k) acc -= r(i, k) * r(k, j);
            r(i, j) = acc / (r(i, i) + r(j, j));
        }
    }
    return r;
}

// Inverse scaling-and-squaring on the Schur form, [8/8] Pade of log(I + X)
// evaluated as a Gauss-Legendre partial fraction sum.
template <int N>
ComplexMatrix<N> schur_log(const ComplexMatrix<N>& m) {
    Eigen::ComplexSchur<ComplexMatrix<N>> schur(m);
    if (schur.info() != Eigen::Success) throw Error(ErrorCode::Numerical, "mat_log: Schur decomposition failed");
    ComplexMatrix<N> t = schur.matrixT();
    const ComplexMatrix<N> u = schur.matrixU();
    for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, i) = snap_to_branch(t(i, i));
    for (Eigen::Index j = 0; j < t.cols(); ++j)
        for (Eigen::Index i = j + 1; i < t.rows(); ++i) t(i, j) = cplx{};

    const ComplexMatrix<N> eye = identity_like(m);
    int roots = 0;
    while (norm1<N>(t - eye) > 0.25) {
        t = sqrt_upper_triangular<N>(t);
        if (++roots > 64) throw Error(ErrorCode::Numerical, "mat_log: square-root iteration did not converge");
    }
    const ComplexMatrix<N> x = t - eye;
    const auto [nodes, weights] = gauss_legendre_unit(8);
    ComplexMatrix<N> log_t = ComplexMatrix<N>::Zero(m.rows(), m.cols());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const ComplexMatrix<N> denom = eye + nodes[k] * x;
        // (I + s X)^{-1} X, both upper triangular and commuting.
        log_t += weights[k] * ComplexMatrix<N>(denom.template triangularView<Eigen::Upper>().solve(x));
    }
    log_t *= std::ldexp(1.0, roots);
    return u * log_t * u.adjoint();
}

template <int N>
double vector_condition(const ComplexMatrix<N>& v) {
    Eigen::JacobiSVD<ComplexMatrix<N>> svd(v);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

}  // namespace detail

/// Eigenvalues and unit eigenvectors of a square matrix.
///
/// The condition number of the eigenvector basis is reported so that callers
/// (mat_exp, mat_log) can detect near-defective input.
template <int N>
EigenPairs<N> solve_eigen(const ComplexMatrix<N>& m) {
    detail::require_square_finite<N>(m, "solve_eigen");
    Eigen::ComplexEigenSolver<ComplexMatrix<N>> solver(m, true);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::Numerical, "solve_eigen: eigensolver failed");
    EigenPairs<N> out;
    out.values = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
    for (Eigen::Index k = 0; k < out.vectors.cols(); ++k) {
        const double n = out.vectors.col(k).norm();
        if (n > 0.0) out.vectors.col(k) /= n;
    }
    out.vector_condition = detail::vector_condition<N>(out.vectors);
    out.ill_conditioned = !(out.vector_condition <= matrix_limits::kEigenvectorCondition);
    return out;
}

template <int N>
EigenPairs<N> solve_eigen(const RealMatrix<N>& m) {
    return solve_eigen<N>(ComplexMatrix<N>(m.template cast<cplx>()));
}

/// Matrix exponential.
template <int N>
ComplexMatrix<N> mat_exp(const ComplexMatrix<N>& m) {
    detail::require_square_finite<N>(m, "mat_exp");
    if (detail::is_diagonal<N>(m)) {
        ComplexMatrix<N> out = ComplexMatrix<N>::Zero(m.rows(), m.cols());
        for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, i) = std::exp(m(i, i));
        return out;
    }
    const auto eig = solve_eigen<N>(m);
    if (eig.ill_conditioned) return detail::pade_exp<N>(m);
    const ComplexVector<N> ev = eig.values.array().exp().matrix();
    const ComplexMatrix<N> scaled = eig.vectors * ev.asDiagonal();
    // X V = V diag(e^lambda)  <=>  V^T X^T = (V diag)^T
    return eig.vectors.transpose().partialPivLu().solve(scaled.transpose()).transpose();
}

/// exp of a real matrix is real; the imaginary rounding residue is dropped.
template <int N>
RealMatrix<N> mat_exp(const RealMatrix<N>& m) {
    return mat_exp<N>(ComplexMatrix<N>(m.template cast<cplx>())).real();
}

/// Principal matrix logarithm: exp(mat_log(M)) = M with every eigenvalue of
/// the result having imaginary part in (-pi, pi]. Negative real eigenvalues
/// map to ln|lambda| + i*pi.
///
/// Throws ErrorCode::NonInvertible when sigma_min(M) < 1e-12 * sigma_max(M).
template <int N>
ComplexMatrix<N> mat_log(const ComplexMatrix<N>& m) {
    detail::require_square_finite<N>(m, "mat_log");
    {
        Eigen::JacobiSVD<ComplexMatrix<N>> svd(m);
        const auto& s = svd.singularValues();
        if (!(s(s.size() - 1) >= matrix_limits::kSingular * s(0)))
            throw Error(ErrorCode::NonInvertible, "mat_log: matrix is singular or nearly singular");
    }
    if (detail::is_diagonal<N>(m)) {
        ComplexMatrix<N> out = ComplexMatrix<N>::Zero(m.rows(), m.cols());
        for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, i) = std::log(detail::snap_to_branch(m(i, i)));
        return out;
    }
    const auto eig = solve_eigen<N>(m);
    if (eig.ill_conditioned) return detail::schur_log<N>(m);
    ComplexVector<N> lv(eig.values.size());
    for (Eigen::Index i = 0; i < lv.size(); ++i) lv(i) = std::log(detail::snap_to_branch(eig.values(i)));
    const ComplexMatrix<N> scaled = eig.vectors * lv.asDiagonal();
    return eig.vectors.transpose().partialPivLu().solve(scaled.transpose()).transpose();
}

/// Logarithm of a real matrix. When no eigenvalue lies on the negative real
/// axis the eigenvalues pair up conjugately, the principal log is real, and the
/// imaginary rounding residue is removed.
template <int N>
ComplexMatrix<N> mat_log(const RealMatrix<N>& m) {
    const ComplexMatrix<N> cm = m.template cast<cplx>();
    ComplexMatrix<N> out = mat_log<N>(cm);
    const auto eig = solve_eigen<N>(cm);
    bool negative_axis = false;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i)
        negative_axis = negative_axis || detail::on_negative_axis(detail::snap_to_branch(eig.values(i)));
    if (!negative_axis) out.imag().setZero();
    return out;
}

}  // namespace msflab
