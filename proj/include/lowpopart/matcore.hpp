#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "lowpopart/errors.hpp"

namespace lowpopart::mat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Column-stacking vectorization: component (j)*d1 + i of the result is M(i, j).
inline Vector vec(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

/// Inverse of vec. Throws dimension_error on a length mismatch.
inline Matrix reshape(const Vector& v, Index d1, Index d2) {
    if (v.size() != d1 * d2)
        throw dimension_error("reshape: vector length " + std::to_string(v.size()) +
                              " != " + std::to_string(d1) + "*" + std::to_string(d2));
    return Eigen::Map<const Matrix>(v.data(), d1, d2);
}

/// Symmetric dilation [[0, A], [A^T, 0]] of a d1 x d2 matrix.
inline Matrix dilation(const Matrix& a) {
    const Index d1 = a.rows(), d2 = a.cols();
    Matrix h = Matrix::Zero(d1 + d2, d1 + d2);
    h.topRightCorner(d1, d2) = a;
    h.bottomLeftCorner(d2, d1) = a.transpose();
    return h;
}

/// Top-right d1 x d2 block of a (d1+d2)-dimensional symmetric matrix.
inline Matrix ht_extract(const Matrix& m, Index d1, Index d2) {
    if (m.rows() != d1 + d2 || m.cols() != d1 + d2)
        throw dimension_error("ht_extract: matrix dim " + std::to_string(m.rows()) +
                              " != d1+d2 = " + std::to_string(d1 + d2));
    return m.topRightCorner(d1, d2);
}

/// Scalar Catoni influence function: log(1 + x + x^2/2) for x > 0, odd extension
/// otherwise.
inline double psi0(double x) {
    if (x > 0.0) return std::log1p(x + 0.5 * x * x);
    return -std::log1p(-x + 0.5 * x * x);
}

/// Spectral application of psi0: U diag(psi0(nu * lambda_i)) U^T for the
/// eigendecomposition of (S + S^T)/2. The symmetrization absorbs roundoff
/// asymmetry accumulated by callers.
inline Matrix matrix_psi(const Matrix& s, double nu) {
    if (s.rows() != s.cols()) throw dimension_error("matrix_psi: matrix not square");
    if (!(nu > 0.0)) throw contract_error("matrix_psi: scale nu must be positive");
    const Matrix sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    Vector lam = eig.eigenvalues();
    for (Index i = 0; i < lam.size(); ++i) lam[i] = psi0(nu * lam[i]);
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

/// Thin SVD M = U diag(sigma) V^T with singular values in decreasing order.
struct SvdResult {
    Matrix u;
    Vector singular_values;
    Matrix v;
};

inline SvdResult svd(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

struct ThresholdedSvd {
    Matrix matrix;
    int rank = 0;
};

/// SVD hard thresholding: singular values <= tau are zeroed. With tau == 0
/// the reconstruction keeps every singular value and the reported rank is the
/// numerical rank at cutoff 1e-10 * sigma_1.
inline ThresholdedSvd hard_threshold_svd(const Matrix& m, double tau) {
    if (tau < 0.0) throw contract_error("hard_threshold_svd: tau must be >= 0");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sigma = svd.singularValues();
    const double rank_cut = (tau == 0.0 && sigma.size() > 0) ? 1e-10 * sigma[0] : tau;
    ThresholdedSvd out;
    Vector kept = sigma;
    for (Index i = 0; i < sigma.size(); ++i) {
        if (sigma[i] > rank_cut) ++out.rank;
        if (tau > 0.0 && sigma[i] <= tau) kept[i] = 0.0;
    }
    out.matrix = svd.matrixU() * kept.asDiagonal() * svd.matrixV().transpose();
    return out;
}

struct MatrixNorms {
    double op = 0.0;
    double nuclear = 0.0;
    double frobenius = 0.0;
};

inline MatrixNorms norms(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sigma = svd.singularValues();
    MatrixNorms n;
    n.op = sigma.size() > 0 ? sigma[0] : 0.0;
    n.nuclear = sigma.sum();
    n.frobenius = m.norm();
    return n;
}

inline double operator_norm(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
}

inline void require_orthonormal(const Matrix& u, const char* who, double tol = 1e-6) {
    const Matrix gram = u.transpose() * u;
    const double dev = (gram - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
    if (dev > tol)
        throw contract_error(std::string(who) + ": columns not orthonormal (Gram deviation " +
                             std::to_string(dev) + ")");
}

/// ||(I - U1 U1^T) U2||_op, the largest principal angle sine between the span of
/// U2 and the span of U1. Inputs must have orthonormal columns and share the
/// ambient dimension.
inline double subspace_distance(const Matrix& u1, const Matrix& u2) {
    if (u1.rows() != u2.rows())
        throw dimension_error("subspace_distance: ambient dimensions differ");
    require_orthonormal(u1, "subspace_distance");
    require_orthonormal(u2, "subspace_distance");
    const Matrix residual = u2 - u1 * (u1.transpose() * u2);
    const double d = operator_norm(residual);
    return d > 1.0 ? 1.0 : d;
}

}  // namespace lowpopart::mat
