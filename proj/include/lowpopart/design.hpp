#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lowpopart/errors.hpp"
#include "lowpopart/matcore.hpp"
#include "lowpopart/rng.hpp"

namespace lowpopart::design {

using mat::Index;
using mat::Matrix;
using mat::Vector;

enum class Criterion { EOpt, BOpt };

inline const char* criterion_name(Criterion c) { return c == Criterion::EOpt ? "emin" : "bmin"; }

/// Finite ordered collection of d1 x d2 measurement/action matrices.
struct ArmSet {
    Index d1 = 0;
    Index d2 = 0;
    std::vector<Matrix> arms;
    bool spanning = false;

    Index dim() const { return d1 * d2; }
    std::size_t size() const { return arms.size(); }

    /// Arms stacked as columns of a (d1*d2) x n matrix, in vec order.
    Matrix vec_matrix() const {
        Matrix v(dim(), static_cast<Index>(arms.size()));
        for (std::size_t j = 0; j < arms.size(); ++j) v.col(static_cast<Index>(j)) = mat::vec(arms[j]);
        return v;
    }
};

inline ArmSet make_arm_set(Index d1, Index d2, std::vector<Matrix> arms) {
    if (d1 <= 0 || d2 <= 0) throw contract_error("arm set: dimensions must be positive");
    if (arms.empty()) throw contract_error("arm set: must be nonempty");
    for (const Matrix& a : arms) {
        if (a.rows() != d1 || a.cols() != d2)
            throw dimension_error("arm set: arm has wrong shape");
        if (!a.allFinite()) throw contract_error("arm set: arm has non-finite entries");
    }
    ArmSet set{d1, d2, std::move(arms), false};
    Eigen::ColPivHouseholderQR<Matrix> qr(set.vec_matrix());
    qr.setThreshold(1e-10);
    set.spanning = qr.rank() == set.dim();
    return set;
}

struct ArmSetReport {
    double max_op_norm = 0.0;
    bool spanning = false;
    std::size_t count = 0;
};

/// Reports the largest operator norm over arms, the spanning status and |A|.
inline ArmSetReport validate_arm_set(const ArmSet& set) {
    ArmSetReport rep;
    rep.count = set.size();
    rep.spanning = set.spanning;
    for (const Matrix& a : set.arms) rep.max_op_norm = std::max(rep.max_op_norm, mat::operator_norm(a));
    return rep;
}

/// Q(pi) = sum_j w_j vec(a_j) vec(a_j)^T.
inline Matrix covariance(const ArmSet& set, const Vector& weights) {
    if (weights.size() != static_cast<Index>(set.size()))
        throw dimension_error("covariance: weight count != arm count");
    if (std::abs(weights.sum() - 1.0) > 1e-6)
        throw contract_error("covariance: weights must sum to 1");
    if ((weights.array() < -1e-12).any())
        throw contract_error("covariance: weights must be nonnegative");
    Matrix q = Matrix::Zero(set.dim(), set.dim());
    for (std::size_t j = 0; j < set.size(); ++j) {
        if (weights[static_cast<Index>(j)] == 0.0) continue;
        const Vector v = mat::vec(set.arms[j]);
        q.noalias() += weights[static_cast<Index>(j)] * v * v.transpose();
    }
    return 0.5 * (q + q.transpose());
}

/// Contiguous diagonal block of Q^{-1} for column i (0-based), size d1 x d1.
inline Matrix col_block(const Matrix& q_inv, Index i, Index d1, Index d2) {
    if (q_inv.rows() != d1 * d2 || q_inv.cols() != d1 * d2)
        throw dimension_error("col_block: matrix is not d1*d2 square");
    if (i < 0 || i >= d2) throw contract_error("col_block: column index out of range");
    return q_inv.block(i * d1, i * d1, d1, d1);
}

/// Submatrix of Q^{-1} at indices {j + d1*l : l in [d2]} for row j (0-based),
/// size d2 x d2.
inline Matrix row_block(const Matrix& q_inv, Index j, Index d1, Index d2) {
    if (q_inv.rows() != d1 * d2 || q_inv.cols() != d1 * d2)
        throw dimension_error("row_block: matrix is not d1*d2 square");
    if (j < 0 || j >= d1) throw contract_error("row_block: row index out of range");
    Matrix b(d2, d2);
    for (Index r = 0; r < d2; ++r)
        for (Index c = 0; c < d2; ++c) b(r, c) = q_inv(j + d1 * r, j + d1 * c);
    return b;
}

namespace detail {

/// Spectral inverse of a PSD matrix with an absolute ridge. Throws
/// singularity_error when the ridged matrix has condition estimate > 1e14.
inline Matrix psd_inverse(const Matrix& q, double ridge, Vector* eigvals = nullptr) {
    Matrix qr = 0.5 * (q + q.transpose());
    if (ridge > 0.0) qr.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(qr);
    const Vector& lam = eig.eigenvalues();
    const double lo = lam.minCoeff(), hi = lam.maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e14)
        throw singularity_error("psd_inverse: matrix numerically singular (cond > 1e14)");
    Vector inv_lam = lam.cwiseInverse();
    if (eigvals) *eigvals = lam;
    return eig.eigenvectors() * inv_lam.asDiagonal() * eig.eigenvectors().transpose();
}

struct BlockSums {
    Matrix col_sum;  // d1 x d1
    Matrix row_sum;  // d2 x d2
};

inline BlockSums block_sums(const Matrix& q_inv, Index d1, Index d2) {
    BlockSums s{Matrix::Zero(d1, d1), Matrix::Zero(d2, d2)};
    for (Index i = 0; i < d2; ++i) s.col_sum += col_block(q_inv, i, d1, d2);
    for (Index j = 0; j < d1; ++j) s.row_sum += row_block(q_inv, j, d1, d2);
    return s;
}

struct EigMax {
    double value;
    Vector vector;
};

inline EigMax eig_max(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sym + sym.transpose()));
    const Index last = eig.eigenvalues().size() - 1;
    return {eig.eigenvalues()[last], eig.eigenvectors().col(last)};
}

}  // namespace detail

/// B(Q): the larger of lambda_max of the summed column blocks and summed row
/// blocks of (Q + eps I)^{-1}.
inline double b_criterion(const Matrix& q, Index d1, Index d2, double ridge = 0.0) {
    const Matrix q_inv = detail::psd_inverse(q, ridge);
    const detail::BlockSums s = detail::block_sums(q_inv, d1, d2);
    return std::max(detail::eig_max(s.col_sum).value, detail::eig_max(s.row_sum).value);
}

/// E-optimality criterion: smallest eigenvalue of Q (possibly 0).
inline double e_criterion(const Matrix& q) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (q + q.transpose()));
    return eig.eigenvalues().minCoeff();
}

struct DesignOptOptions {
    int max_iters = 2000;
    double step_scale = 1.0;  // multiplies the auto-calibrated step constant
    double ridge = 1e-9;      // relative: eps = ridge * trace(Q) / dim
    double tol = 1e-6;        // relative stall tolerance on the criterion
    std::uint64_t seed = 0;   // initialization perturbation
};

/// Probability weights over an arm set together with the assembled covariance
/// and the criterion value attained.
struct Design {
    Vector weights;
    Matrix q;
    double criterion_value = 0.0;
    Criterion kind = Criterion::EOpt;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

/// Subgradient of B(Q(pi)) at pi. Uses d(Q^{-1})/dpi_j = -Q^{-1} v_j v_j^T Q^{-1}:
/// for the active side with top eigenvector u,
///   dB/dpi_j = -sum_i (u^T S_i Q^{-1} v_j)^2.
/// At a col/row tie both sides contribute with weight 1/2.
inline Vector b_subgradient(const Matrix& q_inv, const Matrix& arm_vecs, Index d1, Index d2,
                            double* value_out) {
    const BlockSums s = block_sums(q_inv, d1, d2);
    const EigMax col = eig_max(s.col_sum);
    const EigMax row = eig_max(s.row_sum);
    *value_out = std::max(col.value, row.value);

    const Index n = arm_vecs.cols();
    const double tie_tol = 1e-12 * std::max({std::abs(col.value), std::abs(row.value), 1.0});
    const bool tie = std::abs(col.value - row.value) <= tie_tol;
    const bool use_col = tie || col.value > row.value;
    const bool use_row = tie || row.value >= col.value;
    const double w = tie ? 0.5 : 1.0;

    Vector g = Vector::Zero(n);
    if (use_col) {
        // h_i = Q^{-1} S_i^T u: rows of Q^{-1} hit by the embedded eigenvector.
        for (Index i = 0; i < d2; ++i) {
            const Vector h = q_inv.middleCols(i * d1, d1) * col.vector;
            const Vector dots = arm_vecs.transpose() * h;
            g -= w * dots.cwiseAbs2();
        }
    }
    if (use_row) {
        for (Index j = 0; j < d1; ++j) {
            Vector h = Vector::Zero(q_inv.rows());
            for (Index l = 0; l < d2; ++l) h += q_inv.col(j + d1 * l) * row.vector[l];
            const Vector dots = arm_vecs.transpose() * h;
            g -= w * dots.cwiseAbs2();
        }
    }
    return g;
}

inline Vector e_subgradient(const Matrix& q, const Matrix& arm_vecs, double* value_out) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (q + q.transpose()));
    *value_out = eig.eigenvalues()[0];
    const Vector u = eig.eigenvectors().col(0);
    const Vector dots = arm_vecs.transpose() * u;
    return dots.cwiseAbs2();
}

}  // namespace detail

/// Optimizes the chosen criterion over the probability simplex of the arm set
/// by exponentiated gradient (entropic mirror descent). Deterministic given
/// opts.seed. Returns the best iterate seen; `converged` is false when the
/// iteration budget ran out before the criterion stalled within opts.tol.
inline Design optimize_design(const ArmSet& set, Criterion kind, const DesignOptOptions& opts = {}) {
    if (opts.max_iters <= 0 || opts.step_scale <= 0.0 || opts.tol <= 0.0 || opts.ridge < 0.0)
        throw contract_error("optimize_design: options must be positive");
    if (kind == Criterion::BOpt && !set.spanning)
        throw spanning_error("optimize_design: B-criterion needs a spanning arm set");

    const Index n = static_cast<Index>(set.size());
    const Index dim = set.dim();
    const Matrix arm_vecs = set.vec_matrix();
    const bool minimize = kind == Criterion::BOpt;

    rng::Stream stream(rng::derive_seed({opts.seed, 0x64657369676eULL}));
    Vector w(n);
    for (Index j = 0; j < n; ++j) w[j] = 1.0 + 1e-6 * stream.uniform();
    w /= w.sum();

    Vector best_w = w;
    double best_f = minimize ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
    double step_c = 0.0;
    int last_improve = 0;
    int iters = 0;
    bool converged = false;
    constexpr int kStallWindow = 50;

    for (int t = 1; t <= opts.max_iters; ++t) {
        iters = t;
        const Matrix q = arm_vecs * w.asDiagonal() * arm_vecs.transpose();
        double f = 0.0;
        Vector g;
        if (minimize) {
            const double eps = opts.ridge * q.trace() / static_cast<double>(dim);
            const Matrix q_inv = detail::psd_inverse(q, eps);
            g = detail::b_subgradient(q_inv, arm_vecs, set.d1, set.d2, &f);
        } else {
            g = detail::e_subgradient(q, arm_vecs, &f);
        }

        const bool improved = !std::isfinite(best_f) ||
                              (minimize ? f < best_f - opts.tol * std::abs(best_f)
                                        : f > best_f + opts.tol * std::abs(best_f));
        if ((minimize && f < best_f) || (!minimize && f > best_f)) {
            best_f = f;
            best_w = w;
        }
        if (improved) last_improve = t;
        if (t - last_improve >= kStallWindow) {
            converged = true;
            break;
        }

        if (t == 1) {
            // Calibrate c so the first multiplicative update moves any weight
            // by at most ~10%.
            const double range = g.maxCoeff() - g.minCoeff();
            step_c = (range > 0.0 ? std::log(1.1) / range : 1.0) * opts.step_scale;
        }
        const double eta = step_c / std::sqrt(static_cast<double>(t));
        Vector z = (minimize ? -eta : eta) * g;
        z.array() -= z.maxCoeff();
        w = w.cwiseProduct(z.array().exp().matrix());
        w /= w.sum();
    }

    Design d;
    d.weights = best_w;
    d.q = arm_vecs * best_w.asDiagonal() * arm_vecs.transpose();
    d.q = 0.5 * (d.q + d.q.transpose());
    if (minimize) {
        const double eps = opts.ridge * d.q.trace() / static_cast<double>(dim);
        d.criterion_value = b_criterion(d.q, set.d1, set.d2, eps);
    } else {
        d.criterion_value = e_criterion(d.q);
    }
    d.kind = kind;
    d.converged = converged;
    d.iterations = iters;
    return d;
}

}  // namespace lowpopart::design
