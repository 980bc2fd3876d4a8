#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lowpopart/design.hpp"
#include "lowpopart/envs.hpp"
#include "lowpopart/errors.hpp"
#include "lowpopart/estimators.hpp"
#include "lowpopart/matcore.hpp"
#include "lowpopart/rng.hpp"

namespace lowpopart::algo {

using mat::Index;
using mat::Matrix;
using mat::Vector;

struct RunStep {
    int t = 0;
    int arm_index = 0;
    double reward = 0.0;
    double instant_regret = 0.0;
    double cumulative_regret = 0.0;
    int phase = 1;
};

/// Per-step record of a bandit run. Regret fields are filled by regret_of.
struct RunTrace {
    std::string algorithm;
    int exploration_end = 0;  // last step of the exploration phase (0 = none)
    bool oracle_rmax = false;
    std::vector<RunStep> steps;

    double final_regret() const { return steps.empty() ? 0.0 : steps.back().cumulative_regret; }
};

/// Pseudo-regret from the true parameter: instant_t = max_A <Theta*, A> minus
/// the chosen arm's mean reward. Never touches the noisy rewards.
inline void regret_of(RunTrace& trace, const env::Environment& e) {
    std::vector<double> means(e.arm_set.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < e.arm_set.size(); ++j) {
        means[j] = e.theta_star.cwiseProduct(e.arm_set.arms[j]).sum();
        best = std::max(best, means[j]);
    }
    double cum = 0.0;
    for (RunStep& s : trace.steps) {
        if (s.arm_index < 0 || s.arm_index >= static_cast<int>(means.size()))
            throw contract_error("regret_of: arm index out of range");
        s.instant_regret = best - means[s.arm_index];
        cum += s.instant_regret;
        s.cumulative_regret = cum;
    }
}

/// n0 = min(T, ceil((sigma^2 r^2 B_min T^2 / R_max^2)^{1/3})), clipped to >= 1.
namespace detail {

// ceil with a relative epsilon guard so formula values that are exact
// integers up to roundoff do not get bumped to the next integer.
inline int guarded_ceil(double raw) {
    return static_cast<int>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

}  // namespace detail

inline int etc_exploration_length(double sigma, int r, double b_min, int T, double r_max) {
    if (!(sigma > 0.0) || r < 1 || !(b_min > 0.0) || T < 1 || !(r_max > 0.0))
        throw contract_error("etc_exploration_length: inputs must be positive");
    const double raw = std::cbrt(sigma * sigma * r * r * b_min * static_cast<double>(T) * T /
                                 (r_max * r_max));
    return std::max(1, std::min(T, detail::guarded_ceil(raw)));
}

/// n0* = min(T, ceil((sigma^2 r^2 T^2 / (C_min^2 S*^2))^{1/3})), clipped to >= 1.
inline int nuc_exploration_length(double sigma, int r, int T, double c_min, double s_star) {
    if (!(sigma > 0.0) || r < 1 || T < 1 || !(c_min > 0.0) || !(s_star > 0.0))
        throw contract_error("nuc_exploration_length: inputs must be positive");
    const double raw = std::cbrt(sigma * sigma * r * r * static_cast<double>(T) * T /
                                 (c_min * c_min * s_star * s_star));
    return std::max(1, std::min(T, detail::guarded_ceil(raw)));
}

/// n0 = sqrt(sqrt(d) B_min T / S_r^2), truncated.
inline int estr_exploration_length(int d_max, double b_min, int T, double s_r) {
    if (d_max < 1 || !(b_min > 0.0) || T < 1 || !(s_r > 0.0))
        throw contract_error("estr_exploration_length: inputs must be positive");
    const double raw = std::sqrt(std::sqrt(static_cast<double>(d_max)) * b_min * T / (s_r * s_r));
    return std::max(1, static_cast<int>(raw));
}

/// Weighted-ridge UCB state (LowOFUL). The regularizer puts lambda on the
/// first k coordinates and lambda_perp on the rest; with k = dim and
/// lambda_perp = lambda this is plain OFUL.
class LowOful {
public:
    LowOful(Index dim, Index k, double lambda, double lambda_perp, double sigma, double delta,
            double b, double b_perp)
        : dim_(dim), k_(k), lambda_(lambda), lambda_perp_(lambda_perp), sigma_(sigma),
          delta_(delta), b_(b), b_perp_(b_perp) {
        if (k < 0 || k > dim) throw contract_error("lowoful: need 0 <= k <= dim");
        if (!(lambda > 0.0) || !(lambda_perp > 0.0))
            throw contract_error("lowoful: regularizers must be positive");
        Vector diag(dim);
        for (Index i = 0; i < dim; ++i) diag[i] = i < k ? lambda : lambda_perp;
        v_ = diag.asDiagonal();
        log_det_lambda_ = diag.array().log().sum();
        log_det_v_ = log_det_lambda_;
        bvec_ = Vector::Zero(dim);
        theta_hat_ = Vector::Zero(dim);
        llt_.compute(v_);
    }

    /// sqrt(beta_t) = sigma sqrt(log(|V|/(|Lambda| delta^2))) + sqrt(lambda) B
    ///              + sqrt(lambda_perp) B_perp.
    double beta_sqrt() const {
        const double log_ratio = log_det_v_ - log_det_lambda_ + 2.0 * std::log(1.0 / delta_);
        return sigma_ * std::sqrt(std::max(0.0, log_ratio)) + std::sqrt(lambda_) * b_ +
               std::sqrt(lambda_perp_) * b_perp_;
    }

    /// argmax over arms of <theta_hat, a> + sqrt(beta) ||a||_{V^{-1}}; ties go
    /// to the lowest index.
    int select(const std::vector<Vector>& arms) const {
        if (arms.empty()) throw contract_error("lowoful: arm set is empty");
        const double sb = beta_sqrt();
        int best = 0;
        double best_ucb = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < arms.size(); ++j) {
            const Vector w = llt_.solve(arms[j]);
            const double ucb = theta_hat_.dot(arms[j]) + sb * std::sqrt(std::max(0.0, arms[j].dot(w)));
            if (ucb > best_ucb) {
                best_ucb = ucb;
                best = static_cast<int>(j);
            }
        }
        return best;
    }

    /// Rank-1 update V += a a^T, b += y a; refreshes theta_hat and maintains
    /// log det V incrementally via log|V + aa^T| = log|V| + log(1 + a^T V^{-1} a).
    void update(const Vector& a, double y) {
        if (a.size() != dim_) throw dimension_error("lowoful: arm has wrong dimension");
        const Vector w = llt_.solve(a);
        log_det_v_ += std::log1p(a.dot(w));
        v_.noalias() += a * a.transpose();
        bvec_ += y * a;
        llt_.compute(v_);
        theta_hat_ = llt_.solve(bvec_);
        ++t_;
    }

    const Vector& theta_hat() const { return theta_hat_; }
    const Matrix& gram() const { return v_; }
    double log_det() const { return log_det_v_; }
    int t() const { return t_; }

private:
    Index dim_, k_;
    double lambda_, lambda_perp_, sigma_, delta_, b_, b_perp_;
    Matrix v_;
    Vector bvec_;
    Vector theta_hat_;
    Eigen::LLT<Matrix> llt_;
    double log_det_v_ = 0.0;
    double log_det_lambda_ = 0.0;
    int t_ = 0;
};

/// Arm features after the subspace rotation of the ESTR stage: each arm A maps
/// to (vec(U^T A V); vec(Up^T A V); vec(U^T A Vp); vec(Up^T A Vp)) so the last
/// (d1-r)(d2-r) components live in the complementary subspaces. Arm order (and
/// thus index mapping back to the original set) is preserved.
struct RotatedArms {
    std::vector<Vector> arms;
    Index k = 0;         // leading block size r(d1+d2-r)
    Index tail_dim = 0;  // (d1-r)(d2-r)
};

namespace detail {

inline Matrix orthonormal_complement(const Matrix& u) {
    const Index n = u.rows(), r = u.cols();
    if (r == n) return Matrix(n, 0);
    Eigen::HouseholderQR<Matrix> qr(u);
    const Matrix full = qr.householderQ();
    return full.rightCols(n - r);
}

inline Matrix full_basis(const Matrix& u) {
    if (u.cols() == u.rows()) return u;
    Matrix full(u.rows(), u.rows());
    full.leftCols(u.cols()) = u;
    full.rightCols(u.rows() - u.cols()) = orthonormal_complement(u);
    return full;
}

inline Vector rearranged(const Matrix& rotated, Index r) {
    const Index d1 = rotated.rows(), d2 = rotated.cols();
    Vector out(d1 * d2);
    Index at = 0;
    const auto put = [&](const Matrix& block) {
        const Vector v = mat::vec(block);
        out.segment(at, v.size()) = v;
        at += v.size();
    };
    put(rotated.topLeftCorner(r, r));
    put(rotated.bottomLeftCorner(d1 - r, r));
    put(rotated.topRightCorner(r, d2 - r));
    put(rotated.bottomRightCorner(d1 - r, d2 - r));
    return out;
}

}  // namespace detail

/// Rotates one matrix by [U Up]^T M [V Vp] and rearranges; inner products are
/// preserved: <rotate(Theta), rotate(A)> = <Theta, A>.
inline Vector rotate_matrix(const Matrix& m, const Matrix& u_hat, const Matrix& v_hat) {
    mat::require_orthonormal(u_hat, "rotate_matrix");
    mat::require_orthonormal(v_hat, "rotate_matrix");
    if (u_hat.rows() != m.rows() || v_hat.rows() != m.cols())
        throw dimension_error("rotate_matrix: basis/matrix shape mismatch");
    if (u_hat.cols() != v_hat.cols()) throw dimension_error("rotate_matrix: basis ranks differ");
    const Matrix u_full = detail::full_basis(u_hat);
    const Matrix v_full = detail::full_basis(v_hat);
    return detail::rearranged(u_full.transpose() * m * v_full, u_hat.cols());
}

inline RotatedArms rotate_and_rearrange(const design::ArmSet& set, const Matrix& u_hat,
                                        const Matrix& v_hat) {
    mat::require_orthonormal(u_hat, "rotate_and_rearrange");
    mat::require_orthonormal(v_hat, "rotate_and_rearrange");
    if (u_hat.rows() != set.d1 || v_hat.rows() != set.d2)
        throw dimension_error("rotate_and_rearrange: basis/arm shape mismatch");
    const Index r = u_hat.cols();
    RotatedArms out;
    out.k = r * (set.d1 + set.d2 - r);
    out.tail_dim = (set.d1 - r) * (set.d2 - r);
    out.arms.reserve(set.size());
    const Matrix u_full = detail::full_basis(u_hat);
    const Matrix v_full = detail::full_basis(v_hat);
    for (const Matrix& a : set.arms)
        out.arms.push_back(detail::rearranged(u_full.transpose() * a * v_full, r));
    return out;
}

struct EtcConfig {
    int T = 1;
    double sigma = 1.0;       // tuning noise scale (> 0)
    double delta = 0.05;
    double s_star = 1.0;      // nuclear-norm bound on Theta*
    double r_max = -1.0;      // bound on the best reward; <= 0 means auto
    bool oracle_rmax = false; // r_max was taken from the true Theta*
    int r = 1;
    int override_n0 = -1;
    std::uint64_t algo_seed = 0;
    design::DesignOptOptions design_opts;
};

struct EstrConfig {
    int T = 1;
    double sigma = 1.0;
    double delta = 0.05;
    double s_star = 1.0;
    double s_r = 1.0;  // lower bound on the smallest nonzero singular value
    int r = 1;
    int override_n0 = -1;
    std::uint64_t algo_seed = 0;
    design::DesignOptOptions design_opts;
};

struct OfulConfig {
    int T = 1;
    double sigma = 1.0;
    double delta = 0.05;
    double s_star = 1.0;
    double lambda = 1.0;
    std::uint64_t algo_seed = 0;
};

namespace detail {

inline int sample_index(const Vector& weights, rng::Stream& stream) {
    const double u = stream.uniform();
    double acc = 0.0;
    for (Index j = 0; j < weights.size(); ++j) {
        acc += weights[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(weights.size() - 1);
}

inline int greedy_arm(const design::ArmSet& set, const Matrix& theta) {
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < set.size(); ++j) {
        const double val = theta.cwiseProduct(set.arms[j]).sum();
        if (val > best_val) {
            best_val = val;
            best = static_cast<int>(j);
        }
    }
    return best;
}

inline double auto_r_max(const design::ArmSet& set, double s_star) {
    return design::validate_arm_set(set).max_op_norm * s_star;
}

}  // namespace detail

/// LPA-ETC: explore n0 steps by the B-optimal design, estimate with
/// Warm-LowPopArt, then commit to the greedy arm.
inline RunTrace run_lpa_etc(const env::Environment& e, const EtcConfig& cfg) {
    if (cfg.T < 1) throw contract_error("run_lpa_etc: T must be >= 1");
    RunTrace trace;
    trace.algorithm = "lpa_etc";
    trace.oracle_rmax = cfg.oracle_rmax;
    rng::Stream stream(rng::derive_seed({e.seed, cfg.algo_seed, 0x657463ULL}));

    design::DesignOptOptions opts = cfg.design_opts;
    opts.seed = rng::derive_seed({cfg.algo_seed, 0x6273696465ULL});
    // The design is needed before n0 can be set; optimize first, then explore.
    const design::Design dsn = design::optimize_design(e.arm_set, design::Criterion::BOpt, opts);
    const double r_max = cfg.r_max > 0.0 ? cfg.r_max : detail::auto_r_max(e.arm_set, cfg.s_star);
    int n0 = cfg.override_n0 > 0
                 ? std::min(cfg.override_n0, cfg.T)
                 : etc_exploration_length(cfg.sigma, cfg.r, dsn.criterion_value, cfg.T, r_max);

    est::TraceDataset data{e.arm_set.d1, e.arm_set.d2, {}};
    for (int t = 1; t <= n0; ++t) {
        const int j = detail::sample_index(dsn.weights, stream);
        const double y = env::pull(e, j, stream);
        data.add(e.arm_set.arms[j], y);
        trace.steps.push_back({t, j, y, 0.0, 0.0, 1});
    }
    trace.exploration_end = n0;

    if (n0 < cfg.T) {
        const est::Estimate est = est::warm_lowpopart(data, dsn.q, cfg.sigma, cfg.s_star, cfg.delta);
        // A fully thresholded estimate carries no ranking information; fall
        // back to the pre-threshold aggregate, as the subspace stage does.
        const Matrix& target = est.rank >= 1 ? est.theta_hat : est.theta_pre;
        const int commit = detail::greedy_arm(e.arm_set, target);
        for (int t = n0 + 1; t <= cfg.T; ++t) {
            const double y = env::pull(e, commit, stream);
            trace.steps.push_back({t, commit, y, 0.0, 0.0, 2});
        }
    }
    regret_of(trace, e);
    return trace;
}

/// Nuc-ETC: explore by the E-optimal design, estimate by nuclear-norm
/// penalized least squares, commit greedily. The penalty follows the standard
/// mean-loss tuning lambda_bar = 2 sigma sqrt(ln(2(d1+d2)/delta) / n0), scaled
/// by n0 for the summed objective the solver minimizes.
inline RunTrace run_nuc_etc(const env::Environment& e, const EtcConfig& cfg) {
    if (cfg.T < 1) throw contract_error("run_nuc_etc: T must be >= 1");
    RunTrace trace;
    trace.algorithm = "nuc_etc";
    rng::Stream stream(rng::derive_seed({e.seed, cfg.algo_seed, 0x657463ULL}));

    design::DesignOptOptions opts = cfg.design_opts;
    opts.seed = rng::derive_seed({cfg.algo_seed, 0x6573696465ULL});
    const design::Design dsn = design::optimize_design(e.arm_set, design::Criterion::EOpt, opts);
    int n0 = cfg.override_n0 > 0
                 ? std::min(cfg.override_n0, cfg.T)
                 : nuc_exploration_length(cfg.sigma, cfg.r, cfg.T, dsn.criterion_value, cfg.s_star);

    est::TraceDataset data{e.arm_set.d1, e.arm_set.d2, {}};
    for (int t = 1; t <= n0; ++t) {
        const int j = detail::sample_index(dsn.weights, stream);
        const double y = env::pull(e, j, stream);
        data.add(e.arm_set.arms[j], y);
        trace.steps.push_back({t, j, y, 0.0, 0.0, 1});
    }
    trace.exploration_end = n0;

    if (n0 < cfg.T) {
        const double log_dim = std::log(2.0 * static_cast<double>(e.arm_set.d1 + e.arm_set.d2) /
                                        cfg.delta);
        const double lam = 2.0 * cfg.sigma * std::sqrt(static_cast<double>(n0) * log_dim);
        const est::Estimate est = est::nuclear_norm_pls(data, lam);
        const int commit = detail::greedy_arm(e.arm_set, est.theta_hat);
        for (int t = n0 + 1; t <= cfg.T; ++t) {
            const double y = env::pull(e, commit, stream);
            trace.steps.push_back({t, commit, y, 0.0, 0.0, 2});
        }
    }
    regret_of(trace, e);
    return trace;
}

/// LPA-ESTR: explore n0 steps by the B-optimal design, estimate the row and
/// column subspaces with Warm-LowPopArt, rotate the arm set, and refine with
/// LowOFUL for the remaining horizon. The subspace bases are the leading
/// singular directions of the pre-threshold aggregate, which coincide with the
/// thresholded estimate's directions whenever its rank reaches r.
inline RunTrace run_lpa_estr(const env::Environment& e, const EstrConfig& cfg) {
    if (cfg.T < 1) throw contract_error("run_lpa_estr: T must be >= 1");
    if (!(cfg.s_r > 0.0)) throw contract_error("run_lpa_estr: S_r must be positive");
    RunTrace trace;
    trace.algorithm = "lpa_estr";
    rng::Stream stream(rng::derive_seed({e.seed, cfg.algo_seed, 0x65737472ULL}));

    const Index d1 = e.arm_set.d1, d2 = e.arm_set.d2;
    const int d_max = static_cast<int>(std::max(d1, d2));

    design::DesignOptOptions opts = cfg.design_opts;
    opts.seed = rng::derive_seed({cfg.algo_seed, 0x6273696465ULL});
    const design::Design dsn = design::optimize_design(e.arm_set, design::Criterion::BOpt, opts);
    const double b_min = dsn.criterion_value;
    const int n0 = cfg.override_n0 > 0
                       ? cfg.override_n0
                       : estr_exploration_length(d_max, b_min, cfg.T, cfg.s_r);
    if (n0 >= cfg.T) throw contract_error("run_lpa_estr: exploration length n0 >= T");

    est::TraceDataset data{d1, d2, {}};
    for (int t = 1; t <= n0; ++t) {
        const int j = detail::sample_index(dsn.weights, stream);
        const double y = env::pull(e, j, stream);
        data.add(e.arm_set.arms[j], y);
        trace.steps.push_back({t, j, y, 0.0, 0.0, 1});
    }
    trace.exploration_end = n0;

    const est::Estimate est = est::warm_lowpopart(data, dsn.q, cfg.sigma, cfg.s_star,
                                                  cfg.delta / 2.0);
    const mat::SvdResult svd = mat::svd(est.theta_pre);
    const Matrix u_hat = svd.u.leftCols(cfg.r);
    const Matrix v_hat = svd.v.leftCols(cfg.r);

    const RotatedArms rotated = rotate_and_rearrange(e.arm_set, u_hat, v_hat);
    const double lambda = cfg.sigma * cfg.sigma * d_max * cfg.r / (cfg.s_star * cfg.s_star);
    const double lambda_perp =
        cfg.T / (cfg.r * std::log(1.0 + d_max * static_cast<double>(cfg.T) / lambda));
    const double b_perp = b_min * cfg.sigma * cfg.sigma * cfg.s_star /
                          (static_cast<double>(n0) * cfg.s_r * cfg.s_r);
    LowOful oful(d1 * d2, rotated.k, lambda, lambda_perp, cfg.sigma, cfg.delta / 2.0, cfg.s_star,
                 b_perp);
    for (int t = n0 + 1; t <= cfg.T; ++t) {
        const int j = oful.select(rotated.arms);
        const double y = env::pull(e, j, stream);
        oful.update(rotated.arms[j], y);
        trace.steps.push_back({t, j, y, 0.0, 0.0, 2});
    }
    regret_of(trace, e);
    return trace;
}

/// Plain OFUL on the flattened d1 d2-dimensional problem: LowOFUL with
/// k = d1 d2 and lambda_perp = lambda.
inline RunTrace run_oful(const env::Environment& e, const OfulConfig& cfg) {
    if (cfg.T < 1) throw contract_error("run_oful: T must be >= 1");
    RunTrace trace;
    trace.algorithm = "oful";
    rng::Stream stream(rng::derive_seed({e.seed, cfg.algo_seed, 0x6f66756cULL}));

    const Index dim = e.arm_set.dim();
    std::vector<Vector> arms;
    arms.reserve(e.arm_set.size());
    for (const Matrix& a : e.arm_set.arms) arms.push_back(mat::vec(a));

    LowOful oful(dim, dim, cfg.lambda, cfg.lambda, cfg.sigma, cfg.delta, cfg.s_star, 0.0);
    for (int t = 1; t <= cfg.T; ++t) {
        const int j = oful.select(arms);
        const double y = env::pull(e, j, stream);
        oful.update(arms[j], y);
        trace.steps.push_back({t, j, y, 0.0, 0.0, 2});
    }
    regret_of(trace, e);
    return trace;
}

}  // namespace lowpopart::algo
