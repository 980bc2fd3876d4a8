#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lowpopart/design.hpp"
#include "lowpopart/errors.hpp"
#include "lowpopart/matcore.hpp"
#include "lowpopart/rng.hpp"

namespace lowpopart::env {

using mat::Index;
using mat::Matrix;
using mat::Vector;

enum class NoiseKind { Gaussian };

/// Bandit environment: ground truth, arm set, Gaussian noise level.
struct Environment {
    Matrix theta_star;
    design::ArmSet arm_set;
    double sigma = 1.0;
    NoiseKind noise = NoiseKind::Gaussian;
    int rank = 1;
    std::uint64_t seed = 0;
};

/// Rank-1 ground truth u v^T with u, v uniform on the unit spheres; unit
/// Frobenius norm by construction.
inline Matrix gen_theta_rank_one(Index d1, Index d2, std::uint64_t seed) {
    rng::Stream stream(rng::derive_seed({seed, 0x7468657461ULL}));
    const Vector u = stream.sphere(d1);
    const Vector v = stream.sphere(d2);
    return u * v.transpose();
}

/// Arms drawn uniformly at random from the unit Frobenius ball.
inline design::ArmSet gen_arms_frobenius_ball(int count, Index d1, Index d2, std::uint64_t seed) {
    if (count < 1) throw contract_error("gen_arms_frobenius_ball: count must be >= 1");
    rng::Stream stream(rng::derive_seed({seed, 0x66726f62ULL}));
    std::vector<Matrix> arms;
    arms.reserve(count);
    for (int i = 0; i < count; ++i) arms.push_back(mat::reshape(stream.ball(d1 * d2), d1, d2));
    return design::make_arm_set(d1, d2, std::move(arms));
}

/// Bilinear arm set {x z^T : x in X, z in Z} with unit-sphere draws;
/// |A| = x_count * z_count, all arms rank 1 with unit operator norm.
inline design::ArmSet gen_arms_bilinear(int x_count, int z_count, Index d1, Index d2,
                                        std::uint64_t seed) {
    if (x_count < 1 || z_count < 1) throw contract_error("gen_arms_bilinear: counts must be >= 1");
    rng::Stream stream(rng::derive_seed({seed, 0x62696c696eULL}));
    std::vector<Vector> xs, zs;
    for (int i = 0; i < x_count; ++i) xs.push_back(stream.sphere(d1));
    for (int j = 0; j < z_count; ++j) zs.push_back(stream.sphere(d2));
    std::vector<Matrix> arms;
    arms.reserve(static_cast<std::size_t>(x_count) * z_count);
    for (const Vector& x : xs)
        for (const Vector& z : zs) arms.push_back(x * z.transpose());
    return design::make_arm_set(d1, d2, std::move(arms));
}

/// The d1*d2 one-hot arms reshape(e_k) in vec order.
inline design::ArmSet gen_arms_canonical(Index d1, Index d2) {
    std::vector<Matrix> arms;
    arms.reserve(d1 * d2);
    for (Index k = 0; k < d1 * d2; ++k) {
        Vector e = Vector::Zero(d1 * d2);
        e[k] = 1.0;
        arms.push_back(mat::reshape(e, d1, d2));
    }
    return design::make_arm_set(d1, d2, std::move(arms));
}

/// The hard arm family in R^{d x d}: reshape(l e_1) with l = 1/sqrt(d), and
/// reshape(e_1 + e_i) for i = 2..d^2.
inline design::ArmSet gen_a_hard(int d) {
    if (d < 2) throw contract_error("gen_a_hard: d must be >= 2");
    const Index dim = static_cast<Index>(d) * d;
    const double l = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<Matrix> arms;
    arms.reserve(dim);
    for (Index i = 0; i < dim; ++i) {
        Vector v = Vector::Zero(dim);
        if (i == 0) {
            v[0] = l;
        } else {
            v[0] = 1.0;
            v[i] = 1.0;
        }
        arms.push_back(mat::reshape(v, d, d));
    }
    return design::make_arm_set(d, d, std::move(arms));
}

/// Hard lower-bound instance: a null hypothesis Theta, its alternative
/// Theta + 2 eps Z_tilde, the support matrices, and a finite arm set made of
/// rejection-sampled sign arms (H), Haar-sampled bordered dyads (S), plus Z
/// and Z_tilde themselves.
struct LowerBoundInstance {
    int d = 0;
    int r = 0;
    double eps = 0.0;
    double r_max = 0.0;
    double c = 0.0;
    Matrix theta;
    Matrix theta_tilde;
    Matrix z;
    Matrix z_tilde;
    design::ArmSet arm_set;
    int h_count = 0;       // arms [0, h_count) are H-arms
    int s_count = 0;       // arms [h_count, h_count + s_count) are S-arms
    int z_index = -1;      // index of Z in the arm set
    int z_tilde_index = -1;
};

inline LowerBoundInstance gen_lower_bound_instance(int d, int r, double eps, double r_max,
                                                   double c, int h_count, int s_count,
                                                   std::uint64_t seed) {
    if (!(2 * r - 1 <= d - 1))
        throw contract_error("lower bound instance: need 2r - 1 <= d - 1");
    if (!(r * eps <= r_max / 24.0))
        throw contract_error("lower bound instance: need r * eps <= R_max / 24");
    if (!(c <= 1.0 / (10.0 * d)) || !(c > 0.0))
        throw contract_error("lower bound instance: need 0 < C <= 1 / (10 d)");
    if (h_count < 1 || s_count < 0)
        throw contract_error("lower bound instance: need h_count >= 1, s_count >= 0");

    LowerBoundInstance inst;
    inst.d = d;
    inst.r = r;
    inst.eps = eps;
    inst.r_max = r_max;
    inst.c = c;

    inst.theta = Matrix::Zero(d, d);
    for (int i = 0; i < r - 1; ++i) inst.theta(i, i) = eps;
    inst.theta(d - 1, d - 1) = -r_max / 2.0;

    inst.z = Matrix::Zero(d, d);
    for (int i = 0; i < r - 1; ++i) inst.z(i, i) = 1.0;

    rng::Stream stream(rng::derive_seed({seed, 0x6c626e64ULL}));
    std::vector<Matrix> arms;
    arms.reserve(h_count + s_count + 2);

    // H: entries +-sqrt(2C) with the (d,d) entry pinned to 1/2, kept only when
    // the operator norm stays at most 1. Acceptance is overwhelming for
    // C <= 1/(10d); cap the oversampling anyway.
    const double amp = std::sqrt(2.0 * c);
    long attempts = 0;
    const long max_attempts = 100L * h_count;
    while (static_cast<int>(arms.size()) < h_count) {
        if (++attempts > max_attempts)
            throw contract_error("lower bound instance: H rejection sampling exceeded budget");
        Matrix x(d, d);
        for (Index j = 0; j < d; ++j)
            for (Index i = 0; i < d; ++i) x(i, j) = (stream.bits() & 1ULL) ? amp : -amp;
        x(d - 1, d - 1) = 0.5;
        if (mat::operator_norm(x) <= 1.0) arms.push_back(std::move(x));
    }
    inst.h_count = h_count;

    // S: bordered U V^T dyads with U, V Haar on (d-1) x (r-1) Stiefel frames.
    const auto stiefel = [&stream](Index rows, Index cols) {
        return Matrix(stream.haar_orthogonal(rows).leftCols(cols));
    };
    for (int k = 0; k < s_count; ++k) {
        Matrix a = Matrix::Zero(d, d);
        if (r >= 2)
            a.topLeftCorner(d - 1, d - 1) = stiefel(d - 1, r - 1) * stiefel(d - 1, r - 1).transpose();
        arms.push_back(std::move(a));
    }
    inst.s_count = s_count;

    inst.z_index = static_cast<int>(arms.size());
    arms.push_back(inst.z);

    // Z_tilde: one sampled member of S', the subfamily supported on the middle
    // (d - r) x (d - r) block.
    inst.z_tilde = Matrix::Zero(d, d);
    if (r >= 2)
        inst.z_tilde.block(r - 1, r - 1, d - r, d - r) =
            stiefel(d - r, r - 1) * stiefel(d - r, r - 1).transpose();
    inst.z_tilde_index = static_cast<int>(arms.size());
    arms.push_back(inst.z_tilde);

    inst.theta_tilde = inst.theta + 2.0 * eps * inst.z_tilde;
    inst.arm_set = design::make_arm_set(d, d, std::move(arms));
    return inst;
}

/// Draw one reward y = <Theta*, A> + sigma * z from the environment's noise
/// stream. The stream advances deterministically.
inline double pull(const Environment& e, int arm_index, rng::Stream& stream) {
    if (arm_index < 0 || arm_index >= static_cast<int>(e.arm_set.size()))
        throw contract_error("pull: arm index out of range");
    const double mean = e.theta_star.cwiseProduct(e.arm_set.arms[arm_index]).sum();
    return mean + e.sigma * stream.normal();
}

}  // namespace lowpopart::env
