#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "lowpopart/design.hpp"
#include "lowpopart/envs.hpp"
#include "lowpopart/rng.hpp"

using namespace lowpopart;
using mat::Matrix;
using mat::Vector;

TEST_CASE("gen_theta_rank_one is a fresh unit-Frobenius rank-1 matrix") {
    const Matrix a = env::gen_theta_rank_one(4, 3, 1);
    CHECK(a.norm() == Catch::Approx(1.0).epsilon(1e-12));
    Eigen::JacobiSVD<Matrix> svd(a);
    CHECK(svd.singularValues()[0] == Catch::Approx(1.0));
    CHECK(svd.singularValues()[1] < 1e-10);

    const Matrix b = env::gen_theta_rank_one(4, 3, 2);
    CHECK((a - b).norm() > 1e-3);
    CHECK(env::gen_theta_rank_one(4, 3, 1) == a);  // deterministic per seed
}

TEST_CASE("gen_arms_frobenius_ball stays in the ball and matches the radius law") {
    const design::ArmSet arms = env::gen_arms_frobenius_ball(150, 3, 3, 5);
    CHECK(arms.size() == 150);
    for (const Matrix& a : arms.arms) REQUIRE(a.norm() <= 1.0 + 1e-12);

    // Kolmogorov distance between sampled norms and an independent direct
    // sampler of the radius law U^{1/(d1 d2)}.
    const int n = 10000;
    const design::ArmSet big = env::gen_arms_frobenius_ball(n, 3, 3, 17);
    std::vector<double> norms_a;
    for (const Matrix& a : big.arms) norms_a.push_back(a.norm());
    rng::Stream stream(99);
    std::vector<double> norms_b;
    for (int i = 0; i < n; ++i) norms_b.push_back(std::pow(stream.uniform_pos(), 1.0 / 9.0));
    std::sort(norms_a.begin(), norms_a.end());
    std::sort(norms_b.begin(), norms_b.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        // empirical CDF difference evaluated at sample points
        const double fa = (std::lower_bound(norms_a.begin(), norms_a.end(), norms_b[i]) -
                           norms_a.begin()) / static_cast<double>(n);
        ks = std::max(ks, std::abs(fa - (i + 0.5) / n));
    }
    CHECK(ks < 0.05);
}

TEST_CASE("gen_arms_bilinear yields rank-1 unit-operator-norm dyads") {
    const design::ArmSet arms = env::gen_arms_bilinear(24, 24, 6, 6, 3);
    CHECK(arms.size() == 24 * 24);
    rng::Stream pick(1);
    for (int k = 0; k < 30; ++k) {
        const Matrix& a = arms.arms[pick.below(arms.size())];
        Eigen::JacobiSVD<Matrix> svd(a);
        REQUIRE(svd.singularValues()[0] == Catch::Approx(1.0).epsilon(1e-12));
        REQUIRE(svd.singularValues()[1] < 1e-12);
    }
}

TEST_CASE("gen_arms_canonical") {
    const design::ArmSet arms = env::gen_arms_canonical(2, 2);
    CHECK(arms.size() == 4);
    CHECK(arms.spanning);
    const Matrix q = design::covariance(arms, Vector::Constant(4, 0.25));
    CHECK((q - 0.25 * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
    for (const Matrix& a : arms.arms) {
        const auto n = mat::norms(a);
        REQUIRE(n.op == 1.0);
        REQUIRE(n.nuclear == Catch::Approx(1.0));
        REQUIRE(n.frobenius == 1.0);
    }
}

TEST_CASE("gen_a_hard structure") {
    const design::ArmSet arms = env::gen_a_hard(2);
    CHECK(arms.size() == 4);
    CHECK(arms.spanning);
    CHECK(arms.arms[0](0, 0) == Catch::Approx(1.0 / std::sqrt(2.0)));
    CHECK(arms.arms[0].cwiseAbs().sum() == Catch::Approx(1.0 / std::sqrt(2.0)));
    // arm i (i >= 2) is e_1 + e_i in vec coordinates
    for (int i = 1; i < 4; ++i) {
        const Vector v = mat::vec(arms.arms[i]);
        CHECK(v[0] == 1.0);
        CHECK(v[i] == 1.0);
        CHECK(v.cwiseAbs().sum() == 2.0);
    }
    CHECK_THROWS_AS(env::gen_a_hard(1), contract_error);
}

TEST_CASE("lower-bound instance: closed-form pieces at d=4, r=2") {
    const env::LowerBoundInstance inst =
        env::gen_lower_bound_instance(4, 2, 0.1, 6.0, 1.0 / 40.0, 50, 20, 7);

    Matrix theta_expected = Matrix::Zero(4, 4);
    theta_expected(0, 0) = 0.1;
    theta_expected(3, 3) = -3.0;
    CHECK((inst.theta - theta_expected).cwiseAbs().maxCoeff() < 1e-15);

    Matrix z_expected = Matrix::Zero(4, 4);
    z_expected(0, 0) = 1.0;
    CHECK((inst.z - z_expected).cwiseAbs().maxCoeff() < 1e-15);

    CHECK(inst.theta.cwiseProduct(inst.z).sum() == Catch::Approx(0.1));
    CHECK(inst.theta_tilde.cwiseProduct(inst.z_tilde).sum() == Catch::Approx(0.2));

    // nuclear budgets
    CHECK(mat::norms(inst.theta).nuclear == Catch::Approx(3.0 + 0.1));
    CHECK(mat::norms(inst.theta_tilde).nuclear == Catch::Approx(3.0 + 0.3));
    CHECK(mat::norms(inst.theta).nuclear <= 6.0);
    CHECK(mat::norms(inst.theta_tilde).nuclear <= 6.0);

    for (const Matrix& a : inst.arm_set.arms)
        REQUIRE(mat::operator_norm(a) <= 1.0 + 1e-12);
}

TEST_CASE("lower-bound instance: enumerated claims") {
    const env::LowerBoundInstance inst =
        env::gen_lower_bound_instance(6, 2, 0.05, 4.0, 1.0 / 60.0, 200, 40, 11);
    const double re = 0.05;

    double best = -1e300, best_tilde = -1e300, worst_h = -1e300;
    int argmax = -1, argmax_tilde = -1;
    for (std::size_t j = 0; j < inst.arm_set.size(); ++j) {
        const double v = inst.theta.cwiseProduct(inst.arm_set.arms[j]).sum();
        const double vt = inst.theta_tilde.cwiseProduct(inst.arm_set.arms[j]).sum();
        if (v > best) {
            best = v;
            argmax = static_cast<int>(j);
        }
        if (vt > best_tilde) {
            best_tilde = vt;
            argmax_tilde = static_cast<int>(j);
        }
        if (static_cast<int>(j) < inst.h_count) worst_h = std::max(worst_h, v);
    }
    CHECK(best == Catch::Approx(re));
    CHECK(argmax == inst.z_index);
    CHECK(best_tilde == Catch::Approx(2.0 * re));
    CHECK(argmax_tilde == inst.z_tilde_index);
    CHECK(worst_h <= -4.0 / 8.0);
}

TEST_CASE("lower-bound instance: violated preconditions are named") {
    CHECK_THROWS_WITH(env::gen_lower_bound_instance(4, 3, 0.01, 6.0, 1.0 / 40.0, 10, 5, 1),
                      Catch::Matchers::ContainsSubstring("2r - 1"));
    CHECK_THROWS_WITH(env::gen_lower_bound_instance(4, 2, 1.0, 6.0, 1.0 / 40.0, 10, 5, 1),
                      Catch::Matchers::ContainsSubstring("R_max / 24"));
    CHECK_THROWS_WITH(env::gen_lower_bound_instance(4, 2, 0.01, 6.0, 0.5, 10, 5, 1),
                      Catch::Matchers::ContainsSubstring("1 / (10 d)"));
}

TEST_CASE("uniform design over sampled H arms is well conditioned") {
    const int d = 8;
    const double c = 1.0 / 80.0;
    int ok = 0;
    for (int s = 0; s < 20; ++s) {
        const env::LowerBoundInstance inst = env::gen_lower_bound_instance(
            d, 2, 0.01, 6.0, c, 2000, 0, rng::derive_seed({3u, static_cast<std::uint64_t>(s)}));
        Matrix q = Matrix::Zero(d * d, d * d);
        for (int j = 0; j < inst.h_count; ++j) {
            const Vector v = mat::vec(inst.arm_set.arms[j]);
            q.noalias() += v * v.transpose() / static_cast<double>(inst.h_count);
        }
        if (design::e_criterion(q) >= c * 0.7) ++ok;
    }
    CHECK(ok == 20);
}

TEST_CASE("pull draws deterministic Gaussian rewards") {
    const design::ArmSet arms = env::gen_arms_canonical(2, 2);
    const Matrix theta = env::gen_theta_rank_one(2, 2, 3);
    env::Environment e{theta, arms, 0.0, env::NoiseKind::Gaussian, 1, 9};

    rng::Stream s1(5);
    CHECK(env::pull(e, 1, s1) == theta.cwiseProduct(arms.arms[1]).sum());  // sigma = 0

    e.sigma = 1.0;
    rng::Stream s2(5), s3(5);
    for (int i = 0; i < 50; ++i) REQUIRE(env::pull(e, 2, s2) == env::pull(e, 2, s3));

    const double mean_reward = theta.cwiseProduct(arms.arms[0]).sum();
    rng::Stream s4(8);
    double acc = 0.0;
    for (int i = 0; i < 100000; ++i) acc += env::pull(e, 0, s4);
    CHECK(std::abs(acc / 100000.0 - mean_reward) < 0.02);

    CHECK_THROWS_AS(env::pull(e, 99, s4), contract_error);
}
