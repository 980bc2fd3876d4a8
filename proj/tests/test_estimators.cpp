#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "lowpopart/envs.hpp"
#include "lowpopart/estimators.hpp"
#include "lowpopart/rng.hpp"

using namespace lowpopart;
using mat::Matrix;
using mat::Vector;

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST_CASE("one_sample with identity covariance") {
    const design::ArmSet arms = env::gen_arms_canonical(2, 2);
    const Matrix q_inv = Matrix::Identity(4, 4);
    const Matrix out = est::one_sample(arms.arms[0], 5.0, q_inv, Matrix::Zero(2, 2));
    CHECK(out(0, 0) == 5.0);
    CHECK(out.cwiseAbs().sum() == 5.0);
}

TEST_CASE("one_sample with a perfect pilot and noiseless response is zero") {
    rng::Stream stream(3);
    const Matrix theta = stream.gaussian_matrix(3, 2);
    const Matrix x = stream.gaussian_matrix(3, 2);
    const double y = theta.cwiseProduct(x).sum();
    const Matrix out = est::one_sample(x, y, Matrix::Identity(6, 6), theta);
    CHECK(out.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("one_sample is unbiased for Theta* - Theta0 under the design") {
    // X ~ uniform canonical design on 2x2, Gaussian noise sigma = 0.1.
    const design::ArmSet arms = env::gen_arms_canonical(2, 2);
    const Matrix q_inv = 4.0 * Matrix::Identity(4, 4);  // (I/4)^{-1}
    rng::Stream stream(100);
    const Matrix theta = env::gen_theta_rank_one(2, 2, 5);
    const Matrix theta0 = Matrix::Zero(2, 2);
    const double sigma = 0.1;
    const int n = 100000;
    Matrix mean = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const int j = static_cast<int>(stream.below(4));
        const double y = theta.cwiseProduct(arms.arms[j]).sum() + sigma * stream.normal();
        mean += est::one_sample(arms.arms[j], y, q_inv, theta0);
    }
    mean /= static_cast<double>(n);
    // With a zero pilot the residual keeps the signal, so each entry of the
    // one-sample mean has std <= 2 sqrt((1 + sigma^2) / n); use a 5-sigma band.
    const double band = 5.0 * 2.0 * std::sqrt((1.0 + sigma * sigma) / n);
    CHECK((mean - theta).cwiseAbs().maxCoeff() < band);
}

TEST_CASE("nu_and_tau closed forms") {
    est::EstimatorConfig cfg;
    cfg.sigma = 1.0;
    cfg.r0 = 0.0;
    cfg.delta = 0.1;
    cfg.b_value = 8.0;
    const auto [nu, tau] = est::nu_and_tau(cfg, 200, 2);
    // L = ln(2 * 2 / 0.1) = ln 40
    CHECK(tau == Catch::Approx(0.768258233056).epsilon(1e-9));
    CHECK(nu == Catch::Approx(0.067905075787).epsilon(1e-9));

    // doubling n0 scales both by 1/sqrt(2)
    const auto [nu2, tau2] = est::nu_and_tau(cfg, 400, 2);
    CHECK(nu2 == Catch::Approx(nu / std::sqrt(2.0)));
    CHECK(tau2 == Catch::Approx(tau / std::sqrt(2.0)));

    // delta -> 1 gives the smallest admissible threshold L = ln(2d)
    est::EstimatorConfig near_one = cfg;
    near_one.delta = 0.999999;
    const auto [nu3, tau3] = est::nu_and_tau(near_one, 200, 2);
    CHECK(tau3 == Catch::Approx(2.0 * std::sqrt(8.0 * std::log(4.0 / 0.999999) / 200.0)));
    CHECK(tau3 < tau);

    est::EstimatorConfig bad = cfg;
    bad.sigma = 0.0;
    bad.r0 = 0.0;
    CHECK_THROWS_AS(est::nu_and_tau(bad, 200, 2), contract_error);
}

TEST_CASE("tau shrinks monotonically with a better pilot") {
    est::EstimatorConfig a, b;
    a.sigma = b.sigma = 1.0;
    a.b_value = b.b_value = 8.0;
    a.r0 = 2.0;
    b.r0 = 0.5;
    CHECK(est::nu_and_tau(b, 100, 4).second < est::nu_and_tau(a, 100, 4).second);
}

TEST_CASE("lowpopart with zero residuals returns the thresholded truth") {
    // Theta0 = Theta*, noiseless responses: psi0(0) = 0 collapses the sum, so
    // Theta_1 = Theta0 and Theta_hat keeps the singular values above tau.
    rng::Stream stream(8);
    const design::ArmSet arms = env::gen_arms_canonical(3, 3);
    const Matrix theta = 3.0 * env::gen_theta_rank_one(3, 3, 17);
    est::TraceDataset data{3, 3, {}};
    for (int i = 0; i < 60; ++i) {
        const int j = static_cast<int>(stream.below(9));
        data.add(arms.arms[j], theta.cwiseProduct(arms.arms[j]).sum());
    }
    const Matrix q = Matrix::Identity(9, 9) / 9.0;
    est::EstimatorConfig cfg;
    cfg.sigma = 1.0;
    cfg.r0 = 0.0;
    cfg.delta = 0.1;
    cfg.theta0 = theta;
    const est::Estimate e = est::lowpopart(data, q, cfg);
    CHECK((e.theta_pre - theta).cwiseAbs().maxCoeff() < 1e-12);
    const auto ht = mat::hard_threshold_svd(theta, e.tau_used);
    CHECK((e.theta_hat - ht.matrix).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(e.rank == ht.rank);
    if (3.0 > e.tau_used) CHECK(e.rank == 1);
}

namespace {

int sample_from(const Vector& weights, rng::Stream& stream) {
    const double u = stream.uniform();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
        acc += weights[j];
        if (u < acc) return static_cast<int>(j);
    }
    return static_cast<int>(weights.size() - 1);
}

est::TraceDataset draw_dataset(const design::ArmSet& arms, const design::Design& dsn,
                               const Matrix& theta, double sigma, int n0, std::uint64_t seed) {
    rng::Stream stream(seed);
    est::TraceDataset data{arms.d1, arms.d2, {}};
    for (int i = 0; i < n0; ++i) {
        const int j = sample_from(dsn.weights, stream);
        const double y = theta.cwiseProduct(arms.arms[j]).sum() + sigma * stream.normal();
        data.add(arms.arms[j], y);
    }
    return data;
}

}  // namespace

TEST_CASE("lowpopart stays within tau of its pre-threshold aggregate") {
    const design::ArmSet arms = env::gen_arms_frobenius_ball(20, 3, 3, 77);
    design::DesignOptOptions opts;
    opts.max_iters = 3000;
    const design::Design dsn = design::optimize_design(arms, design::Criterion::BOpt, opts);
    const Matrix theta = env::gen_theta_rank_one(3, 3, 5);

    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const est::TraceDataset data = draw_dataset(arms, dsn, theta, 1.0, 400, seed);
        est::EstimatorConfig cfg;
        cfg.sigma = 1.0;
        cfg.r0 = 1.0;
        cfg.delta = 0.05;
        const est::Estimate e = est::lowpopart(data, dsn.q, cfg);
        REQUIRE(mat::operator_norm(e.theta_hat - e.theta_pre) <= e.tau_used + 1e-10);
        REQUIRE(e.rank <= 3);
        REQUIRE(e.b_used == Catch::Approx(dsn.criterion_value).epsilon(1e-6));
    }
}

TEST_CASE("lowpopart rejects an empty dataset and a singular covariance") {
    est::TraceDataset empty{2, 2, {}};
    est::EstimatorConfig cfg;
    CHECK_THROWS_AS(est::lowpopart(empty, Matrix::Identity(4, 4), cfg), contract_error);

    est::TraceDataset one{2, 2, {}};
    one.add(Matrix::Identity(2, 2), 1.0);
    CHECK_THROWS_AS(est::lowpopart(one, Matrix::Zero(4, 4), cfg), singularity_error);
}

TEST_CASE("lowpopart is a pure function of its inputs") {
    const design::ArmSet arms = env::gen_arms_canonical(2, 2);
    const Matrix theta = env::gen_theta_rank_one(2, 2, 9);
    design::Design uniform;
    uniform.weights = Vector::Constant(4, 0.25);
    uniform.q = 0.25 * Matrix::Identity(4, 4);
    const est::TraceDataset data = draw_dataset(arms, uniform, theta, 1.0, 200, 7);
    est::EstimatorConfig cfg;
    cfg.sigma = 1.0;
    cfg.r0 = 1.0;
    cfg.delta = 0.1;
    const est::Estimate a = est::lowpopart(data, uniform.q, cfg);
    const est::Estimate b = est::lowpopart(data, uniform.q, cfg);
    CHECK(a.theta_hat == b.theta_hat);  // bitwise
    CHECK(a.theta_pre == b.theta_pre);
}

TEST_CASE("warm_lowpopart contracts") {
    est::TraceDataset one{2, 2, {}};
    one.add(Matrix::Identity(2, 2), 1.0);
    CHECK_THROWS_AS(est::warm_lowpopart(one, Matrix::Identity(4, 4), 1.0, 1.0, 0.1),
                    contract_error);
}

TEST_CASE("warm_lowpopart on the zero matrix with noiseless rewards returns zero") {
    const design::ArmSet arms = env::gen_arms_canonical(2, 2);
    design::Design uniform;
    uniform.weights = Vector::Constant(4, 0.25);
    uniform.q = 0.25 * Matrix::Identity(4, 4);
    const est::TraceDataset data =
        draw_dataset(arms, uniform, Matrix::Zero(2, 2), 0.0, 100, 3);
    const est::Estimate e = est::warm_lowpopart(data, uniform.q, 1.0, 1.0, 0.1);
    CHECK(e.theta_hat.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(e.rank == 0);
}

TEST_CASE("warm start beats the zero-pilot run when the noise is small") {
    // d1 = d2 = 3, S* = 1, sigma = 0.1, n0 = 4000: the warm second stage drops
    // R0 from S* to sigma and must win in the median over seeds.
    const design::ArmSet arms = env::gen_arms_frobenius_ball(20, 3, 3, 31);
    design::DesignOptOptions opts;
    opts.max_iters = 5000;
    const design::Design dsn = design::optimize_design(arms, design::Criterion::BOpt, opts);

    std::vector<double> warm_err, plain_err;
    for (int s = 0; s < 60; ++s) {
        const Matrix theta = env::gen_theta_rank_one(3, 3, 1000 + s);
        const est::TraceDataset data =
            draw_dataset(arms, dsn, theta, 0.1, 4000, rng::derive_seed({5u, static_cast<std::uint64_t>(s)}));
        const est::Estimate warm = est::warm_lowpopart(data, dsn.q, 0.1, 1.0, 0.05);
        est::EstimatorConfig plain_cfg;
        plain_cfg.sigma = 0.1;
        plain_cfg.r0 = 1.0;
        plain_cfg.delta = 0.05;
        const est::Estimate plain = est::lowpopart(data, dsn.q, plain_cfg);
        warm_err.push_back(mat::operator_norm(warm.theta_hat - theta));
        plain_err.push_back(mat::operator_norm(plain.theta_hat - theta));
    }
    CHECK(median(warm_err) <= median(plain_err));
}

TEST_CASE("svt soft-thresholds singular values") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 3.0;
    m(1, 1) = 0.5;
    const Matrix out = est::svt(m, 1.0);
    CHECK(out(0, 0) == Catch::Approx(2.0));
    CHECK(std::abs(out(1, 1)) < 1e-12);

    rng::Stream stream(2);
    const Matrix r = stream.gaussian_matrix(3, 4);
    CHECK(est::svt(r, 0.0) == r);
    CHECK(est::svt(r, mat::operator_norm(r) + 1.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nuclear_norm_pls closed-form cases") {
    // single sample on a canonical arm: a scalar lasso
    est::TraceDataset one{2, 2, {}};
    Matrix e1 = Matrix::Zero(2, 2);
    e1(0, 0) = 1.0;
    one.add(e1, 3.0);
    const est::Estimate a = est::nuclear_norm_pls(one, 1.0);
    CHECK(a.theta_hat(0, 0) == Catch::Approx(2.0).margin(1e-6));
    CHECK(a.theta_hat.cwiseAbs().sum() == Catch::Approx(2.0).margin(1e-6));

    one.samples[0].second = -3.0;
    CHECK(est::nuclear_norm_pls(one, 1.0).theta_hat(0, 0) == Catch::Approx(-2.0).margin(1e-6));

    // overwhelming penalty
    rng::Stream stream(4);
    est::TraceDataset data{2, 2, {}};
    double max_y = 0.0;
    for (int i = 0; i < 20; ++i) {
        const Matrix x = stream.gaussian_matrix(2, 2);
        const double y = stream.normal();
        data.add(x, y);
        max_y = std::max(max_y, std::abs(y));
    }
    const double huge = 10.0 * 20 * max_y * 3.0;
    CHECK(est::nuclear_norm_pls(data, huge).theta_hat.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("nuclear_norm_pls with lambda 0 matches the least-squares solution") {
    rng::Stream stream(12);
    const Matrix theta = stream.gaussian_matrix(3, 3);
    est::TraceDataset data{3, 3, {}};
    Matrix design_rows(50, 9);
    Vector ys(50);
    for (int i = 0; i < 50; ++i) {
        const Matrix x = stream.gaussian_matrix(3, 3);
        const double y = theta.cwiseProduct(x).sum();
        data.add(x, y);
        design_rows.row(i) = mat::vec(x).transpose();
        ys[i] = y;
    }
    // independent oracle: direct least-squares solve of the vectorized system
    const Vector oracle = design_rows.colPivHouseholderQr().solve(ys);
    const est::Estimate e = est::nuclear_norm_pls(data, 0.0, 20000, 1e-14);
    CHECK((mat::vec(e.theta_hat) - oracle).norm() < 1e-6);
}

TEST_CASE("nuclear_norm_pls objective never exceeds the zero point") {
    rng::Stream stream(77);
    est::TraceDataset data{2, 3, {}};
    for (int i = 0; i < 30; ++i) data.add(stream.gaussian_matrix(2, 3), stream.normal() * 2.0);
    const double lam = 3.0;

    const auto objective = [&](const Matrix& th) {
        double f = 0.0;
        for (const auto& [x, y] : data.samples) {
            const double r = th.cwiseProduct(x).sum() - y;
            f += 0.5 * r * r;
        }
        return f + lam * mat::norms(th).nuclear;
    };
    const est::Estimate e = est::nuclear_norm_pls(data, lam);
    CHECK(objective(e.theta_hat) <= objective(Matrix::Zero(2, 3)) + 1e-9);

    // also no worse than the unregularized least-squares point
    Matrix rows(30, 6);
    Vector ys(30);
    for (int i = 0; i < 30; ++i) {
        rows.row(i) = mat::vec(data.samples[i].first).transpose();
        ys[i] = data.samples[i].second;
    }
    const Matrix ls = mat::reshape(rows.colPivHouseholderQr().solve(ys), 2, 3);
    CHECK(objective(e.theta_hat) <= objective(ls) + 1e-9);

    // iteration budget exhaustion is flagged, with the best iterate returned
    const est::Estimate tiny = est::nuclear_norm_pls(data, lam, 2, 1e-16);
    CHECK_FALSE(tiny.converged);
}
