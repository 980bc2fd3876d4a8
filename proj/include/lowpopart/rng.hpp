#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace lowpopart::rng {

/// SplitMix64 finalizer. Used as the documented stable hash for seed derivation:
/// derive({a, b, c}) = fold over parts of h -> splitmix64(h ^ splitmix64(part)),
/// starting from h = 0x9e3779b97f4a7c15.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

/// Deterministic random stream. Built on mt19937_64 (whose output sequence is
/// fully specified by the standard) with hand-rolled transforms, so identical
/// seeds give identical draws on every platform we build on.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    std::uint64_t bits() { return engine_(); }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is biased for huge n; n here is small (arm counts).
        return engine_() % n;
    }

    /// Standard normal via Marsaglia polar; the spare is cached per stream.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    Eigen::VectorXd gaussian_vector(Eigen::Index n) {
        Eigen::VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = normal();
        return x;
    }

    Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd x(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = normal();
        return x;
    }

    /// Uniform on the unit sphere S^{n-1}.
    Eigen::VectorXd sphere(Eigen::Index n) {
        Eigen::VectorXd x;
        double nrm = 0.0;
        do {
            x = gaussian_vector(n);
            nrm = x.norm();
        } while (nrm == 0.0);
        return x / nrm;
    }

    /// Uniform in the unit ball of R^n: uniform direction, radius ~ U^{1/n}.
    Eigen::VectorXd ball(Eigen::Index n) {
        return sphere(n) * std::pow(uniform_pos(), 1.0 / static_cast<double>(n));
    }

    /// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
    /// columns sign-corrected by the diagonal of R, which makes the draw
    /// both Haar and deterministic for a given stream.
    Eigen::MatrixXd haar_orthogonal(Eigen::Index n) {
        Eigen::MatrixXd g = gaussian_matrix(n, n);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ();
        Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < n; ++j)
            if (r(j, j) < 0.0) q.col(j) = -q.col(j);
        return q;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lowpopart::rng
