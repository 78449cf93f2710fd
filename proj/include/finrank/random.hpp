#pragma once

// Counter-based random draws: every value is a pure function of
// (seed, stream, index), so samples can be evaluated in any order or in
// parallel and still reproduce bit-for-bit.

#include <cmath>
#include <cstdint>

#include "finrank/linalg.hpp"

namespace finrank {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

    /// Independent child generator; children with distinct ids never share draws.
    constexpr CounterRng split(std::uint64_t id) const noexcept { return CounterRng(key_, id + 1); }

    constexpr std::uint64_t bits(std::uint64_t index) const noexcept {
        return splitmix64(key_ ^ splitmix64(index));
    }

    /// Uniform on (0, 1), never exactly 0 or 1.
    double uniform(std::uint64_t index) const noexcept {
        return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on the pair of uniforms (2i, 2i+1).
    double normal(std::uint64_t index) const noexcept {
        const double u1 = uniform(2 * index);
        const double u2 = uniform(2 * index + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

private:
    std::uint64_t key_;
};

/// Sequential convenience wrapper over a CounterRng.
class RandomStream {
public:
    explicit RandomStream(CounterRng rng) noexcept : rng_(rng) {}
    RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept : rng_(seed, stream) {}

    double uniform() noexcept { return rng_.uniform(next_++); }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept { return rng_.normal(next_++); }
    Complex complex_normal() noexcept {
        const double re = normal();
        const double im = normal();
        return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
    }

    CMatrix gaussian(Eigen::Index rows, Eigen::Index cols) {
        CMatrix m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal();
        }
        return m;
    }

    /// GUE-style Hermitian matrix: (G + G^*)/2 with complex Gaussian G.
    HermitianMatrix gue(Eigen::Index n) { return HermitianMatrix::symmetrized(gaussian(n, n)); }

    /// Haar-distributed unitary via QR of a complex Gaussian with phase fix.
    CMatrix unitary(Eigen::Index n) {
        const CMatrix g = gaussian(n, n);
        Eigen::HouseholderQR<CMatrix> qr(g);
        CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
        const CMatrix r = qr.matrixQR();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double mag = std::abs(r(k, k));
            if (mag > 0.0) q.col(k) *= r(k, k) / mag;
        }
        return q;
    }

    /// Positive definite X X^* / n + shift I.
    HermitianMatrix wishart(Eigen::Index n, double shift) {
        const CMatrix x = gaussian(n, n);
        CMatrix w = x * x.adjoint() / static_cast<double>(n);
        w += shift * CMatrix::Identity(n, n);
        return HermitianMatrix::symmetrized(w);
    }

private:
    CounterRng rng_;
    std::uint64_t next_ = 0;
};

}  // namespace finrank
