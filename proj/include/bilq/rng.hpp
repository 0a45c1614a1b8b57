#pragma once

// Splittable random streams for Monte Carlo rollouts.
//
// Each (seed, stream_id) pair seeds an independent xoshiro256** state via
// splitmix64. Normal deviates use Box-Muller. Nothing here depends on the
// standard library's distribution implementations, so sequences are
// bit-identical across toolchains.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "core.hpp"

namespace bilq {

namespace detail {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

[[nodiscard]] constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace detail

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
        std::uint64_t sm = seed;
        // Mix the stream id through a second splitmix chain so that adjacent
        // ids land far apart in state space.
        std::uint64_t sid = stream_id ^ 0xD1B54A32D192ED03ULL;
        const std::uint64_t salt = detail::splitmix64(sid);
        sm ^= salt;
        for (auto& word : s_) word = detail::splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

    /// Independent child stream; the parent state is not advanced.
    [[nodiscard]] RngStream substream(std::uint64_t index) const {
        std::uint64_t mix = stream_id_ * 0x9E3779B97F4A7C15ULL + index + 1;
        return RngStream(seed_ ^ detail::splitmix64(mix), stream_id_ + (index + 1) * 0x632BE59BD9B4E019ULL);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on (0, 1].
    double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vector standard_normal(Eigen::Index n) {
        Vector z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = standard_normal();
        return z;
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Lower factor L with L L^T = cov. Cholesky when possible, otherwise a
/// symmetric eigendecomposition with negative round-off clipped to zero.
[[nodiscard]] inline Matrix gaussian_factor(const Matrix& cov) {
    const Matrix s = symmetrize(cov);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector& ev = es.eigenvalues();
    if (ev.size() > 0 && ev.minCoeff() < -1e-8) throw std::domain_error("sample_gaussian: covariance not PSD");
    if (ev.size() > 0 && ev.minCoeff() > 0.0) {
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// mean + L z, z ~ N(0, I) drawn from the stream. Always consumes
/// mean.size() normals so draw counts do not depend on cov.
inline Vector sample_gaussian(RngStream& stream, const Vector& mean, const Matrix& cov) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size())
        throw std::invalid_argument("sample_gaussian: covariance shape mismatch");
    const Vector z = stream.standard_normal(mean.size());
    if (cov.isZero(0.0)) return mean;
    return mean + gaussian_factor(cov) * z;
}

/// Same draw as sample_gaussian with a precomputed gaussian_factor().
inline Vector sample_with_factor(RngStream& stream, const Vector& mean, const Matrix& factor) {
    const Vector z = stream.standard_normal(mean.size());
    return mean + factor * z;
}

} // namespace bilq
