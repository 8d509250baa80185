#include "diffuse/rng.hpp"

#include <cmath>
#include <numbers>

namespace diffuse {

namespace {

// splitmix64; the standard 64-bit mixing finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t RngStream::derive_key(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream * 0xd1342543de82ef95ULL + 1));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : gen_(derive_key(seed, stream)) {}

double RngStream::uniform() {
    // 53-bit mantissa in (0, 1]: (x >> 11) in [0, 2^53), shifted up by 1.
    const std::uint64_t bits = gen_() >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
}

double RngStream::gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
}

Eigen::MatrixXd RngStream::gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            out(i, j) = gaussian();
    return out;
}

Eigen::VectorXd RngStream::gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out(i) = gaussian();
    return out;
}

} // namespace diffuse
