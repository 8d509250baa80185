#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace diffuse {

// Deterministic random stream keyed by (seed, stream). Streams with distinct
// keys are statistically independent; the sequence produced by a given key is
// identical across runs and thread schedules, which is what every Monte Carlo
// component here relies on for bitwise reproducibility.
//
// Gaussian variates come from an explicit Box-Muller transform on 53-bit
// uniforms rather than std::normal_distribution, whose output is
// implementation-defined.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream);

    // Uniform on (0, 1]; never returns 0 so log() is always safe.
    double uniform();

    // Standard normal.
    double gaussian();

    // Matrix/vector of independent standard normals, filled column by column.
    Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols);
    Eigen::VectorXd gaussian_vector(Eigen::Index n);

    // Derive a fresh 64-bit key from (seed, stream) without constructing a
    // stream; used to build nested keys such as (master, rep) -> (key, draw).
    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream);

private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace diffuse
