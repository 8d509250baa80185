#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "diffuse/panel.hpp"

namespace diffuse {

// Thin SVD of the rescaled panel Z = X / sqrt(N*T), m = min(T, N):
//   X = scale * u * d.asDiagonal() * v'  with  scale = sqrt(N*T).
// u (T x m) and v (N x m) have orthonormal columns, d is nonincreasing and
// nonnegative. Sign convention: in each column of v the entry of largest
// absolute value is nonnegative (u follows), so the decomposition is a pure
// function of X.
struct ScaledSvd {
    Eigen::MatrixXd u;
    Eigen::VectorXd d;
    Eigen::MatrixXd v;
    double scale = 1.0;

    Eigen::Index rank_dim() const { return d.size(); }
};

ScaledSvd scaled_svd(const Panel& x);
ScaledSvd scaled_svd(const Eigen::MatrixXd& x);

enum class ShrinkageMethod { Pca, Ridge, RandomProjection };

// Per-direction weights applied to the empirical spectrum by a forecast
// method; PCA keeps the top r directions entirely (hard thresholding), ridge
// and random projections downweight all of them (soft thresholding).
struct ShrinkageProfile {
    Eigen::VectorXd weights;
    ShrinkageMethod method;
};

// Indicator weights: 1 for the first r directions, 0 after. 1 <= r <= m.
ShrinkageProfile pca_shrinkage(const ScaledSvd& svd, int r);

// Soft-threshold weights w_i = d_i^2 / (d_i^2 + 1/k) for penalty scale k > 0;
// equals the diagonal of U' X (X'X + (NT/k) I)^{-1} X' U.
ShrinkageProfile ridge_shrinkage(const ScaledSvd& svd, double k);

// Monte Carlo estimate of E_R[R (R' D^2 R)^{-1} R'] over standard Gaussian
// l x k draws of R, where D^2 = diag(d_squared). Entries of d_squared may be
// zero as long as at least k are positive. Draws with a numerically singular
// R'D^2R are regenerated (at most 100 retries per draw) and counted.
struct RpProjectorMoments {
    Eigen::MatrixXd mean; // l x l
    Eigen::MatrixXd se;   // l x l, MC standard error per entry
    int singular_retries = 0;
};

RpProjectorMoments rp_projector_moments(const Eigen::VectorXd& d_squared, int k,
                                        int draws, std::uint64_t seed);

// Monte Carlo estimate of the random-projection weights
//   w_i = e_i' D E_R[R (R'D^2R)^{-1} R'] D e_i,
// with per-weight standard errors. Requires 1 <= k <= m and draws >= 100;
// the analytic bounds of rp_weight_bounds apply when k <= m - 3.
struct RpShrinkage {
    Eigen::VectorXd weights;
    Eigen::VectorXd se;
    int singular_retries = 0;
};

RpShrinkage rp_shrinkage_mc(const ScaledSvd& svd, int k, int draws,
                            std::uint64_t seed);

// Analytic bounds on the random-projection weight for direction i (0-based),
// in terms of the squared singular values d_squared (nonincreasing, positive
// through the last index):
//   lower = 1 - 1 / (1 + (k-2) d_i / sum_{j != i} d_j)
//   upper = 1 - 1 / (1 + (d_i/d_m) k / (m-k-2))
// Requires k <= m - 2; at k = m - 2 the upper bound degenerates to 1.
struct RpWeightBounds {
    double lower;
    double upper;
};

RpWeightBounds rp_weight_bounds(const Eigen::VectorXd& d_squared, int k, int i);

// Monte Carlo check that E_R[R (R'D^2R)^{-1} R'] is diagonal: returns the
// off-diagonal entry of largest absolute mean together with its standard
// error, plus the full moment matrices.
struct OffDiagonalCheck {
    double max_abs = 0.0;
    double se_at_max = 0.0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    RpProjectorMoments moments;
};

OffDiagonalCheck offdiag_nullity_check(const ScaledSvd& svd, int k, int draws,
                                       std::uint64_t seed);

// Builds a T x N panel whose scaled SVD has exactly the given singular values
// d (length min(T, N), nonincreasing, nonnegative): X = sqrt(NT) U D V' with
// U, V drawn as orthonormal bases of seeded Gaussian matrices.
Panel panel_from_spectrum(int t_rows, int n_cols, const Eigen::VectorXd& d,
                          std::uint64_t seed);

} // namespace diffuse
