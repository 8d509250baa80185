#include "diffuse/spectra.hpp"

#include <cmath>
#include <string>

#include "diffuse/errors.hpp"
#include "diffuse/rng.hpp"

namespace diffuse {

namespace {

constexpr int kMaxSingularRetries = 100;

void apply_sign_convention(Eigen::MatrixXd& u, Eigen::MatrixXd& v) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index pivot = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            const double a = std::abs(v(i, j));
            if (a > best) {
                best = a;
                pivot = i;
            }
        }
        if (v(pivot, j) < 0.0) {
            v.col(j) = -v.col(j);
            u.col(j) = -u.col(j);
        }
    }
}

// One Monte Carlo draw of R (R'D^2R)^{-1} R', written into `out`.
// Returns the number of regenerations it took; throws NumericError once the
// retry budget is exhausted.
int projector_draw(const Eigen::VectorXd& d_squared, int k, RngStream& rng,
                   Eigen::MatrixXd& out) {
    const Eigen::Index l = d_squared.size();
    for (int attempt = 0; attempt <= kMaxSingularRetries; ++attempt) {
        const Eigen::MatrixXd r = rng.gaussian_matrix(l, k);
        const Eigen::MatrixXd m =
            r.transpose() * d_squared.asDiagonal() * r; // k x k
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() != Eigen::Success)
            continue;
        const Eigen::MatrixXd solved = llt.solve(r.transpose()); // k x l
        out.noalias() = r * solved;
        if (!out.allFinite())
            continue;
        return attempt;
    }
    throw NumericError(
        "R'D^2R singular after " + std::to_string(kMaxSingularRetries) +
        " regenerations; spectrum is too degenerate for k = " +
        std::to_string(k));
}

RpProjectorMoments projector_moments_impl(const Eigen::VectorXd& d_squared,
                                          int k, int draws,
                                          std::uint64_t seed) {
    const Eigen::Index l = d_squared.size();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(l, l);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(l, l);
    Eigen::MatrixXd draw(l, l);
    int retries = 0;
    for (int i = 0; i < draws; ++i) {
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        retries += projector_draw(d_squared, k, rng, draw);
        sum += draw;
        sum_sq += draw.cwiseProduct(draw);
    }
    RpProjectorMoments out;
    out.mean = sum / draws;
    // Per-entry standard error of the mean from the per-draw sample variance.
    Eigen::MatrixXd var =
        (sum_sq - sum.cwiseProduct(sum) / draws) / std::max(1, draws - 1);
    out.se = (var.cwiseMax(0.0) / draws).cwiseSqrt();
    out.singular_retries = retries;
    return out;
}

void check_rp_args(Eigen::Index m, int k, int draws) {
    if (k < 1 || k > m)
        throw ConfigError("projection dimension k = " + std::to_string(k) +
                          " out of range [1, " + std::to_string(m) + "]");
    if (draws < 100)
        throw ConfigError("need at least 100 draws, got " +
                          std::to_string(draws));
}

} // namespace

ScaledSvd scaled_svd(const Panel& x) {
    validate_panel(x);
    return scaled_svd(x.values);
}

ScaledSvd scaled_svd(const Eigen::MatrixXd& x) {
    if (x.rows() < 2 || x.cols() < 1)
        throw DataError("matrix too small for scaled SVD");
    if (!x.allFinite())
        throw DataError("matrix contains non-finite entries");

    const double scale =
        std::sqrt(static_cast<double>(x.rows()) * static_cast<double>(x.cols()));
    const Eigen::MatrixXd z = x / scale;

    ScaledSvd out;
    out.scale = scale;
    // Jacobi is more accurate on small problems; BDC is much faster on the
    // panel sizes the simulations use.
    if (z.rows() <= 32 && z.cols() <= 32) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            z, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success)
            throw NumericError("SVD did not converge");
        out.u = svd.matrixU();
        out.d = svd.singularValues();
        out.v = svd.matrixV();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(
            z, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success)
            throw NumericError("SVD did not converge");
        out.u = svd.matrixU();
        out.d = svd.singularValues();
        out.v = svd.matrixV();
    }
    apply_sign_convention(out.u, out.v);
    return out;
}

ShrinkageProfile pca_shrinkage(const ScaledSvd& svd, int r) {
    const Eigen::Index m = svd.rank_dim();
    if (r < 1 || r > m)
        throw ConfigError("factor count r = " + std::to_string(r) +
                          " out of range [1, " + std::to_string(m) + "]");
    ShrinkageProfile out;
    out.method = ShrinkageMethod::Pca;
    out.weights = Eigen::VectorXd::Zero(m);
    out.weights.head(r).setOnes();
    return out;
}

ShrinkageProfile ridge_shrinkage(const ScaledSvd& svd, double k) {
    if (!(k > 0.0))
        throw ConfigError("ridge scale k must be positive");
    ShrinkageProfile out;
    out.method = ShrinkageMethod::Ridge;
    const Eigen::ArrayXd d2 = svd.d.array().square();
    out.weights = (d2 / (d2 + 1.0 / k)).matrix();
    return out;
}

RpProjectorMoments rp_projector_moments(const Eigen::VectorXd& d_squared,
                                        int k, int draws, std::uint64_t seed) {
    const Eigen::Index l = d_squared.size();
    if (l < 1)
        throw ConfigError("empty spectrum");
    if ((d_squared.array() < 0.0).any())
        throw ConfigError("squared singular values must be nonnegative");
    const Eigen::Index positive = (d_squared.array() > 0.0).count();
    if (k < 1 || k > positive)
        throw ConfigError("projection dimension k = " + std::to_string(k) +
                          " exceeds the number of positive spectrum entries (" +
                          std::to_string(positive) + ")");
    if (draws < 1)
        throw ConfigError("draws must be positive");
    return projector_moments_impl(d_squared, k, draws, seed);
}

RpShrinkage rp_shrinkage_mc(const ScaledSvd& svd, int k, int draws,
                            std::uint64_t seed) {
    const Eigen::Index m = svd.rank_dim();
    check_rp_args(m, k, draws);
    const Eigen::VectorXd d2 = svd.d.array().square().matrix();
    const RpProjectorMoments moments = projector_moments_impl(d2, k, draws, seed);
    RpShrinkage out;
    out.weights = d2.asDiagonal() * moments.mean.diagonal();
    out.se = d2.asDiagonal() * moments.se.diagonal();
    out.singular_retries = moments.singular_retries;
    return out;
}

RpWeightBounds rp_weight_bounds(const Eigen::VectorXd& d_squared, int k, int i) {
    const Eigen::Index m = d_squared.size();
    if (i < 0 || i >= m)
        throw ConfigError("weight index out of range");
    if ((d_squared.array() <= 0.0).any())
        throw ConfigError("bounds require a strictly positive spectrum");
    for (Eigen::Index j = 0; j + 1 < m; ++j)
        if (d_squared(j) < d_squared(j + 1))
            throw ConfigError("spectrum must be nonincreasing");
    if (k < 1 || k > m - 2)
        throw ConfigError("bounds require 1 <= k <= m - 2, got k = " +
                          std::to_string(k) + " with m = " + std::to_string(m));

    const double d_i = d_squared(i);
    const double d_min = d_squared(m - 1);
    const double rest = d_squared.sum() - d_i;

    RpWeightBounds out;
    out.lower = 1.0 - 1.0 / (1.0 + (k - 2) * d_i / rest);
    if (k == m - 2) {
        out.upper = 1.0; // limit of the bound as m - k - 2 -> 0
    } else {
        out.upper = 1.0 - 1.0 / (1.0 + (d_i / d_min) * k / (m - k - 2));
    }
    return out;
}

Panel panel_from_spectrum(int t_rows, int n_cols, const Eigen::VectorXd& d,
                          std::uint64_t seed) {
    const Eigen::Index m = std::min(t_rows, n_cols);
    if (t_rows < 2 || n_cols < 1)
        throw ConfigError("panel dimensions too small");
    if (d.size() != m)
        throw ConfigError("need min(T, N) = " + std::to_string(m) +
                          " singular values, got " + std::to_string(d.size()));
    for (Eigen::Index i = 0; i < m; ++i) {
        if (d(i) < 0.0)
            throw ConfigError("singular values must be nonnegative");
        if (i + 1 < m && d(i) < d(i + 1))
            throw ConfigError("singular values must be nonincreasing");
    }
    RngStream rng(seed, 0);
    const Eigen::MatrixXd gu = rng.gaussian_matrix(t_rows, m);
    const Eigen::MatrixXd gv = rng.gaussian_matrix(n_cols, m);
    const Eigen::MatrixXd qu =
        Eigen::HouseholderQR<Eigen::MatrixXd>(gu).householderQ() *
        Eigen::MatrixXd::Identity(t_rows, m);
    const Eigen::MatrixXd qv =
        Eigen::HouseholderQR<Eigen::MatrixXd>(gv).householderQ() *
        Eigen::MatrixXd::Identity(n_cols, m);
    const double scale = std::sqrt(static_cast<double>(t_rows) *
                                   static_cast<double>(n_cols));
    Panel out;
    out.values = scale * qu * d.asDiagonal() * qv.transpose();
    return out;
}

OffDiagonalCheck offdiag_nullity_check(const ScaledSvd& svd, int k, int draws,
                                       std::uint64_t seed) {
    const Eigen::Index m = svd.rank_dim();
    check_rp_args(m, k, draws);
    const Eigen::VectorXd d2 = svd.d.array().square().matrix();
    OffDiagonalCheck out;
    out.moments = projector_moments_impl(d2, k, draws, seed);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j)
                continue;
            const double a = std::abs(out.moments.mean(i, j));
            if (a > out.max_abs) {
                out.max_abs = a;
                out.se_at_max = out.moments.se(i, j);
                out.row = i;
                out.col = j;
            }
        }
    }
    return out;
}

} // namespace diffuse
