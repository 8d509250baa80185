#include "diffuse/forecast.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "diffuse/errors.hpp"
#include "diffuse/rng.hpp"
#include "diffuse/spectra.hpp"

namespace diffuse {

namespace {

constexpr double kRankTol = 1e-12; // relative cutoff guarding D_r^{-1}
constexpr double kQrDiagTol = 1e-10;
constexpr int kMaxDrawRetries = 100;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double penalty_lambda(const TrainingSet& ts, double k) {
    if (!(k > 0.0))
        throw ConfigError("ridge scale k must be positive");
    return static_cast<double>(ts.x.rows()) *
           static_cast<double>(ts.x.cols()) / k;
}

// Largest leading block of an unpivoted QR factor that is numerically
// invertible: columns are usable through the first diagonal entry that falls
// below kQrDiagTol times the largest one.
Eigen::Index usable_columns(const Eigen::MatrixXd& qr_matrix,
                            Eigen::Index ncols) {
    double max_diag = 0.0;
    for (Eigen::Index j = 0; j < ncols; ++j)
        max_diag = std::max(max_diag, std::abs(qr_matrix(j, j)));
    if (max_diag == 0.0)
        return 0;
    for (Eigen::Index j = 0; j < ncols; ++j)
        if (std::abs(qr_matrix(j, j)) <= kQrDiagTol * max_diag)
            return j;
    return ncols;
}

struct WBlock {
    Eigen::Index n_w = 0;
    Eigen::MatrixXd q;  // T x n_w, thin orthonormal basis of col(W)
    Eigen::MatrixXd r;  // n_w x n_w upper triangular, W = q * r
};

WBlock factor_w(const Eigen::MatrixXd& w, const Eigen::VectorXd& w_new,
                Eigen::Index t_rows) {
    WBlock out;
    out.n_w = w.cols();
    if (out.n_w == 0)
        return out;
    if (w.rows() != t_rows)
        throw DataError("w block row count does not match the panel");
    if (w_new.size() != out.n_w)
        throw DataError("w_new length does not match the w block");
    if (!w.allFinite() || !w_new.allFinite())
        throw DataError("w block contains non-finite entries");
    if (w.rows() < w.cols())
        throw DataError("w block has more columns than rows");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    if (usable_columns(qr.matrixQR(), out.n_w) < out.n_w)
        throw DataError("w block is rank deficient");
    out.q = qr.householderQ() * Eigen::MatrixXd::Identity(t_rows, out.n_w);
    out.r = qr.matrixQR()
                .topLeftCorner(out.n_w, out.n_w)
                .triangularView<Eigen::Upper>();
    return out;
}

} // namespace

void validate_training_set(const TrainingSet& ts) {
    if (ts.x.rows() < 2 || ts.x.cols() < 1)
        throw DataError("training panel too small");
    if (ts.y.size() != ts.x.rows())
        throw DataError("target length " + std::to_string(ts.y.size()) +
                        " does not match panel rows " +
                        std::to_string(ts.x.rows()));
    if (ts.x_new.size() != ts.x.cols())
        throw DataError("x_new length does not match panel columns");
    if (ts.horizon < 1)
        throw DataError("horizon must be at least 1");
    if (!ts.x.allFinite() || !ts.y.allFinite() || !ts.x_new.allFinite())
        throw DataError("training set contains non-finite values");
}

double pca_forecast(const TrainingSet& ts, int r) {
    validate_training_set(ts);
    const ScaledSvd svd = scaled_svd(ts.x);
    const Eigen::Index m = svd.rank_dim();
    if (r < 1 || r > m)
        throw ConfigError("factor count r = " + std::to_string(r) +
                          " out of range [1, " + std::to_string(m) + "]");
    if (svd.d(r - 1) < kRankTol * svd.d(0))
        throw NumericError("singular value " + std::to_string(r) +
                           " is below the numerical rank threshold");
    // y_hat = sum_{i<r} (v_i'x_new)(u_i'y) / (scale * d_i); the scale cancels
    // the 1/sqrt(NT) applied to the panel.
    double acc = 0.0;
    for (int i = 0; i < r; ++i) {
        acc += svd.v.col(i).dot(ts.x_new) * svd.u.col(i).dot(ts.y) /
               (svd.scale * svd.d(i));
    }
    return acc;
}

double ridge_forecast_primal(const TrainingSet& ts, double k) {
    validate_training_set(ts);
    const double lambda = penalty_lambda(ts, k);
    const Eigen::Index n = ts.x.cols();
    Eigen::MatrixXd gram = ts.x.transpose() * ts.x;
    gram.diagonal().array() += lambda;
    const Eigen::VectorXd beta =
        Eigen::LLT<Eigen::MatrixXd>(gram).solve(ts.x.transpose() * ts.y);
    if (!beta.allFinite())
        throw NumericError("primal ridge solve failed, n = " +
                           std::to_string(n));
    return ts.x_new.dot(beta);
}

double ridge_forecast_dual(const TrainingSet& ts, double k) {
    validate_training_set(ts);
    const double lambda = penalty_lambda(ts, k);
    Eigen::MatrixXd gram = ts.x * ts.x.transpose();
    gram.diagonal().array() += lambda;
    const Eigen::VectorXd alpha = Eigen::LLT<Eigen::MatrixXd>(gram).solve(ts.y);
    if (!alpha.allFinite())
        throw NumericError("dual ridge solve failed");
    return ts.x_new.dot(ts.x.transpose() * alpha);
}

double ridge_forecast(const TrainingSet& ts, double k) {
    return ts.x.cols() <= ts.x.rows() ? ridge_forecast_primal(ts, k)
                                      : ridge_forecast_dual(ts, k);
}

double rp_forecast_single(const TrainingSet& ts, const Eigen::MatrixXd& proj) {
    validate_training_set(ts);
    if (proj.rows() != ts.x.cols())
        throw DataError("projection row count does not match panel columns");
    const Eigen::Index k = proj.cols();
    if (k < 1 || k > ts.x.rows())
        throw DataError("projection dimension out of range");
    const Eigen::MatrixXd g = ts.x * proj;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
    qr.setThreshold(kQrDiagTol);
    if (qr.rank() < k)
        throw NumericError("projected design X*R is rank deficient");
    const Eigen::VectorXd theta = qr.solve(ts.y);
    return (proj.transpose() * ts.x_new).dot(theta);
}

RpForecast rp_forecast(const TrainingSet& ts, int k, int draws,
                       std::uint64_t seed) {
    validate_training_set(ts);
    if (k < 1 || k > ts.x.cols())
        throw ConfigError("projection dimension k = " + std::to_string(k) +
                          " out of range [1, " + std::to_string(ts.x.cols()) +
                          "]");
    if (draws < 1)
        throw ConfigError("draws must be positive");
    RpForecast out;
    double sum = 0.0;
    for (int d = 0; d < draws; ++d) {
        RngStream rng(seed, static_cast<std::uint64_t>(d));
        bool ok = false;
        for (int attempt = 0; attempt <= kMaxDrawRetries; ++attempt) {
            const Eigen::MatrixXd proj = rng.gaussian_matrix(ts.x.cols(), k);
            try {
                sum += rp_forecast_single(ts, proj);
            } catch (const NumericError&) {
                ++out.singular_retries;
                continue;
            }
            ok = true;
            break;
        }
        if (!ok)
            throw NumericError("projection retry budget exhausted at draw " +
                               std::to_string(d) +
                               "; panel rank is below k = " +
                               std::to_string(k));
    }
    out.value = sum / draws;
    return out;
}

GridForecasts forecast_over_grids(const Eigen::MatrixXd& w,
                                  const Eigen::VectorXd& w_new,
                                  const TrainingSet& ts,
                                  const GridSpec& grids) {
    validate_training_set(ts);
    const Eigen::Index t_rows = ts.x.rows();
    const Eigen::Index n_cols = ts.x.cols();
    const WBlock wb = factor_w(w, w_new, t_rows);
    const Eigen::Index n_w = wb.n_w;

    GridForecasts out;
    out.pca.assign(grids.pca_r.size(), kNaN);
    out.ridge.assign(grids.ridge_k.size(), kNaN);
    out.rp.assign(grids.rp_k.size(), kNaN);

    // --- PCA: joint least squares of y on [W, F_r] via one unpivoted QR ---
    if (!grids.pca_r.empty()) {
        const ScaledSvd svd = scaled_svd(ts.x);
        const Eigen::Index m = svd.rank_dim();
        int r_top = 0;
        for (int r : grids.pca_r) {
            if (r < 1)
                throw ConfigError("factor counts must be positive");
            r_top = std::max(r_top, r);
        }
        // Feasibility: spectrum above the rank threshold and enough rows for
        // the joint regression.
        Eigen::Index r_feas = 0;
        while (r_feas < std::min<Eigen::Index>(r_top, m) &&
               svd.d(r_feas) >= kRankTol * svd.d(0) &&
               n_w + r_feas + 1 <= t_rows)
            ++r_feas;
        if (r_feas > 0) {
            Eigen::MatrixXd design(t_rows, n_w + r_feas);
            if (n_w > 0)
                design.leftCols(n_w) = w;
            design.rightCols(r_feas) =
                std::sqrt(static_cast<double>(t_rows)) * svd.u.leftCols(r_feas);
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
            const Eigen::Index usable = usable_columns(qr.matrixQR(), n_w + r_feas);
            const Eigen::VectorXd qty =
                (qr.householderQ().transpose() * ts.y).head(n_w + r_feas);
            // Factor value at the origin: f_i = v_i'x_new / (sqrt(N) d_i).
            Eigen::VectorXd f_new(r_feas);
            for (Eigen::Index i = 0; i < r_feas; ++i)
                f_new(i) = svd.v.col(i).dot(ts.x_new) /
                           (std::sqrt(static_cast<double>(n_cols)) * svd.d(i));
            for (std::size_t gi = 0; gi < grids.pca_r.size(); ++gi) {
                const Eigen::Index p = n_w + grids.pca_r[gi];
                if (grids.pca_r[gi] > r_feas || p > usable)
                    continue;
                const Eigen::VectorXd beta =
                    qr.matrixQR()
                        .topLeftCorner(p, p)
                        .triangularView<Eigen::Upper>()
                        .solve(qty.head(p));
                double pred = n_w > 0 ? w_new.dot(beta.head(n_w)) : 0.0;
                pred += f_new.head(grids.pca_r[gi]).dot(beta.tail(grids.pca_r[gi]));
                out.pca[gi] = pred;
            }
        }
    }

    // --- Ridge: spectral path on the W-partialled panel ---
    if (!grids.ridge_k.empty()) {
        Eigen::MatrixXd x_part = ts.x;
        Eigen::VectorXd y_part = ts.y;
        Eigen::VectorXd qty_w;
        Eigen::MatrixXd c_w; // Qw' X V~, for recovering the w coefficients
        if (n_w > 0) {
            x_part.noalias() -= wb.q * (wb.q.transpose() * ts.x);
            qty_w = wb.q.transpose() * ts.y;
            y_part.noalias() -= wb.q * qty_w;
        }
        const ScaledSvd svd = scaled_svd(x_part);
        const Eigen::VectorXd s = svd.scale * svd.d; // raw singular values
        const Eigen::VectorXd a = svd.u.transpose() * y_part;
        const Eigen::VectorXd b = svd.v.transpose() * ts.x_new;
        if (n_w > 0)
            c_w = wb.q.transpose() * ts.x * svd.v;
        for (std::size_t gi = 0; gi < grids.ridge_k.size(); ++gi) {
            const double lambda = penalty_lambda(ts, grids.ridge_k[gi]);
            const Eigen::ArrayXd shrink =
                s.array() / (s.array().square() + lambda);
            const Eigen::VectorXd g = (shrink * a.array()).matrix();
            double pred = b.dot(g);
            if (n_w > 0) {
                const Eigen::VectorXd beta_w =
                    wb.r.triangularView<Eigen::Upper>().solve(qty_w - c_w * g);
                pred += w_new.dot(beta_w);
            }
            out.ridge[gi] = pred;
        }
    }

    // --- RP: averaged least squares on [W, X R_k], nested in k ---
    if (!grids.rp_k.empty()) {
        if (grids.rp_draws < 1)
            throw ConfigError("rp draws must be positive");
        int k_top = 0;
        for (int k : grids.rp_k) {
            if (k < 1)
                throw ConfigError("projection dimensions must be positive");
            k_top = std::max(k_top, k);
        }
        const Eigen::Index k_feas = std::min<Eigen::Index>(
            k_top, std::min(n_cols, t_rows - n_w - 1));
        if (k_feas >= 1) {
            std::vector<double> sums(grids.rp_k.size(), 0.0);
            Eigen::MatrixXd design(t_rows, n_w + k_feas);
            if (n_w > 0)
                design.leftCols(n_w) = w;
            for (int d = 0; d < grids.rp_draws; ++d) {
                RngStream rng(grids.rp_seed, static_cast<std::uint64_t>(d));
                bool ok = false;
                for (int attempt = 0; attempt <= kMaxDrawRetries; ++attempt) {
                    const Eigen::MatrixXd proj =
                        rng.gaussian_matrix(n_cols, k_feas);
                    design.rightCols(k_feas).noalias() = ts.x * proj;
                    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
                    if (usable_columns(qr.matrixQR(), n_w + k_feas) <
                        n_w + k_feas) {
                        ++out.rp_singular_retries;
                        continue;
                    }
                    const Eigen::VectorXd qty =
                        (qr.householderQ().transpose() * ts.y)
                            .head(n_w + k_feas);
                    const Eigen::VectorXd g_new = proj.transpose() * ts.x_new;
                    for (std::size_t gi = 0; gi < grids.rp_k.size(); ++gi) {
                        const int k = grids.rp_k[gi];
                        if (k > k_feas)
                            continue;
                        const Eigen::Index p = n_w + k;
                        const Eigen::VectorXd beta =
                            qr.matrixQR()
                                .topLeftCorner(p, p)
                                .triangularView<Eigen::Upper>()
                                .solve(qty.head(p));
                        double pred =
                            n_w > 0 ? w_new.dot(beta.head(n_w)) : 0.0;
                        pred += g_new.head(k).dot(beta.tail(k));
                        sums[gi] += pred;
                    }
                    ok = true;
                    break;
                }
                if (!ok)
                    throw NumericError(
                        "projection retry budget exhausted at draw " +
                        std::to_string(d));
            }
            for (std::size_t gi = 0; gi < grids.rp_k.size(); ++gi)
                if (grids.rp_k[gi] <= k_feas)
                    out.rp[gi] = sums[gi] / grids.rp_draws;
        }
    }

    return out;
}

double partialled_forecast(const Eigen::MatrixXd& w,
                           const Eigen::VectorXd& w_new, const TrainingSet& ts,
                           const ForecastMethod& method) {
    GridSpec grids;
    if (const auto* pca = std::get_if<PcaSpec>(&method)) {
        grids.pca_r = {pca->r};
    } else if (const auto* ridge = std::get_if<RidgeSpec>(&method)) {
        grids.ridge_k = {ridge->k};
    } else {
        const auto& rp = std::get<RpSpec>(method);
        grids.rp_k = {rp.k};
        grids.rp_draws = rp.draws;
        grids.rp_seed = rp.seed;
    }
    const GridForecasts result = forecast_over_grids(w, w_new, ts, grids);
    double value = kNaN;
    if (!result.pca.empty())
        value = result.pca[0];
    else if (!result.ridge.empty())
        value = result.ridge[0];
    else
        value = result.rp[0];
    if (std::isnan(value))
        throw NumericError("forecast infeasible for the requested method on "
                           "this window (rank or degrees of freedom)");
    return value;
}

} // namespace diffuse
