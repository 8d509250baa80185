#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace diffuse {

// One-shot forecasting problem: training panel x (rows = time), aligned
// targets y (already shifted by the horizon), and the predictor vector x_new
// at the forecast origin.
struct TrainingSet {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    int horizon = 1;
    Eigen::VectorXd x_new;
};

void validate_training_set(const TrainingSet& ts);

struct PcaSpec {
    int r = 1;
};
struct RidgeSpec {
    double k = 1.0;
};
struct RpSpec {
    int k = 1;
    int draws = 100;
    std::uint64_t seed = 0;
};
using ForecastMethod = std::variant<PcaSpec, RidgeSpec, RpSpec>;

// Regression of y on r principal-component factors of the scaled panel,
// mapped to the origin through the right singular vectors. Throws
// NumericError when d_r falls below 1e-12 * d_1.
double pca_forecast(const TrainingSet& ts, int r);

// x_new' (X'X + (NT/k) I_N)^{-1} X' y. The primal form solves an N x N
// system, the dual form a T x T system; the two agree identically and
// ridge_forecast picks the smaller one.
double ridge_forecast(const TrainingSet& ts, double k);
double ridge_forecast_primal(const TrainingSet& ts, double k);
double ridge_forecast_dual(const TrainingSet& ts, double k);

// Least squares on the compressed design X * proj; throws NumericError when
// X * proj is rank deficient.
double rp_forecast_single(const TrainingSet& ts, const Eigen::MatrixXd& proj);

// Average of rp_forecast_single over `draws` independent standard Gaussian
// N x k projections; draw d uses the stream (seed, d) and rank-deficient
// draws are regenerated from the same stream (bounded retries), so the
// result depends only on (ts, k, draws, seed).
struct RpForecast {
    double value = 0.0;
    int singular_retries = 0;
};
RpForecast rp_forecast(const TrainingSet& ts, int k, int draws,
                       std::uint64_t seed);

// Forecast with an always-included, never-penalized regressor block w
// alongside the compressed/penalized x block. w may have zero columns, in
// which case this reduces exactly to the plain forecasts above.
double partialled_forecast(const Eigen::MatrixXd& w,
                           const Eigen::VectorXd& w_new, const TrainingSet& ts,
                           const ForecastMethod& method);

// Batched evaluation over hyperparameter grids, sharing one SVD per method
// family and one projection draw per RP grid sweep (grid point k uses the
// leading k columns of a common N x max(k) draw). Infeasible grid points
// (rank or degrees-of-freedom limits) come back as NaN.
struct GridSpec {
    std::vector<int> pca_r;
    std::vector<double> ridge_k;
    std::vector<int> rp_k;
    int rp_draws = 0;
    std::uint64_t rp_seed = 0;
};

struct GridForecasts {
    std::vector<double> pca;
    std::vector<double> ridge;
    std::vector<double> rp;
    int rp_singular_retries = 0;
};

GridForecasts forecast_over_grids(const Eigen::MatrixXd& w,
                                  const Eigen::VectorXd& w_new,
                                  const TrainingSet& ts, const GridSpec& grids);

} // namespace diffuse
