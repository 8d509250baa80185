#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "diffuse/errors.hpp"
#include "diffuse/rng.hpp"
#include "diffuse/spectra.hpp"

using namespace diffuse;

namespace {

// Closed-form eigenvalues of a symmetric 2x2 matrix, descending.
std::pair<double, double> sym2x2_eigenvalues(const Eigen::Matrix2d& s) {
    const double tr = s(0, 0) + s(1, 1);
    const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    return {tr / 2.0 + disc, tr / 2.0 - disc};
}

// Quadrature oracle for the m = 2, k = 1 random-projection weight
//   w1 = E[d1^2 r1^2 / (d1^2 r1^2 + d2^2 r2^2)], r1, r2 iid N(0,1).
// The ratio r2^2/r1^2 is F(1,1); substituting t = tan^2(theta) turns the
// integral into (2/pi) * int_0^{pi/2} cos^2 / (cos^2 + c sin^2) dtheta with
// c = d2^2/d1^2, integrated here with composite Simpson.
double rp_weight_two_by_two_quadrature(double d1, double d2) {
    const double c = (d2 * d2) / (d1 * d1);
    const int n = 20000; // even
    const double h = (std::numbers::pi / 2.0) / n;
    auto f = [c](double theta) {
        const double co = std::cos(theta), si = std::sin(theta);
        return co * co / (co * co + c * si * si);
    };
    double acc = f(0.0) + f(std::numbers::pi / 2.0);
    for (int i = 1; i < n; ++i)
        acc += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return (2.0 / std::numbers::pi) * acc * h / 3.0;
}

double reconstruction_gap(const Eigen::MatrixXd& x, const ScaledSvd& svd) {
    const Eigen::MatrixXd z = x / svd.scale;
    const Eigen::MatrixXd rebuilt = svd.u * svd.d.asDiagonal() * svd.v.transpose();
    const double denom = z.norm();
    return denom == 0.0 ? (rebuilt - z).norm() : (rebuilt - z).norm() / denom;
}

void check_orthonormal(const Eigen::MatrixXd& q) {
    const Eigen::MatrixXd gram = q.transpose() * q;
    CHECK((gram - Eigen::MatrixXd::Identity(q.cols(), q.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

} // namespace

TEST_CASE("scaled_svd: zero matrix") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 3);
    const ScaledSvd svd = scaled_svd(x);
    CHECK(svd.d.size() == 3);
    CHECK(svd.d.cwiseAbs().maxCoeff() == 0.0);
    check_orthonormal(svd.u);
    check_orthonormal(svd.v);
    CHECK(reconstruction_gap(x, svd) < 1e-10);
}

TEST_CASE("scaled_svd: identity scaling") {
    const Eigen::MatrixXd x = std::sqrt(4.0) * Eigen::MatrixXd::Identity(2, 2);
    const ScaledSvd svd = scaled_svd(x);
    CHECK(svd.d(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(svd.d(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scaled_svd: 3x2 against direct eigensolve of Z'Z") {
    Eigen::MatrixXd x(3, 2);
    x << 2, 0, 0, 1, 0, 0;
    x *= std::sqrt(6.0);
    const ScaledSvd svd = scaled_svd(x);

    const Eigen::MatrixXd z = x / std::sqrt(6.0);
    const Eigen::Matrix2d ztz = (z.transpose() * z);
    const auto [lam1, lam2] = sym2x2_eigenvalues(ztz);
    CHECK(svd.d(0) == doctest::Approx(std::sqrt(lam1)).epsilon(1e-12));
    CHECK(svd.d(1) == doctest::Approx(std::sqrt(lam2)).epsilon(1e-12));
    CHECK(svd.d(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(svd.d(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scaled_svd: invariants on random panels") {
    for (int trial = 0; trial < 20; ++trial) {
        RngStream rng(1234, trial);
        const int t = 3 + static_cast<int>(rng.uniform() * 40);
        const int n = 1 + static_cast<int>(rng.uniform() * 40);
        const Eigen::MatrixXd x = rng.gaussian_matrix(t, n);
        const ScaledSvd svd = scaled_svd(x);

        check_orthonormal(svd.u);
        check_orthonormal(svd.v);
        CHECK(reconstruction_gap(x, svd) < 1e-10);
        for (Eigen::Index i = 0; i + 1 < svd.d.size(); ++i)
            CHECK(svd.d(i) >= svd.d(i + 1));
        CHECK(svd.d.minCoeff() >= 0.0);
        // sign convention: largest-|entry| of each v column is nonnegative
        for (Eigen::Index j = 0; j < svd.v.cols(); ++j) {
            Eigen::Index arg = 0;
            svd.v.col(j).cwiseAbs().maxCoeff(&arg);
            CHECK(svd.v(arg, j) >= 0.0);
        }
        // deterministic
        const ScaledSvd svd2 = scaled_svd(x);
        CHECK((svd.u - svd2.u).cwiseAbs().maxCoeff() == 0.0);
        CHECK((svd.v - svd2.v).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("scaled_svd: rejects non-finite input") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
    x(1, 1) = std::nan("");
    CHECK_THROWS_AS(scaled_svd(x), DataError);
}

TEST_CASE("pca_shrinkage: indicator weights") {
    const Panel panel = panel_from_spectrum(
        8, 5, (Eigen::VectorXd(5) << 5, 4, 3, 2, 1).finished(), 7);
    const ScaledSvd svd = scaled_svd(panel);

    const ShrinkageProfile p2 = pca_shrinkage(svd, 2);
    Eigen::VectorXd expect(5);
    expect << 1, 1, 0, 0, 0;
    CHECK((p2.weights - expect).cwiseAbs().maxCoeff() == 0.0);

    CHECK(pca_shrinkage(svd, 5).weights.minCoeff() == 1.0);
    CHECK_THROWS_AS(pca_shrinkage(svd, 0), ConfigError);
    CHECK_THROWS_AS(pca_shrinkage(svd, 6), ConfigError);

    const Panel small = panel_from_spectrum(
        4, 2, (Eigen::VectorXd(2) << 3, 1).finished(), 8);
    const ShrinkageProfile p1 = pca_shrinkage(scaled_svd(small), 1);
    CHECK(p1.weights(0) == 1.0);
    CHECK(p1.weights(1) == 0.0);
}

TEST_CASE("ridge_shrinkage: closed form and hat-matrix oracle") {
    // d = (2, 1), k = 1 -> weights (4/5, 1/2)
    const Panel panel = panel_from_spectrum(
        6, 2, (Eigen::VectorXd(2) << 2, 1).finished(), 11);
    const ScaledSvd svd = scaled_svd(panel);
    const ShrinkageProfile prof = ridge_shrinkage(svd, 1.0);
    CHECK(prof.weights(0) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(prof.weights(1) == doctest::Approx(0.5).epsilon(1e-10));

    // balance point: d_i^2 = 1/k -> weight exactly 1/2
    const Panel bal = panel_from_spectrum(
        5, 3, (Eigen::VectorXd(3) << 2, 2, 2).finished(), 12);
    const ShrinkageProfile pb = ridge_shrinkage(scaled_svd(bal), 0.25);
    CHECK(pb.weights(1) == doctest::Approx(0.5).epsilon(1e-12));

    // vanishing penalty: k -> infinity pushes every weight to 1
    const ShrinkageProfile pinf = ridge_shrinkage(svd, 1e12);
    CHECK(pinf.weights.minCoeff() > 1.0 - 1e-10);

    CHECK_THROWS_AS(ridge_shrinkage(svd, 0.0), ConfigError);
    CHECK_THROWS_AS(ridge_shrinkage(svd, -1.0), ConfigError);

    // direct evaluation of the hat matrix in the U basis, on random panels
    for (int trial = 0; trial < 10; ++trial) {
        RngStream rng(500, trial);
        const int t = 6 + static_cast<int>(rng.uniform() * 10);
        const int n = 2 + static_cast<int>(rng.uniform() * 6);
        const Eigen::MatrixXd x = rng.gaussian_matrix(t, n);
        const double k = 0.1 + 5.0 * rng.uniform();
        const ScaledSvd s = scaled_svd(x);
        const double lambda = static_cast<double>(t) * n / k;
        const Eigen::MatrixXd inner =
            (x.transpose() * x + lambda * Eigen::MatrixXd::Identity(n, n))
                .inverse();
        const Eigen::MatrixXd hat_in_u =
            s.u.transpose() * x * inner * x.transpose() * s.u;
        const ShrinkageProfile p = ridge_shrinkage(s, k);
        CHECK((p.weights - hat_in_u.diagonal()).cwiseAbs().maxCoeff() < 1e-9);
        // strictly decreasing whenever d is strictly decreasing
        for (Eigen::Index i = 0; i + 1 < s.d.size(); ++i)
            if (s.d(i) > s.d(i + 1) + 1e-12)
                CHECK(p.weights(i) > p.weights(i + 1));
    }
}

TEST_CASE("rp_shrinkage_mc: square projection gives exact ones") {
    const Panel panel = panel_from_spectrum(
        9, 4, (Eigen::VectorXd(4) << 3, 2, 1.5, 0.5).finished(), 21);
    const ScaledSvd svd = scaled_svd(panel);
    const RpShrinkage rp = rp_shrinkage_mc(svd, 4, 200, 99);
    CHECK((rp.weights.array() - 1.0).abs().maxCoeff() < 1e-8);
    CHECK(rp.singular_retries == 0);
}

TEST_CASE("rp_shrinkage_mc: m=2, k=1 against quadrature oracle") {
    const double d1 = 2.0, d2 = 1.0;
    const Panel panel = panel_from_spectrum(
        7, 2, (Eigen::VectorXd(2) << d1, d2).finished(), 31);
    const ScaledSvd svd = scaled_svd(panel);
    const int draws = 100000;
    const RpShrinkage rp = rp_shrinkage_mc(svd, 1, draws, 77);

    const double w1 = rp_weight_two_by_two_quadrature(d1, d2);
    const double w2 = rp_weight_two_by_two_quadrature(d2, d1);
    // the quadrature itself has a closed form d1/(d1+d2) in this case
    CHECK(w1 == doctest::Approx(d1 / (d1 + d2)).epsilon(1e-8));

    CHECK(std::abs(rp.weights(0) - w1) < 4.0 * rp.se(0));
    CHECK(std::abs(rp.weights(1) - w2) < 4.0 * rp.se(1));
}

TEST_CASE("rp_shrinkage_mc: lower bound from the weight lemma") {
    // spiked spectrum d^2 = (10, 5, 1, ..., 1), k = 3
    Eigen::VectorXd d2(10);
    d2 << 10, 5, 1, 1, 1, 1, 1, 1, 1, 1;
    const Eigen::VectorXd d = d2.cwiseSqrt();
    const Panel panel = panel_from_spectrum(14, 10, d, 41);
    const ScaledSvd svd = scaled_svd(panel);
    const RpShrinkage rp = rp_shrinkage_mc(svd, 3, 20000, 4242);
    for (int i = 0; i < 10; ++i) {
        const RpWeightBounds b = rp_weight_bounds(d2, 3, i);
        CHECK(b.lower <= rp.weights(i) + 3.0 * rp.se(i));
        CHECK(rp.weights(i) - 3.0 * rp.se(i) <= b.upper);
    }
}

TEST_CASE("rp_shrinkage_mc: argument validation and determinism") {
    const Panel panel = panel_from_spectrum(
        8, 5, (Eigen::VectorXd(5) << 5, 4, 3, 2, 1).finished(), 51);
    const ScaledSvd svd = scaled_svd(panel);
    CHECK_THROWS_AS(rp_shrinkage_mc(svd, 0, 200, 1), ConfigError);
    CHECK_THROWS_AS(rp_shrinkage_mc(svd, 6, 200, 1), ConfigError);
    CHECK_THROWS_AS(rp_shrinkage_mc(svd, 2, 50, 1), ConfigError);

    const RpShrinkage a = rp_shrinkage_mc(svd, 2, 500, 7);
    const RpShrinkage b = rp_shrinkage_mc(svd, 2, 500, 7);
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rp_weight_bounds: hand values and edge cases") {
    // equal spectrum, m = 10, k = 3:
    //   lower = 1 - 1/(1 + (k-2)/(m-1)) = 0.1
    //   upper = 1 - 1/(1 + k/(m-k-2))   = 0.375
    const Eigen::VectorXd flat = Eigen::VectorXd::Ones(10);
    const RpWeightBounds b = rp_weight_bounds(flat, 3, 4);
    CHECK(b.lower == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(b.upper == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(b.lower <= b.upper);

    // k = 2 collapses the lower bound to zero
    CHECK(rp_weight_bounds(flat, 2, 0).lower == 0.0);

    // k = m - 2 degenerates the upper bound to 1
    CHECK(rp_weight_bounds(flat, 8, 0).upper == 1.0);
    CHECK_THROWS_AS(rp_weight_bounds(flat, 9, 0), ConfigError);

    // symmetric case, large m: lower -> 1 - 1/(1 + (k-2)/(m-1))
    const Eigen::VectorXd big = Eigen::VectorXd::Ones(500);
    const RpWeightBounds bb = rp_weight_bounds(big, 5, 3);
    CHECK(bb.lower == doctest::Approx(1.0 - 1.0 / (1.0 + 3.0 / 499.0))
                          .epsilon(1e-12));

    // sandwich on random nonincreasing spectra
    for (int trial = 0; trial < 10; ++trial) {
        RngStream rng(600, trial);
        Eigen::VectorXd d2(8);
        for (int i = 0; i < 8; ++i)
            d2(i) = 0.2 + rng.uniform() * 5.0;
        std::sort(d2.data(), d2.data() + 8, std::greater<double>());
        for (int i = 0; i < 8; ++i) {
            const RpWeightBounds wb = rp_weight_bounds(d2, 4, i);
            CHECK(wb.lower <= wb.upper);
        }
    }
}

TEST_CASE("offdiag_nullity_check: off-diagonal means vanish") {
    // m = 2, k = 1 with a large draw count
    const Panel p2 = panel_from_spectrum(
        6, 2, (Eigen::VectorXd(2) << 2, 1).finished(), 61);
    const OffDiagonalCheck c2 = offdiag_nullity_check(scaled_svd(p2), 1, 100000, 5);
    CHECK(c2.max_abs < 4.0 * c2.se_at_max);

    // generic spectrum, m = 4, k = 2
    const Panel p4 = panel_from_spectrum(
        9, 4, (Eigen::VectorXd(4) << 3.0, 2.0, 1.0, 0.7).finished(), 62);
    const OffDiagonalCheck c4 = offdiag_nullity_check(scaled_svd(p4), 2, 20000, 6);
    CHECK(c4.max_abs < 4.0 * c4.se_at_max);
}

TEST_CASE("offdiag_nullity_check: isotropic spectrum diagonal is k/(c^2 m)") {
    // For D = cI the projector R(R'D^2R)^{-1}R' is c^{-2} times an orthogonal
    // projection onto a uniformly random k-dimensional subspace, so its
    // expectation is (k / (c^2 m)) I.
    const double c = 2.0;
    const int m = 5, k = 2;
    const Panel p = panel_from_spectrum(
        9, m, Eigen::VectorXd::Constant(m, c), 63);
    const OffDiagonalCheck chk = offdiag_nullity_check(scaled_svd(p), k, 40000, 7);
    CHECK(chk.max_abs < 4.0 * chk.se_at_max);
    const double expect = k / (c * c * m);
    for (int i = 0; i < m; ++i) {
        CHECK(std::abs(chk.moments.mean(i, i) - expect) <
              4.0 * chk.moments.se(i, i));
    }
}

TEST_CASE("expectation switch: MC estimate matches the rotated diagonal form") {
    // random 4x6 panel, k = 2, 2e4 draws per side with independent seeds
    RngStream rng(1789, 0);
    const Eigen::MatrixXd z = rng.gaussian_matrix(4, 6);
    const int k = 2, draws = 20000;

    // left side: direct MC over R of R (R'Z'ZR)^{-1} R', coded independently
    const Eigen::MatrixXd ztz = z.transpose() * z;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(6, 6);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(6, 6);
    for (int dNum = 0; dNum < draws; ++dNum) {
        RngStream draw_rng(91, dNum);
        const Eigen::MatrixXd r = draw_rng.gaussian_matrix(6, k);
        const Eigen::MatrixXd inner = (r.transpose() * ztz * r).inverse();
        const Eigen::MatrixXd term = r * inner * r.transpose();
        sum += term;
        sum_sq += term.cwiseProduct(term);
    }
    const Eigen::MatrixXd lhs = sum / draws;
    const Eigen::MatrixXd lhs_se =
        ((sum_sq - sum.cwiseProduct(sum) / draws) / (draws - 1) / draws)
            .cwiseMax(0.0)
            .cwiseSqrt();

    // right side: V E[R (R'D^2R)^{-1} R'] V' with the full (padded) spectrum
    Eigen::JacobiSVD<Eigen::MatrixXd> full(z, Eigen::ComputeFullV);
    Eigen::VectorXd d2 = Eigen::VectorXd::Zero(6);
    d2.head(4) = full.singularValues().array().square();
    const RpProjectorMoments inner_mc = rp_projector_moments(d2, k, draws, 1213);
    const Eigen::MatrixXd v = full.matrixV();
    const Eigen::MatrixXd rhs = v * inner_mc.mean * v.transpose();
    const Eigen::MatrixXd rhs_se =
        (v.cwiseAbs() * inner_mc.se * v.cwiseAbs().transpose());

    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            const double tol =
                4.0 * std::sqrt(lhs_se(i, j) * lhs_se(i, j) +
                                rhs_se(i, j) * rhs_se(i, j));
            CHECK(std::abs(lhs(i, j) - rhs(i, j)) <= tol);
        }
    }
}

TEST_CASE("panel_from_spectrum: round trip through scaled_svd") {
    Eigen::VectorXd d(4);
    d << 4.0, 2.5, 1.0, 0.25;
    const Panel p = panel_from_spectrum(12, 4, d, 71);
    const ScaledSvd svd = scaled_svd(p);
    CHECK((svd.d - d).cwiseAbs().maxCoeff() < 1e-10);
}
