#include "polarlens/gam.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"
#include "polarlens/stats.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace polarlens;

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

// Quantile by linear interpolation at q * (n - 1) over the sorted sample.
double quantile_brute(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - std::floor(pos);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

} // namespace

TEST_CASE("spline basis forms a partition of unity before centering") {
    Rng rng(9001);
    std::vector<double> x(500);
    for (auto& v : x) v = rng.next_gaussian();
    auto basis = build_basis("f", x, 3, 10);
    REQUIRE_FALSE(basis.fallback);
    CHECK(basis.kind == TermKind::spline);
    CHECK(basis.n_columns() == 10);
    for (int i = 0; i < 200; ++i) {
        double t = basis.x_min + (basis.x_max - basis.x_min) * i / 199.0;
        auto row = basis.raw_row(t);
        CHECK(row.sum() == doctest::Approx(1.0).epsilon(1e-10));
        for (Eigen::Index j = 0; j < row.size(); ++j) {
            CHECK(row(j) >= -1e-12);
            CHECK(row(j) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("interior knots sit at the documented quantiles") {
    Rng rng(9002);
    std::vector<double> x(1000);
    for (auto& v : x) v = rng.next_double() * 10.0;
    int n_basis = 8, degree = 3;
    auto basis = build_basis("f", x, degree, n_basis);
    // n_basis - degree - 1 interior knots at evenly spaced quantiles.
    int n_interior = n_basis - degree - 1;
    REQUIRE(static_cast<int>(basis.knots.size()) == n_basis + degree + 1);
    for (int i = 0; i < n_interior; ++i) {
        double q = static_cast<double>(i + 1) / static_cast<double>(n_interior + 1);
        double want = quantile_brute(x, q);
        CHECK(basis.knots[static_cast<std::size_t>(degree + 1 + i)] ==
              doctest::Approx(want).epsilon(1e-12));
    }
    // Boundary knots replicate the data range degree+1 times.
    for (int i = 0; i <= degree; ++i) {
        CHECK(basis.knots[static_cast<std::size_t>(i)] == basis.x_min);
        CHECK(basis.knots[basis.knots.size() - 1 - static_cast<std::size_t>(i)] == basis.x_max);
    }
}

TEST_CASE("binary and low-cardinality columns fall back to linear") {
    std::vector<double> binary = {0, 1, 0, 1, 1, 0, 1, 0, 0, 1};
    auto b = build_basis("flag", binary, 3, 10);
    CHECK(b.kind == TermKind::linear);
    CHECK_FALSE(b.fallback); // binary is linear by design, not by fallback
    CHECK(b.n_columns() == 1);

    std::vector<double> coarse = {1, 2, 3, 4, 5, 1, 2, 3, 4, 5};
    auto c = build_basis("coarse", coarse, 3, 10);
    CHECK(c.kind == TermKind::linear);
    CHECK(c.fallback); // spline was requested but 5 < 10 distinct values
    CHECK(c.n_columns() == 1);

    // A constant column still builds (as a linear term); the fit layer is
    // where the resulting zero column turns into a degenerate-system error.
    std::vector<double> constant = {2, 2, 2, 2};
    auto f = build_basis("flat", constant, 3, 10);
    CHECK(f.kind == TermKind::linear);
    CHECK_FALSE(f.fallback);
    CHECK(f.centered_row(2.0)(0) == 0.0);
}

TEST_CASE("centered rows subtract training means and clamp out of range") {
    Rng rng(9003);
    std::vector<double> x(300);
    for (auto& v : x) v = rng.next_gaussian();
    auto basis = build_basis("f", x, 3, 8);

    // Training-mean centering: the average centered row over x is zero.
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(basis.n_columns());
    for (double v : x) acc += basis.centered_row(v);
    CHECK(acc.cwiseAbs().maxCoeff() / static_cast<double>(x.size()) < 1e-12);

    // Constant extrapolation on both sides.
    auto lo = basis.centered_row(basis.x_min - 5.0);
    auto at_lo = basis.centered_row(basis.x_min);
    CHECK((lo - at_lo).cwiseAbs().maxCoeff() == 0.0);
    auto hi = basis.centered_row(basis.x_max + 5.0);
    auto at_hi = basis.centered_row(basis.x_max);
    CHECK((hi - at_hi).cwiseAbs().maxCoeff() == 0.0);

    // centered_matrix stacks centered_row.
    std::vector<double> probe = {x[0], x[1], basis.x_max + 1.0};
    auto m = basis.centered_matrix(probe);
    REQUIRE(m.rows() == 3);
    CHECK((m.row(0) - basis.centered_row(probe[0])).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.row(2) - basis.centered_row(basis.x_max)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gam recovers a smooth curve and its gcv/edf match a dense oracle") {
    // One feature, fixed lambda verification: refit the penalized normal
    // equations densely at the lambda the fit selected and compare
    // coefficients, edf and gcv.
    Rng rng(9004);
    const std::size_t n = 400;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = 6.0 * rng.next_double() - 3.0;
        y[i] = std::sin(1.7 * x[i]) + 0.05 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 12;
    auto model = gam_fit({"x"}, {x}, y, cfg);
    REQUIRE(model.terms.size() == 1);
    CHECK(model.train_r2 > 0.99);

    const auto& term = model.terms[0];
    double lambda = term.lambda;
    Eigen::MatrixXd b = term.basis.centered_matrix(x);
    Eigen::Index p = b.cols();
    Eigen::MatrixXd d(n, p + 1);
    d.col(0) = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    d.rightCols(p) = b;
    // Second difference penalty over the spline coefficients.
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p - 2, p);
    for (Eigen::Index r = 0; r < p - 2; ++r) {
        d2(r, r) = 1.0;
        d2(r, r + 1) = -2.0;
        d2(r, r + 2) = 1.0;
    }
    Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(p + 1, p + 1);
    pen.bottomRightCorner(p, p) = lambda * d2.transpose() * d2;
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd a = d.transpose() * d + pen;

    // The centered basis and the difference penalty share one exact null
    // direction (block-constant coefficients), so invert on its complement.
    // The pseudo-inverse solution is the minimum-norm one, which is what the
    // fit reports.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    REQUIRE(es.info() == Eigen::Success);
    Eigen::VectorXd inv_eval = es.eigenvalues();
    double emax = inv_eval.maxCoeff();
    for (Eigen::Index i = 0; i < inv_eval.size(); ++i)
        inv_eval[i] = inv_eval[i] > emax * 1e-10 ? 1.0 / inv_eval[i] : 0.0;
    Eigen::MatrixXd apinv =
        es.eigenvectors() * inv_eval.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd beta = apinv * (d.transpose() * yv);

    CHECK(std::abs(beta(0) - model.intercept) < 1e-6);
    for (Eigen::Index j = 0; j < p; ++j) CHECK(std::abs(beta(j + 1) - term.coefs(j)) < 1e-6);

    // edf = trace of the hat matrix, gcv = n*RSS/(n - edf)^2.
    Eigen::MatrixXd hat_core = apinv * (d.transpose() * d);
    double edf = hat_core.trace();
    CHECK(model.edf == doctest::Approx(edf).epsilon(1e-6));
    double rss = (yv - d * beta).squaredNorm();
    double gcv = static_cast<double>(n) * rss / ((static_cast<double>(n) - edf) * (static_cast<double>(n) - edf));
    CHECK(model.gcv == doctest::Approx(gcv).epsilon(1e-6));

    // Pinning the same lambda through fixed_lambda reproduces the model
    // bit for bit; the sweep only decides which lambda wins.
    GamConfig pinned = cfg;
    pinned.fixed_lambda = lambda;
    auto repeat = gam_fit({"x"}, {x}, y, pinned);
    CHECK(repeat.intercept == model.intercept);
    CHECK(repeat.edf == model.edf);
    CHECK(repeat.gcv == model.gcv);
    CHECK((repeat.terms[0].coefs - term.coefs).cwiseAbs().maxCoeff() == 0.0);

    GamConfig bad = cfg;
    bad.fixed_lambda = 0.0;
    CHECK_THROWS_AS((void)gam_fit({"x"}, {x}, y, bad), domain_error);
}

TEST_CASE("edf grows as lambda shrinks") {
    Rng rng(9005);
    const std::size_t n = 300;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.next_double() * 4.0;
        y[i] = std::cos(2.0 * x[i]) + 0.1 * rng.next_gaussian();
    }
    // Pin lambda through a degenerate one-point grid at several levels and
    // watch the effective degrees of freedom shrink monotonically.
    double prev_edf = 1e18;
    for (double lg : {-2.0, 0.0, 2.0, 4.0, 6.0}) {
        GamConfig cfg;
        cfg.n_basis = 10;
        cfg.lambda_log10_min = lg;
        cfg.lambda_log10_max = lg;
        cfg.lambda_grid_points = 1;
        cfg.lambda_sweeps = 1;
        auto model = gam_fit({"x"}, {x}, y, cfg);
        CHECK(model.edf < prev_edf);
        prev_edf = model.edf;
    }
}

TEST_CASE("two-feature additive truth is recovered with high validation r2") {
    Rng rng(9006);
    const std::size_t n = 2000;
    std::vector<double> x1(n), x2(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x1[i] = 6.0 * rng.next_double() - 3.0;
        x2[i] = 2.0 * rng.next_double() - 1.0;
        y[i] = std::sin(x1[i]) + x2[i] * x2[i] + 0.05 * rng.next_gaussian();
    }
    auto split = train_val_split(n, 0.1, 7);
    std::vector<double> x1t, x2t, yt, x1v, x2v, yv;
    for (auto i : split.train) {
        x1t.push_back(x1[i]);
        x2t.push_back(x2[i]);
        yt.push_back(y[i]);
    }
    for (auto i : split.val) {
        x1v.push_back(x1[i]);
        x2v.push_back(x2[i]);
        yv.push_back(y[i]);
    }
    GamConfig cfg;
    cfg.n_basis = 12;
    auto model = gam_fit({"x1", "x2"}, {x1t, x2t}, yt, cfg);
    auto pred = model.predict({x1v, x2v});
    CHECK(r_squared(yv, pred) > 0.95);

    // Partial dependence tracks each additive component up to a constant.
    auto pd1 = partial_dependence(model, "x1", 100);
    double offset1 = 0.0;
    for (std::size_t i = 0; i < pd1.grid.size(); ++i) offset1 += pd1.s[i] - std::sin(pd1.grid[i]);
    offset1 /= static_cast<double>(pd1.grid.size());
    // Judge deviation over the central 90% of the grid.
    std::size_t lo = pd1.grid.size() / 20, hi = pd1.grid.size() - lo;
    double worst1 = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
        worst1 = std::max(worst1, std::abs(pd1.s[i] - offset1 - std::sin(pd1.grid[i])));
    CHECK(worst1 < 0.1);

    auto pd2 = partial_dependence(model, "x2", 100);
    double offset2 = 0.0;
    for (std::size_t i = 0; i < pd2.grid.size(); ++i)
        offset2 += pd2.s[i] - pd2.grid[i] * pd2.grid[i];
    offset2 /= static_cast<double>(pd2.grid.size());
    double worst2 = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
        worst2 = std::max(worst2,
                          std::abs(pd2.s[i] - offset2 - pd2.grid[i] * pd2.grid[i]));
    CHECK(worst2 < 0.1);

    // Confidence band orders correctly and brackets the point estimate.
    for (std::size_t i = 0; i < pd1.grid.size(); ++i) {
        CHECK(pd1.lower[i] <= pd1.s[i]);
        CHECK(pd1.s[i] <= pd1.upper[i]);
    }
}

TEST_CASE("gam_fit validates its inputs") {
    std::vector<double> x = {1, 2, 3};
    std::vector<double> y = {1, 2, 3};
    GamConfig cfg;
    cfg.min_rows = 50;
    CHECK_THROWS_AS((void)gam_fit({"x"}, {x}, y, cfg), domain_error);
    cfg.min_rows = 2;
    std::vector<double> y_short = {1, 2};
    CHECK_THROWS_AS((void)gam_fit({"x"}, {x}, y_short, cfg), domain_error);
    CHECK_THROWS_AS((void)gam_fit({"x", "extra"}, {x}, y, cfg), domain_error);

    // Zero features is legal: the intercept-only model predicts the mean.
    auto m0 = gam_fit({}, {}, y, cfg);
    CHECK(m0.terms.empty());
    CHECK(m0.intercept == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(m0.edf == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m0.predict_row(std::vector<double>{}) == m0.intercept);

    std::vector<double> y_flat = {5, 5, 5};
    CHECK_THROWS_AS((void)gam_fit({}, {}, y_flat, cfg), degenerate_error);

    // A constant covariate centers to a zero column: degenerate system.
    Rng rng(9013);
    std::vector<double> flat(60, 2.0), yr(60);
    for (auto& v : yr) v = rng.next_gaussian();
    cfg.min_rows = 50;
    CHECK_THROWS_AS((void)gam_fit({"flat"}, {flat}, yr, cfg), degenerate_error);
}

TEST_CASE("forward selection keeps signal features and rejects noise") {
    Rng rng(9007);
    const std::size_t n = 1200;
    std::vector<std::vector<double>> cols(5, std::vector<double>(n));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& c : cols) c[i] = rng.next_gaussian();
        y[i] = std::sin(2.0 * cols[0][i]) + 0.8 * cols[1][i] + 0.1 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 10;
    auto sel = forward_select_aic({"signal_smooth", "signal_linear", "n1", "n2", "n3"}, cols, y,
                                  cfg);
    std::vector<std::size_t> want = {0, 1};
    std::vector<std::size_t> got = sel.selected;
    std::sort(got.begin(), got.end());
    CHECK(got == want);
    REQUIRE_FALSE(sel.trace.empty());
    // The trace records accepted steps in acceptance order.
    std::size_t accepted = 0;
    for (const auto& step : sel.trace)
        if (step.accepted) ++accepted;
    CHECK(accepted == 3); // intercept entry plus the two signal features
    CHECK(sel.model.terms.size() == 2);

    // Zero candidates: intercept-only model, trace holds just the base step.
    auto none = forward_select_aic({}, {}, y, cfg);
    CHECK(none.selected.empty());
    CHECK(none.model.terms.empty());
    REQUIRE(none.trace.size() == 1);
    CHECK(none.trace[0].feature == "<intercept>");

    // Two copies of one informative feature: the duplicate cannot be fitted
    // alongside the original (exactly collinear), so exactly one is kept.
    auto dup = forward_select_aic({"a", "b"}, {cols[0], cols[0]}, y, cfg);
    REQUIRE(dup.selected.size() == 1);
    CHECK(dup.model.terms.size() == 1);
    bool noted = false;
    for (const auto& step : dup.trace)
        if (!step.accepted && step.note.find("fit failed") != std::string::npos) noted = true;
    CHECK(noted);
}

TEST_CASE("identity permutation leaves r2 exactly unchanged") {
    Rng rng(9008);
    const std::size_t n = 300;
    std::vector<double> x1(n), x2(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x1[i] = rng.next_gaussian();
        x2[i] = rng.next_gaussian();
        y[i] = x1[i] + 0.5 * x2[i] * x2[i] + 0.1 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 8;
    auto model = gam_fit({"x1", "x2"}, {x1, x2}, y, cfg);

    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), 0);
    auto pred = model.predict({x1, x2});
    double base = r_squared(y, pred);
    for (std::size_t f = 0; f < 2; ++f) {
        double permuted = permuted_r2(model, {x1, x2}, y, f, identity);
        CHECK(permuted == base); // bit-for-bit equal
    }
}

TEST_CASE("permutation importance ranks signal above noise") {
    Rng rng(9009);
    const std::size_t n = 600;
    std::vector<double> xs(n), xn(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = rng.next_gaussian();
        xn[i] = rng.next_gaussian();
        y[i] = std::sin(2.0 * xs[i]) + 0.05 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 10;
    auto model = gam_fit({"signal", "noise"}, {xs, xn}, y, cfg);
    auto report = permutation_importance(model, {xs, xn}, y, 10, 123);
    REQUIRE(report.names.size() == 2);
    REQUIRE(report.delta_r2.size() == 2);
    CHECK(report.delta_r2[0] > 0.5);
    CHECK(std::abs(report.delta_r2[1]) <= 0.01);
    REQUIRE(report.repeats.size() == 2);
    CHECK(report.repeats[0].size() == 10);
    CHECK(report.n_repeats == 10);
    CHECK(report.seed == 123);

    // Seeded reproducibility.
    auto again = permutation_importance(model, {xs, xn}, y, 10, 123);
    CHECK(again.delta_r2 == report.delta_r2);
    auto other = permutation_importance(model, {xs, xn}, y, 10, 124);
    CHECK(other.repeats[0] != report.repeats[0]);
}

TEST_CASE("gam model json round trip preserves predictions exactly") {
    Rng rng(9010);
    const std::size_t n = 200;
    std::vector<double> x1(n), x2(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x1[i] = rng.next_gaussian();
        x2[i] = static_cast<double>(rng.next_below(2)); // binary -> linear term
        y[i] = std::sin(x1[i]) + x2[i] + 0.1 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 8;
    auto model = gam_fit({"x1", "flag"}, {x1, x2}, y, cfg);
    model.val_r2 = 0.87;

    auto path = std::filesystem::temp_directory_path() /
                ("polarlens_gam_" + std::to_string(::getpid()) + ".json");
    save_gam_model(path.string(), model);
    auto back = load_gam_model(path.string());
    std::filesystem::remove(path);

    CHECK(back.intercept == model.intercept);
    CHECK(back.sigma2 == model.sigma2);
    CHECK(back.edf == model.edf);
    CHECK(back.gcv == model.gcv);
    CHECK(back.train_r2 == model.train_r2);
    REQUIRE(back.val_r2.has_value());
    CHECK(*back.val_r2 == 0.87);
    REQUIRE(back.terms.size() == model.terms.size());
    CHECK(back.terms[0].basis.name == "x1");
    CHECK(back.terms[1].basis.kind == TermKind::linear);

    Rng probe_rng(424242);
    for (int i = 0; i < 50; ++i) {
        double a = 3.0 * probe_rng.next_gaussian();
        double b = static_cast<double>(probe_rng.next_below(2));
        std::vector<double> row = {a, b};
        CHECK(back.predict_row(row) == model.predict_row(row));
    }

    // Partial dependence built from the reloaded model matches too.
    auto pd1 = partial_dependence(model, "x1", 25);
    auto pd2 = partial_dependence(back, "x1", 25);
    CHECK(pd1.grid == pd2.grid);
    CHECK(pd1.s == pd2.s);
    CHECK(pd1.lower == pd2.lower);
}

TEST_CASE("partial dependence csv writes and parses back") {
    Rng rng(9011);
    const std::size_t n = 200;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.next_gaussian();
        y[i] = x[i] * x[i] + 0.1 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 8;
    auto model = gam_fit({"x"}, {x}, y, cfg);
    auto pd = partial_dependence(model, "x", 40);
    REQUIRE(pd.grid.size() == 40);

    auto path = std::filesystem::temp_directory_path() /
                ("polarlens_pd_" + std::to_string(::getpid()) + ".csv");
    write_partial_dependence_csv(path.string(), pd);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "grid,s,lower,upper");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        REQUIRE(vals.size() == 4);
        CHECK(vals[0] == pd.grid[rows]);
        CHECK(vals[1] == pd.s[rows]);
        CHECK(vals[2] == pd.lower[rows]);
        CHECK(vals[3] == pd.upper[rows]);
        ++rows;
    }
    CHECK(rows == 40);
    std::filesystem::remove(path);

    CHECK_THROWS_AS((void)partial_dependence(model, "absent", 40), domain_error);
}

TEST_CASE("predictions clamp beyond the training range") {
    Rng rng(9012);
    const std::size_t n = 300;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.next_double() * 2.0 - 1.0;
        y[i] = std::sin(3.0 * x[i]) + 0.05 * rng.next_gaussian();
    }
    GamConfig cfg;
    cfg.n_basis = 10;
    auto model = gam_fit({"x"}, {x}, y, cfg);
    double at_max = model.predict_row(std::vector<double>{model.terms[0].basis.x_max});
    double beyond = model.predict_row(std::vector<double>{model.terms[0].basis.x_max + 10.0});
    CHECK(at_max == beyond);
    double at_min = model.predict_row(std::vector<double>{model.terms[0].basis.x_min});
    double below = model.predict_row(std::vector<double>{model.terms[0].basis.x_min - 10.0});
    CHECK(at_min == below);
}
