#include "polarlens/gam.hpp"

#include "polarlens/common.hpp"

#include <algorithm>
#include <cmath>

namespace polarlens {

namespace {

// Linear-interpolated sample quantile at fraction q of the sorted values.
double quantile_sorted(const std::vector<double>& s, double q) {
    double pos = q * static_cast<double>(s.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= s.size()) return s.back();
    double frac = pos - static_cast<double>(lo);
    return s[lo] * (1.0 - frac) + s[lo + 1] * frac;
}

// All B-spline basis values at x by the Cox-de Boor recurrence with the
// 0/0 := 0 convention; the rightmost nonempty interval is closed so that
// partition of unity holds at x == x_max.
Eigen::RowVectorXd bspline_row(const std::vector<double>& t, int degree, double x,
                               double x_max) {
    const std::size_t n_knots = t.size();
    const std::size_t m = n_knots - static_cast<std::size_t>(degree) - 1; // basis count
    std::vector<double> n_prev(n_knots - 1, 0.0);
    for (std::size_t i = 0; i + 1 < n_knots; ++i) {
        bool inside = t[i] <= x && x < t[i + 1];
        bool right_end = x == x_max && t[i] < t[i + 1] && t[i + 1] == x_max;
        n_prev[i] = (inside || right_end) ? 1.0 : 0.0;
    }
    std::vector<double> n_cur;
    for (int k = 1; k <= degree; ++k) {
        n_cur.assign(n_knots - 1 - static_cast<std::size_t>(k), 0.0);
        for (std::size_t i = 0; i < n_cur.size(); ++i) {
            double left = 0.0, right = 0.0;
            double dl = t[i + static_cast<std::size_t>(k)] - t[i];
            if (dl > 0.0) left = (x - t[i]) / dl * n_prev[i];
            double dr = t[i + static_cast<std::size_t>(k) + 1] - t[i + 1];
            if (dr > 0.0)
                right = (t[i + static_cast<std::size_t>(k) + 1] - x) / dr * n_prev[i + 1];
            n_cur[i] = left + right;
        }
        n_prev = n_cur;
    }
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) row[static_cast<Eigen::Index>(i)] = n_prev[i];
    return row;
}

} // namespace

Eigen::RowVectorXd SplineBasis::raw_row(double x) const {
    double xc = std::clamp(x, x_min, x_max);
    if (kind == TermKind::linear) {
        Eigen::RowVectorXd row(1);
        row[0] = xc;
        return row;
    }
    return bspline_row(knots, degree, xc, x_max);
}

Eigen::RowVectorXd SplineBasis::centered_row(double x) const { return raw_row(x) - centering; }

Eigen::MatrixXd SplineBasis::centered_matrix(std::span<const double> x) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), n_columns());
    for (std::size_t i = 0; i < x.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = centered_row(x[i]);
    return m;
}

SplineBasis build_basis(const std::string& name, std::span<const double> x, int degree,
                        int n_basis) {
    if (x.empty()) throw domain_error("build_basis: empty column");
    if (degree < 1) throw domain_error("build_basis: degree must be >= 1");
    if (n_basis < degree + 2) throw domain_error("build_basis: n_basis must be >= degree + 2");
    for (double v : x)
        if (!std::isfinite(v)) throw domain_error("build_basis: non-finite value in " + name);

    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i] != sorted[i - 1]) ++distinct;

    SplineBasis b;
    b.name = name;
    b.degree = degree;
    b.x_min = sorted.front();
    b.x_max = sorted.back();

    if (distinct <= 2 || distinct < static_cast<std::size_t>(n_basis)) {
        b.kind = TermKind::linear;
        b.fallback = distinct > 2; // a true spline request that had to degrade
        double mean = 0.0;
        for (double v : x) mean += v;
        b.centering = Eigen::RowVectorXd::Constant(1, mean / static_cast<double>(x.size()));
        return b;
    }

    b.kind = TermKind::spline;
    int interior = n_basis - degree - 1;
    b.knots.reserve(static_cast<std::size_t>(n_basis + degree + 1));
    for (int i = 0; i <= degree; ++i) b.knots.push_back(b.x_min);
    for (int i = 1; i <= interior; ++i)
        b.knots.push_back(quantile_sorted(sorted, static_cast<double>(i) /
                                                      static_cast<double>(interior + 1)));
    for (int i = 0; i <= degree; ++i) b.knots.push_back(b.x_max);
    if (!std::is_sorted(b.knots.begin(), b.knots.end()))
        throw domain_error("build_basis: knot vector not nondecreasing for " + name);

    b.centering = Eigen::RowVectorXd::Zero(n_basis);
    for (double v : x) b.centering += bspline_row(b.knots, degree, v, b.x_max);
    b.centering /= static_cast<double>(x.size());
    return b;
}

} // namespace polarlens
