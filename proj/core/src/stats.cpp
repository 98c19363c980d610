#include "polarlens/stats.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polarlens {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) throw domain_error(std::string(what) + ": length mismatch");
    if (a.size() < 2) throw domain_error(std::string(what) + ": need at least 2 points");
}

// Counts inversions in v by merge sort; v is sorted in place.
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    std::merge(v.begin() + static_cast<std::ptrdiff_t>(lo), v.begin() + static_cast<std::ptrdiff_t>(mid),
               v.begin() + static_cast<std::ptrdiff_t>(mid), v.begin() + static_cast<std::ptrdiff_t>(hi),
               scratch.begin() + static_cast<std::ptrdiff_t>(lo));
    // Count crossings: for each element of the right half, how many left
    // elements are strictly greater.
    std::size_t i = lo, j = mid;
    while (j < hi) {
        while (i < mid && v[i] <= v[j]) ++i;
        inv += mid - i;
        ++j;
    }
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
              scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

// Sum over groups of equal keys of g*(g-1)/2.
template <typename It, typename Eq>
std::uint64_t tie_pairs(It begin, It end, Eq eq) {
    std::uint64_t total = 0;
    for (It i = begin; i != end;) {
        It j = i;
        std::uint64_t g = 0;
        while (j != end && eq(*i, *j)) {
            ++j;
            ++g;
        }
        total += g * (g - 1) / 2;
        i = j;
    }
    return total;
}

} // namespace

double r_squared(std::span<const double> y, std::span<const double> yhat) {
    check_lengths(y, yhat, "r_squared");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double tss = 0.0, rss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        tss += (y[i] - mean) * (y[i] - mean);
        rss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    }
    if (tss <= 0.0) throw degenerate_error("r_squared: response has zero variance");
    return 1.0 - rss / tss;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y, "pearson");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    if (vx <= 0.0 || vy <= 0.0) throw degenerate_error("pearson: zero variance");
    return cov / std::sqrt(vx * vy);
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    check_lengths(x, y, "kendall_tau");
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    std::vector<std::pair<double, double>> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = {x[order[i]], y[order[i]]};

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    std::uint64_t n1 = tie_pairs(s.begin(), s.end(),
                                 [](const auto& a, const auto& b) { return a.first == b.first; });
    std::uint64_t n3 = tie_pairs(s.begin(), s.end(), [](const auto& a, const auto& b) {
        return a.first == b.first && a.second == b.second;
    });

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = s[i].second;
    std::vector<double> sorted_y = ys;
    std::sort(sorted_y.begin(), sorted_y.end());
    std::uint64_t n2 = tie_pairs(sorted_y.begin(), sorted_y.end(),
                                 [](double a, double b) { return a == b; });

    std::vector<double> scratch(n);
    std::uint64_t swaps = count_inversions(ys, scratch, 0, n);

    // Knight: C - D = n0 - n1 - n2 + n3 - 2*swaps, with swaps counted after
    // sorting by (x, y) so x-tied pairs contribute no inversions.
    double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                 static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
    double d1 = static_cast<double>(n0 - n1);
    double d2 = static_cast<double>(n0 - n2);
    if (d1 <= 0.0 || d2 <= 0.0) throw degenerate_error("kendall_tau: a sequence is all ties");
    return num / std::sqrt(d1 * d2);
}

SplitIndices train_val_split(std::size_t n, double val_frac, std::uint64_t seed) {
    if (val_frac < 0.0 || val_frac >= 1.0)
        throw domain_error("train_val_split: val_frac must be in [0, 1)");
    Rng rng(seed);
    SplitIndices out;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.next_double() < val_frac)
            out.val.push_back(i);
        else
            out.train.push_back(i);
    }
    return out;
}

} // namespace polarlens
