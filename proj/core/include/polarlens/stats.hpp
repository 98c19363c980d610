#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace polarlens {

/// 1 - RSS/TSS. Throws degenerate_error when y has zero variance.
double r_squared(std::span<const double> y, std::span<const double> yhat);

/// Pearson correlation; throws degenerate_error on zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b (tie corrected), O(n log n) merge-sort implementation.
/// Throws degenerate_error when either sequence is entirely tied.
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Seeded uniform split of [0, n): each index lands in the validation set
/// with probability val_frac. Both parts keep ascending order.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};
SplitIndices train_val_split(std::size_t n, double val_frac, std::uint64_t seed);

} // namespace polarlens
