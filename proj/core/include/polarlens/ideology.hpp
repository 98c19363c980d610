#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace polarlens {

inline constexpr std::size_t kDefaultMinFollows = 10;
inline constexpr double kDefaultTopPct = 0.2;
inline constexpr std::int64_t kDefaultMinEliteFollowers = 30;

/// Sparse binary follow incidence: rows follow columns. Rows and columns
/// are kept sorted by id so construction is order-independent.
struct FollowMatrix {
    std::vector<std::string> rows; // follower user ids
    std::vector<std::string> cols; // elite account ids
    std::vector<std::vector<std::uint32_t>> row_cols; // sorted column indices per row

    std::size_t nnz() const {
        std::size_t total = 0;
        for (const auto& rc : row_cols) total += rc.size();
        return total;
    }
};

/// follows.csv: header user_id,elite_id, one edge per line.
std::vector<std::pair<std::string, std::string>> load_follows(const std::string& path);

/// Dedupes edges, drops rows with fewer than min_follows follows, then drops
/// columns left without any follower.
FollowMatrix build_follow_matrix(const std::vector<std::pair<std::string, std::string>>& edges,
                                 std::size_t min_follows);

struct CAModel {
    std::vector<std::string> cols;
    Eigen::VectorXd col_masses;      // positive, sums to 1
    Eigen::MatrixXd col_std_coords;  // m x d, D_c^{-1/2} V with anchor sign fix
    Eigen::VectorXd singular_values; // descending, strictly positive
    std::string anchor;
    double zmean = 0.0;
    double zstd = 1.0;

    Eigen::Index dims() const { return singular_values.size(); }
    std::size_t col_index(const std::string& id) const; // npos when unknown
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Sum of squared standardized residuals (the chi-square statistic over the
/// grand total); zero exactly when F is an outer product of its margins.
double total_inertia(const FollowMatrix& f);

/// Correspondence analysis of the follow incidence. The SVD of the
/// standardized residual matrix runs matrix-free (subspace iteration on the
/// sparse operator; the dense residual matrix is never formed). Signs are
/// normalized so the anchor column's coordinate is positive on each
/// dimension where it is nonzero.
CAModel ca_fit(const FollowMatrix& f, int d, const std::string& anchor);

/// Supplementary projection: coordinate_k = (profile . Gamma_k) / sigma_k
/// over the followed model columns. Throws domain_error when the row
/// follows none of them.
Eigen::VectorXd ca_project(const CAModel& model, std::span<const std::uint32_t> follow_cols);

/// Id-based convenience wrapper; ids absent from the model are ignored.
Eigen::VectorXd ca_project_ids(const CAModel& model, const std::vector<std::string>& followed);

struct EliteCandidate {
    std::string id;
    std::int64_t n_conservative = 0;
    std::int64_t n_liberal = 0;

    std::int64_t pop_conservative() const { return n_conservative - n_liberal; }
    std::int64_t pop_liberal() const { return n_liberal - n_conservative; }
};

struct EliteExpansion {
    std::vector<std::string> conservative_users; // the top_pct highest scores
    std::vector<std::string> liberal_users;      // the top_pct lowest scores
    std::vector<EliteCandidate> conservative_ranked; // by pop_conservative desc
    std::vector<EliteCandidate> liberal_ranked;      // by pop_liberal desc
};

/// Stage-2 elite expansion: ranks candidate accounts by how lopsided their
/// follower base is across the top/bottom score quantiles. Candidates with
/// fewer than min_followers followers inside those quantiles are dropped.
EliteExpansion expand_elites(const std::map<std::string, double>& scores,
                             const std::map<std::string, std::set<std::string>>& follows,
                             const std::set<std::string>& candidates,
                             double top_pct = kDefaultTopPct,
                             std::int64_t min_followers = kDefaultMinEliteFollowers);

struct Standardized {
    std::vector<double> z;
    double mean = 0.0;
    double std = 0.0; // population
};

/// Z-scores with population std; throws degenerate_error on constant input.
Standardized standardize(std::span<const double> values);

void save_ca_model(const std::string& path, const CAModel& model);
CAModel load_ca_model(const std::string& path);

} // namespace polarlens
