#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polarlens {

inline constexpr int kDefaultSplineDegree = 3;
inline constexpr int kDefaultNBasis = 20;

enum class TermKind { spline, linear };

/// Cubic B-spline basis on quantile interior knots, or a plain linear term.
/// Evaluation clamps x to the training range (constant extrapolation) and
/// subtracts the training column means (sum-to-zero identifiability).
struct SplineBasis {
    std::string name;
    TermKind kind = TermKind::spline;
    int degree = kDefaultSplineDegree;
    std::vector<double> knots; // padded knot vector; empty for linear terms
    double x_min = 0.0;
    double x_max = 1.0;
    Eigen::RowVectorXd centering;
    bool fallback = false; // spline requested but too few distinct values

    Eigen::Index n_columns() const { return centering.size(); }
    Eigen::RowVectorXd raw_row(double x) const;
    Eigen::RowVectorXd centered_row(double x) const;
    Eigen::MatrixXd centered_matrix(std::span<const double> x) const;
};

/// Binary columns (<= 2 distinct values) become linear terms; columns with
/// fewer than n_basis distinct values fall back to linear with a flag.
SplineBasis build_basis(const std::string& name, std::span<const double> x,
                        int degree = kDefaultSplineDegree, int n_basis = kDefaultNBasis);

struct GamConfig {
    int degree = kDefaultSplineDegree;
    int n_basis = kDefaultNBasis;
    double lambda_log10_min = -3.0;
    double lambda_log10_max = 6.0;
    int lambda_grid_points = 25;
    int lambda_sweeps = 3;
    std::size_t min_rows = 50;
    // Skip GCV selection and pin every spline lambda to this value. Forward
    // selection scores candidates this way so each candidate's edf prices the
    // full flexibility it was granted rather than a GCV-pretuned fit.
    std::optional<double> fixed_lambda;
};

struct GamTerm {
    SplineBasis basis;
    Eigen::VectorXd coefs;
    double lambda = 0.0; // 0 for unpenalized linear terms
    Eigen::MatrixXd cov; // posterior covariance block
};

struct GamModel {
    std::vector<GamTerm> terms;
    double intercept = 0.0;
    double sigma2 = 0.0;
    double edf = 0.0;
    double gcv = 0.0;
    double train_r2 = 0.0;
    std::optional<double> val_r2;

    const GamTerm* find_term(const std::string& name) const;
    /// x holds one value per term, in model term order.
    double predict_row(std::span<const double> x) const;
    /// cols holds one column per term, in model term order.
    std::vector<double> predict(const std::vector<std::vector<double>>& cols) const;
};

/// Penalized least squares with identity link: (D'D + P) beta = D'y over
/// D = [1 | centered bases], P = blockdiag(0, lambda_f * D2'D2). Smoothing
/// lambdas are chosen per feature by cyclic descent over a log grid
/// minimizing GCV = n*RSS/(n - edf)^2.
GamModel gam_fit(const std::vector<std::string>& names,
                 const std::vector<std::vector<double>>& cols, std::span<const double> y,
                 const GamConfig& config = {});

struct ForwardStep {
    std::string feature;
    double aic = 0.0;
    bool accepted = false;
    std::string note;
};

struct ForwardSelection {
    std::vector<std::size_t> selected; // candidate indices in acceptance order
    std::vector<ForwardStep> trace;
    GamModel model;
};

/// Greedy forward selection minimizing AIC = n*ln(RSS/n) + 2*(edf + 1),
/// starting from the intercept-only model. Candidates whose fit fails are
/// skipped with a note in the trace.
ForwardSelection forward_select_aic(const std::vector<std::string>& names,
                                    const std::vector<std::vector<double>>& cols,
                                    std::span<const double> y, const GamConfig& config = {});

struct PartialDependence {
    std::vector<double> grid;
    std::vector<double> s;
    std::vector<double> lower; // s - 1.96 * pointwise sd
    std::vector<double> upper;
};

PartialDependence partial_dependence(const GamModel& model, const std::string& feature,
                                     std::size_t grid_size = 100);

struct PermutationReport {
    std::vector<std::string> names;
    std::vector<double> delta_r2;             // mean over repeats
    std::vector<std::vector<double>> repeats; // [feature][repeat] delta R^2
    std::size_t n_repeats = 0;
    std::uint64_t seed = 0;
};

/// R^2 with one term's column permuted; the injectable permutation lets
/// callers verify the identity permutation leaves R^2 unchanged.
double permuted_r2(const GamModel& model, const std::vector<std::vector<double>>& cols,
                   std::span<const double> y, std::size_t feature,
                   std::span<const std::size_t> perm);

PermutationReport permutation_importance(const GamModel& model,
                                         const std::vector<std::vector<double>>& cols,
                                         std::span<const double> y, std::size_t n_repeats = 10,
                                         std::uint64_t seed = 0);

void save_gam_model(const std::string& path, const GamModel& model);
GamModel load_gam_model(const std::string& path);
void write_partial_dependence_csv(const std::string& path, const PartialDependence& pd);
void write_importance_json(const std::string& path, const PermutationReport& report);

} // namespace polarlens
