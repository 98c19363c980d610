#include "polarlens/gam.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"
#include "polarlens/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace polarlens {

namespace {

// Second-order difference penalty K = D2' * D2 for an m-coefficient block.
Eigen::MatrixXd difference_penalty(Eigen::Index m) {
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(m - 2, m);
    for (Eigen::Index r = 0; r < m - 2; ++r) {
        d2(r, r) = 1.0;
        d2(r, r + 1) = -2.0;
        d2(r, r + 2) = 1.0;
    }
    return d2.transpose() * d2;
}

// Orthonormal basis of the complement of the ones vector. Centered spline
// columns annihilate constant coefficient vectors and so does the difference
// penalty, so that direction must be removed or the system is singular.
Eigen::MatrixXd null_remover(Eigen::Index m) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
    w[0] -= 1.0;
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
    double nrm = w.norm();
    if (nrm > 0.0) {
        w /= nrm;
        h -= 2.0 * w * w.transpose();
    }
    return h.rightCols(m - 1);
}

struct Design {
    std::vector<SplineBasis> bases;
    std::vector<Eigen::Index> offsets; // reduced-space column offset of each block
    std::vector<Eigen::Index> widths;  // reduced block width
    std::vector<Eigen::MatrixXd> zmaps; // block coefficient maps; empty for linear terms
    std::vector<Eigen::MatrixXd> penalties; // reduced penalties; empty for linear terms
    Eigen::MatrixXd d;
    Eigen::MatrixXd dtd; // cached once; every GCV evaluation reuses it
    Eigen::VectorXd dty;
    double yty = 0.0;
    double sstot = 0.0;
    std::size_t n = 0;
    Eigen::Index p = 0;
};

Design build_design(const std::vector<std::string>& names,
                    const std::vector<std::vector<double>>& cols, std::span<const double> y,
                    const GamConfig& config) {
    if (names.size() != cols.size()) throw domain_error("gam_fit: names/columns mismatch");
    const std::size_t n = y.size();
    if (n < config.min_rows)
        throw domain_error("gam_fit: need at least " + std::to_string(config.min_rows) +
                           " rows, got " + std::to_string(n));
    for (double v : y)
        if (!std::isfinite(v)) throw domain_error("gam_fit: non-finite response");
    for (std::size_t f = 0; f < cols.size(); ++f)
        if (cols[f].size() != n)
            throw domain_error("gam_fit: column " + names[f] + " has wrong length");

    Design dz;
    dz.n = n;
    dz.p = 1;
    for (std::size_t f = 0; f < cols.size(); ++f) {
        dz.bases.push_back(build_basis(names[f], cols[f], config.degree, config.n_basis));
        const auto& b = dz.bases.back();
        if (b.kind == TermKind::spline) {
            dz.zmaps.push_back(null_remover(b.n_columns()));
            dz.penalties.push_back(dz.zmaps.back().transpose() *
                                   difference_penalty(b.n_columns()) * dz.zmaps.back());
        } else {
            dz.zmaps.emplace_back();
            dz.penalties.emplace_back();
        }
        dz.offsets.push_back(dz.p);
        dz.widths.push_back(b.kind == TermKind::spline ? b.n_columns() - 1 : b.n_columns());
        dz.p += dz.widths.back();
    }

    dz.d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), dz.p);
    dz.d.col(0).setOnes();
    for (std::size_t f = 0; f < cols.size(); ++f) {
        const auto& b = dz.bases[f];
        Eigen::MatrixXd block = b.centered_matrix(cols[f]);
        if (b.kind == TermKind::spline) block = block * dz.zmaps[f];
        dz.d.block(0, dz.offsets[f], static_cast<Eigen::Index>(n), dz.widths[f]) = block;
    }

    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    dz.dtd = dz.d.transpose() * dz.d;
    dz.dty = dz.d.transpose() * yv;
    dz.yty = yv.dot(yv);
    double mean = yv.mean();
    dz.sstot = dz.yty - static_cast<double>(n) * mean * mean;
    if (dz.sstot <= 0.0) throw degenerate_error("gam_fit: response has zero variance");
    return dz;
}

struct Eval {
    bool ok = false;
    double rss = 0.0;
    double edf = 0.0;
    double gcv = 0.0;
    Eigen::VectorXd beta;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
};

Eval evaluate(const Design& dz, const std::vector<double>& lambdas, bool keep_factor) {
    Eigen::MatrixXd a = dz.dtd;
    for (std::size_t f = 0; f < dz.bases.size(); ++f) {
        if (dz.penalties[f].size() == 0) continue;
        Eigen::Index off = dz.offsets[f], m = dz.widths[f];
        a.block(off, off, m, m) += lambdas[f] * dz.penalties[f];
    }
    Eval ev;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return ev;
    Eigen::VectorXd piv = ldlt.vectorD();
    double pmax = piv.maxCoeff();
    if (!(pmax > 0.0) || piv.minCoeff() < pmax * 1e-12) return ev; // rank deficient
    ev.beta = ldlt.solve(dz.dty);
    if (!ev.beta.allFinite()) return ev;
    Eigen::MatrixXd influence = ldlt.solve(dz.dtd); // (D'D + P)^-1 D'D
    ev.edf = influence.trace();
    if (!std::isfinite(ev.edf)) return ev;
    double rss = dz.yty - 2.0 * ev.beta.dot(dz.dty) + ev.beta.dot(dz.dtd * ev.beta);
    ev.rss = std::max(rss, 0.0);
    double denom = static_cast<double>(dz.n) - ev.edf;
    if (denom <= 0.0) return ev;
    ev.gcv = static_cast<double>(dz.n) * ev.rss / (denom * denom);
    ev.ok = true;
    if (keep_factor) ev.ldlt = std::move(ldlt);
    return ev;
}

std::vector<double> lambda_grid(const GamConfig& config) {
    std::vector<double> grid;
    int k = std::max(config.lambda_grid_points, 2);
    grid.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        double t = config.lambda_log10_min +
                   (config.lambda_log10_max - config.lambda_log10_min) * i / (k - 1);
        grid.push_back(std::pow(10.0, t));
    }
    return grid;
}

} // namespace

const GamTerm* GamModel::find_term(const std::string& name) const {
    for (const auto& t : terms)
        if (t.basis.name == name) return &t;
    return nullptr;
}

double GamModel::predict_row(std::span<const double> x) const {
    if (x.size() != terms.size()) throw domain_error("predict_row: arity mismatch");
    double y = intercept;
    for (std::size_t f = 0; f < terms.size(); ++f)
        y += terms[f].basis.centered_row(x[f]).dot(terms[f].coefs);
    return y;
}

std::vector<double> GamModel::predict(const std::vector<std::vector<double>>& cols) const {
    if (cols.size() != terms.size()) throw domain_error("predict: column count mismatch");
    std::size_t n = terms.empty() ? 0 : cols[0].size();
    for (const auto& c : cols)
        if (c.size() != n) throw domain_error("predict: ragged columns");
    Eigen::VectorXd acc = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), intercept);
    for (std::size_t f = 0; f < terms.size(); ++f)
        acc += terms[f].basis.centered_matrix(cols[f]) * terms[f].coefs;
    return {acc.data(), acc.data() + acc.size()};
}

GamModel gam_fit(const std::vector<std::string>& names,
                 const std::vector<std::vector<double>>& cols, std::span<const double> y,
                 const GamConfig& config) {
    if (config.fixed_lambda && !(*config.fixed_lambda > 0.0))
        throw domain_error("gam_fit: fixed_lambda must be > 0");
    Design dz = build_design(names, cols, y, config);
    const std::size_t nf = dz.bases.size();

    std::vector<double> lambdas(nf, config.fixed_lambda.value_or(1.0));
    const std::vector<double> grid = lambda_grid(config);
    bool any_spline = false;
    for (std::size_t f = 0; f < nf; ++f)
        if (dz.penalties[f].size() != 0) any_spline = true;

    if (any_spline && !config.fixed_lambda) {
        for (int sweep = 0; sweep < config.lambda_sweeps; ++sweep) {
            bool changed = false;
            for (std::size_t f = 0; f < nf; ++f) {
                if (dz.penalties[f].size() == 0) continue;
                double best_gcv = std::numeric_limits<double>::infinity();
                double best_lambda = lambdas[f];
                for (double cand : grid) {
                    std::vector<double> trial = lambdas;
                    trial[f] = cand;
                    Eval ev = evaluate(dz, trial, false);
                    if (ev.ok && ev.gcv < best_gcv) {
                        best_gcv = ev.gcv;
                        best_lambda = cand;
                    }
                }
                if (best_lambda != lambdas[f]) {
                    lambdas[f] = best_lambda;
                    changed = true;
                }
            }
            if (!changed) break;
        }
    }

    Eval fin = evaluate(dz, lambdas, true);
    if (!fin.ok)
        throw degenerate_error("gam_fit: singular system after penalization");

    GamModel model;
    model.intercept = fin.beta[0];
    model.edf = fin.edf;
    model.gcv = fin.gcv;
    model.sigma2 = fin.rss / (static_cast<double>(dz.n) - fin.edf);
    model.train_r2 = 1.0 - fin.rss / dz.sstot;

    Eigen::MatrixXd ainv = fin.ldlt.solve(Eigen::MatrixXd::Identity(dz.p, dz.p));
    for (std::size_t f = 0; f < nf; ++f) {
        GamTerm term;
        term.basis = dz.bases[f];
        Eigen::Index off = dz.offsets[f], m = dz.widths[f];
        term.lambda = dz.penalties[f].size() == 0 ? 0.0 : lambdas[f];
        if (dz.bases[f].kind == TermKind::spline) {
            term.coefs = dz.zmaps[f] * fin.beta.segment(off, m);
            term.cov = model.sigma2 * dz.zmaps[f] * ainv.block(off, off, m, m) *
                       dz.zmaps[f].transpose();
        } else {
            term.coefs = fin.beta.segment(off, m);
            term.cov = model.sigma2 * ainv.block(off, off, m, m);
        }
        model.terms.push_back(std::move(term));
    }
    return model;
}

PartialDependence partial_dependence(const GamModel& model, const std::string& feature,
                                     std::size_t grid_size) {
    const GamTerm* term = model.find_term(feature);
    if (!term) throw domain_error("partial_dependence: unknown feature " + feature);
    if (grid_size < 2) throw domain_error("partial_dependence: grid_size must be >= 2");

    PartialDependence pd;
    const auto& b = term->basis;
    for (std::size_t i = 0; i < grid_size; ++i) {
        double x = b.x_min + (b.x_max - b.x_min) * static_cast<double>(i) /
                                 static_cast<double>(grid_size - 1);
        Eigen::RowVectorXd row = b.centered_row(x);
        double s = row.dot(term->coefs);
        double var = row * term->cov * row.transpose();
        double half = 1.96 * std::sqrt(std::max(var, 0.0));
        pd.grid.push_back(x);
        pd.s.push_back(s);
        pd.lower.push_back(s - half);
        pd.upper.push_back(s + half);
    }
    return pd;
}

double permuted_r2(const GamModel& model, const std::vector<std::vector<double>>& cols,
                   std::span<const double> y, std::size_t feature,
                   std::span<const std::size_t> perm) {
    if (feature >= model.terms.size()) throw domain_error("permuted_r2: feature out of range");
    if (perm.size() != y.size()) throw domain_error("permuted_r2: permutation length mismatch");
    std::vector<double> yhat = model.predict(cols);
    // Permuting a column only permutes that term's per-row contribution.
    Eigen::VectorXd contrib =
        model.terms[feature].basis.centered_matrix(cols[feature]) * model.terms[feature].coefs;
    std::vector<double> adjusted(yhat);
    for (std::size_t i = 0; i < adjusted.size(); ++i)
        adjusted[i] += contrib[static_cast<Eigen::Index>(perm[i])] -
                       contrib[static_cast<Eigen::Index>(i)];
    return r_squared(y, adjusted);
}

PermutationReport permutation_importance(const GamModel& model,
                                         const std::vector<std::vector<double>>& cols,
                                         std::span<const double> y, std::size_t n_repeats,
                                         std::uint64_t seed) {
    if (n_repeats < 1) throw domain_error("permutation_importance: n_repeats must be >= 1");
    const std::size_t n = y.size();
    std::vector<double> yhat = model.predict(cols);
    double base = r_squared(y, yhat);

    PermutationReport rep;
    rep.n_repeats = n_repeats;
    rep.seed = seed;
    Rng rng(seed);
    for (std::size_t f = 0; f < model.terms.size(); ++f) {
        rep.names.push_back(model.terms[f].basis.name);
        Eigen::VectorXd contrib =
            model.terms[f].basis.centered_matrix(cols[f]) * model.terms[f].coefs;
        std::vector<double> deltas;
        for (std::size_t r = 0; r < n_repeats; ++r) {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle_indices(perm);
            std::vector<double> adjusted(yhat);
            for (std::size_t i = 0; i < n; ++i)
                adjusted[i] += contrib[static_cast<Eigen::Index>(perm[i])] -
                               contrib[static_cast<Eigen::Index>(i)];
            deltas.push_back(base - r_squared(y, adjusted));
        }
        double mean = 0.0;
        for (double d : deltas) mean += d;
        rep.delta_r2.push_back(mean / static_cast<double>(n_repeats));
        rep.repeats.push_back(std::move(deltas));
    }
    return rep;
}

namespace {

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

nlohmann::ordered_json mat_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

void save_gam_model(const std::string& path, const GamModel& model) {
    nlohmann::ordered_json j;
    j["schema"] = "polarlens/1";
    j["features"] = nlohmann::ordered_json::array();
    for (const auto& t : model.terms) {
        nlohmann::ordered_json f;
        f["name"] = t.basis.name;
        f["kind"] = t.basis.kind == TermKind::spline ? "spline" : "linear";
        f["degree"] = t.basis.degree;
        f["knots"] = t.basis.knots;
        f["x_min"] = t.basis.x_min;
        f["x_max"] = t.basis.x_max;
        f["fallback"] = t.basis.fallback;
        f["centering"] = vec_json(t.basis.centering.transpose());
        f["coefs"] = vec_json(t.coefs);
        f["lambda"] = t.lambda;
        f["cov"] = mat_json(t.cov);
        j["features"].push_back(std::move(f));
    }
    j["intercept"] = model.intercept;
    j["sigma2"] = model.sigma2;
    j["edf"] = model.edf;
    j["gcv"] = model.gcv;
    j["train_r2"] = model.train_r2;
    if (model.val_r2)
        j["val_r2"] = *model.val_r2;
    else
        j["val_r2"] = nullptr;
    std::ofstream out(path);
    if (!out) throw io_error("cannot write GAM model: " + path);
    out << j.dump(2) << '\n';
}

GamModel load_gam_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open GAM model: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw io_error("malformed GAM model: " + path);

    GamModel model;
    model.intercept = j.at("intercept").get<double>();
    model.sigma2 = j.at("sigma2").get<double>();
    model.edf = j.at("edf").get<double>();
    model.gcv = j.at("gcv").get<double>();
    model.train_r2 = j.at("train_r2").get<double>();
    if (j.contains("val_r2") && !j["val_r2"].is_null())
        model.val_r2 = j["val_r2"].get<double>();
    for (const auto& f : j.at("features")) {
        GamTerm t;
        t.basis.name = f.at("name").get<std::string>();
        t.basis.kind = f.at("kind").get<std::string>() == "spline" ? TermKind::spline
                                                                   : TermKind::linear;
        t.basis.degree = f.at("degree").get<int>();
        t.basis.knots = f.at("knots").get<std::vector<double>>();
        t.basis.x_min = f.at("x_min").get<double>();
        t.basis.x_max = f.at("x_max").get<double>();
        t.basis.fallback = f.value("fallback", false);
        auto centering = f.at("centering").get<std::vector<double>>();
        t.basis.centering = Eigen::Map<const Eigen::RowVectorXd>(
            centering.data(), static_cast<Eigen::Index>(centering.size()));
        auto coefs = f.at("coefs").get<std::vector<double>>();
        t.coefs = Eigen::Map<const Eigen::VectorXd>(coefs.data(),
                                                    static_cast<Eigen::Index>(coefs.size()));
        t.lambda = f.at("lambda").get<double>();
        auto cov_rows = f.at("cov").get<std::vector<std::vector<double>>>();
        t.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cov_rows.size()),
                                      static_cast<Eigen::Index>(cov_rows.size()));
        for (std::size_t r = 0; r < cov_rows.size(); ++r)
            for (std::size_t c = 0; c < cov_rows[r].size(); ++c)
                t.cov(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    cov_rows[r][c];
        model.terms.push_back(std::move(t));
    }
    return model;
}

void write_partial_dependence_csv(const std::string& path, const PartialDependence& pd) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write partial dependence: " + path);
    out.precision(17);
    out << "grid,s,lower,upper\n";
    for (std::size_t i = 0; i < pd.grid.size(); ++i)
        out << pd.grid[i] << ',' << pd.s[i] << ',' << pd.lower[i] << ',' << pd.upper[i] << '\n';
}

void write_importance_json(const std::string& path, const PermutationReport& report) {
    nlohmann::ordered_json j;
    j["schema"] = "polarlens/1";
    j["n_repeats"] = report.n_repeats;
    j["seed"] = report.seed;
    j["features"] = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < report.names.size(); ++f) {
        nlohmann::ordered_json e;
        e["name"] = report.names[f];
        e["delta_r2"] = report.delta_r2[f];
        e["repeats"] = report.repeats[f];
        j["features"].push_back(std::move(e));
    }
    std::ofstream out(path);
    if (!out) throw io_error("cannot write importance report: " + path);
    out << j.dump(2) << '\n';
}

} // namespace polarlens
