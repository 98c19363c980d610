#include "polarlens/ideology.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace polarlens {

namespace {

// The standardized residual operator S = D_r^{-1/2} (P - r c') D_c^{-1/2}
// applied without ever forming the dense matrix. P = F / N with binary F.
struct ResidualOperator {
    const FollowMatrix* f;
    Eigen::VectorXd r;       // row masses
    Eigen::VectorXd c;       // column masses
    Eigen::VectorXd sqrt_r;
    Eigen::VectorXd sqrt_c;
    double n_total = 0.0;

    // y = S x, x over columns, y over rows.
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        Eigen::VectorXd xs = x.cwiseQuotient(sqrt_c);
        double alpha = sqrt_c.dot(x); // c' D_c^{-1/2} x
        Eigen::VectorXd y(static_cast<Eigen::Index>(f->rows.size()));
        for (std::size_t i = 0; i < f->row_cols.size(); ++i) {
            double acc = 0.0;
            for (std::uint32_t j : f->row_cols[i]) acc += xs[j];
            auto ii = static_cast<Eigen::Index>(i);
            y[ii] = (acc / n_total - r[ii] * alpha) / sqrt_r[ii];
        }
        return y;
    }

    // z = S' y.
    Eigen::VectorXd apply_t(const Eigen::VectorXd& y) const {
        Eigen::VectorXd ys = y.cwiseQuotient(sqrt_r);
        double beta = sqrt_r.dot(y);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f->cols.size()));
        for (std::size_t i = 0; i < f->row_cols.size(); ++i)
            for (std::uint32_t j : f->row_cols[i]) z[j] += ys[static_cast<Eigen::Index>(i)];
        z /= n_total;
        z -= beta * c;
        return z.cwiseQuotient(sqrt_c);
    }
};

ResidualOperator make_operator(const FollowMatrix& f) {
    ResidualOperator op;
    op.f = &f;
    const auto n = static_cast<Eigen::Index>(f.rows.size());
    const auto m = static_cast<Eigen::Index>(f.cols.size());
    if (n == 0 || m == 0) throw domain_error("ca_fit: empty follow matrix");
    op.n_total = static_cast<double>(f.nnz());
    op.r = Eigen::VectorXd::Zero(n);
    op.c = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < f.row_cols.size(); ++i) {
        op.r[static_cast<Eigen::Index>(i)] =
            static_cast<double>(f.row_cols[i].size()) / op.n_total;
        for (std::uint32_t j : f.row_cols[i]) op.c[j] += 1.0 / op.n_total;
    }
    if ((op.r.array() <= 0.0).any())
        throw domain_error("ca_fit: all-zero row in follow matrix");
    if ((op.c.array() <= 0.0).any())
        throw domain_error("ca_fit: all-zero column in follow matrix");
    op.sqrt_r = op.r.cwiseSqrt();
    op.sqrt_c = op.c.cwiseSqrt();
    return op;
}

} // namespace

std::vector<std::pair<std::string, std::string>> load_follows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open follows: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty follows file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "user_id,elite_id")
        throw io_error("follows.csv: expected header user_id,elite_id, got \"" + line + "\"");
    std::vector<std::pair<std::string, std::string>> edges;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
            throw io_error("follows.csv line " + std::to_string(lineno) + ": expected 2 fields");
        edges.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
    return edges;
}

FollowMatrix build_follow_matrix(const std::vector<std::pair<std::string, std::string>>& edges,
                                 std::size_t min_follows) {
    std::map<std::string, std::set<std::string>> by_user;
    for (const auto& [u, e] : edges) by_user[u].insert(e);

    std::set<std::string> col_ids;
    for (const auto& [u, followed] : by_user)
        if (followed.size() >= min_follows)
            col_ids.insert(followed.begin(), followed.end());

    FollowMatrix f;
    f.cols.assign(col_ids.begin(), col_ids.end());
    std::map<std::string, std::uint32_t> col_idx;
    for (std::size_t j = 0; j < f.cols.size(); ++j)
        col_idx.emplace(f.cols[j], static_cast<std::uint32_t>(j));

    std::vector<bool> col_used(f.cols.size(), false);
    for (const auto& [u, followed] : by_user) {
        if (followed.size() < min_follows) continue;
        std::vector<std::uint32_t> idx;
        idx.reserve(followed.size());
        for (const auto& e : followed) {
            std::uint32_t j = col_idx.at(e);
            idx.push_back(j);
            col_used[j] = true;
        }
        f.rows.push_back(u);
        f.row_cols.push_back(std::move(idx)); // set iteration keeps these sorted
    }

    if (std::find(col_used.begin(), col_used.end(), false) != col_used.end()) {
        std::vector<std::uint32_t> remap(f.cols.size(), 0);
        std::vector<std::string> kept;
        for (std::size_t j = 0; j < f.cols.size(); ++j) {
            if (!col_used[j]) continue;
            remap[j] = static_cast<std::uint32_t>(kept.size());
            kept.push_back(f.cols[j]);
        }
        for (auto& rc : f.row_cols)
            for (auto& j : rc) j = remap[j];
        f.cols = std::move(kept);
    }
    return f;
}

double total_inertia(const FollowMatrix& f) {
    ResidualOperator op = make_operator(f);
    // sum_ij P_ij^2/(r_i c_j) - 1 over the sparse support (binary P).
    double acc = 0.0;
    const double inv_n2 = 1.0 / (op.n_total * op.n_total);
    for (std::size_t i = 0; i < f.row_cols.size(); ++i) {
        double ri = op.r[static_cast<Eigen::Index>(i)];
        for (std::uint32_t j : f.row_cols[i]) acc += inv_n2 / (ri * op.c[j]);
    }
    return acc - 1.0;
}

std::size_t CAModel::col_index(const std::string& id) const {
    auto it = std::lower_bound(cols.begin(), cols.end(), id);
    if (it == cols.end() || *it != id) return npos;
    return static_cast<std::size_t>(it - cols.begin());
}

CAModel ca_fit(const FollowMatrix& f, int d, const std::string& anchor) {
    if (d < 1) throw domain_error("ca_fit: dimensions must be >= 1");
    ResidualOperator op = make_operator(f);
    const auto m = static_cast<Eigen::Index>(f.cols.size());
    if (m < 2) throw domain_error("ca_fit: need at least 2 columns");
    if (!std::binary_search(f.cols.begin(), f.cols.end(), anchor))
        throw domain_error("ca_fit: anchor \"" + anchor + "\" is not a column");

    if (total_inertia(f) <= 1e-24)
        throw degenerate_error(
            "ca_fit: follow matrix is indistinguishable from independence (rank-1 margins)");

    // Subspace iteration on S'S with a deterministic seeded start block.
    const Eigen::Index want = std::min<Eigen::Index>(d, m - 1);
    const Eigen::Index block = std::min<Eigen::Index>(m - 1, want + 4);
    Rng rng(0x9d2c5680u);
    Eigen::MatrixXd q(m, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < m; ++i) q(i, j) = rng.next_gaussian();
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() *
        Eigen::MatrixXd::Identity(m, block);

    const double tol = 1e-10;
    const int max_iter = 1000;
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(block);
    Eigen::MatrixXd z(m, block);
    for (int it = 0; it < max_iter; ++it) {
        for (Eigen::Index j = 0; j < block; ++j) z.col(j) = op.apply_t(op.apply(q.col(j)));
        Eigen::MatrixXd t = q.transpose() * z;
        t = 0.5 * (t + t.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        Eigen::VectorXd theta = es.eigenvalues().reverse();
        double scale = std::max(theta[0], 1e-300);
        if (it > 0 && ((theta.head(want) - prev.head(want)).cwiseAbs().maxCoeff() <=
                       tol * scale))
            break;
        prev = theta;
        q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() *
            Eigen::MatrixXd::Identity(m, block);
    }

    for (Eigen::Index j = 0; j < block; ++j) z.col(j) = op.apply_t(op.apply(q.col(j)));
    Eigen::MatrixXd t = q.transpose() * z;
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);

    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index j = 0; j < block; ++j) order.emplace_back(es.eigenvalues()[j], j);
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    Eigen::Index kept = 0;
    for (Eigen::Index j = 0; j < want; ++j)
        if (j < static_cast<Eigen::Index>(order.size()) && order[j].first > 1e-24) ++kept;
    if (kept == 0) throw degenerate_error("ca_fit: no positive singular values");

    CAModel model;
    model.cols = f.cols;
    model.col_masses = op.c;
    model.anchor = anchor;
    model.singular_values.resize(kept);
    model.col_std_coords.resize(m, kept);
    for (Eigen::Index k = 0; k < kept; ++k) {
        model.singular_values[k] = std::sqrt(order[k].first);
        Eigen::VectorXd v = q * es.eigenvectors().col(order[k].second);
        model.col_std_coords.col(k) = v.cwiseQuotient(op.sqrt_c);
    }

    auto a_idx = static_cast<Eigen::Index>(model.col_index(anchor));
    for (Eigen::Index k = 0; k < kept; ++k)
        if (model.col_std_coords(a_idx, k) < 0.0) model.col_std_coords.col(k) *= -1.0;
    return model;
}

Eigen::VectorXd ca_project(const CAModel& model, std::span<const std::uint32_t> follow_cols) {
    if (follow_cols.empty())
        throw domain_error("ca_project: row follows none of the model columns");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.dims());
    for (std::uint32_t j : follow_cols) {
        if (j >= model.cols.size()) throw domain_error("ca_project: column index out of range");
        acc += model.col_std_coords.row(static_cast<Eigen::Index>(j)).transpose();
    }
    acc /= static_cast<double>(follow_cols.size()); // profile . Gamma
    return acc.cwiseQuotient(model.singular_values);
}

Eigen::VectorXd ca_project_ids(const CAModel& model, const std::vector<std::string>& followed) {
    std::vector<std::uint32_t> idx;
    std::set<std::string> seen;
    for (const auto& id : followed) {
        if (!seen.insert(id).second) continue;
        std::size_t j = model.col_index(id);
        if (j != CAModel::npos) idx.push_back(static_cast<std::uint32_t>(j));
    }
    std::sort(idx.begin(), idx.end());
    return ca_project(model, idx);
}

EliteExpansion expand_elites(const std::map<std::string, double>& scores,
                             const std::map<std::string, std::set<std::string>>& follows,
                             const std::set<std::string>& candidates, double top_pct,
                             std::int64_t min_followers) {
    if (!(top_pct > 0.0 && top_pct <= 0.5))
        throw domain_error("expand_elites: top_pct must be in (0, 0.5]");
    if (scores.size() < 2) throw domain_error("expand_elites: need at least 2 scored users");

    std::vector<std::pair<std::string, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    auto quantile = static_cast<std::size_t>(
        std::floor(top_pct * static_cast<double>(ranked.size())));
    quantile = std::max<std::size_t>(1, quantile);

    EliteExpansion ex;
    for (std::size_t i = 0; i < quantile; ++i) ex.conservative_users.push_back(ranked[i].first);
    for (std::size_t i = 0; i < quantile; ++i)
        ex.liberal_users.push_back(ranked[ranked.size() - 1 - i].first);

    std::map<std::string, EliteCandidate> tally;
    for (const auto& id : candidates) tally[id] = {id, 0, 0};
    auto count_side = [&](const std::vector<std::string>& side, bool conservative) {
        for (const auto& u : side) {
            auto it = follows.find(u);
            if (it == follows.end()) continue;
            for (const auto& followed : it->second) {
                auto t = tally.find(followed);
                if (t == tally.end()) continue;
                if (conservative)
                    ++t->second.n_conservative;
                else
                    ++t->second.n_liberal;
            }
        }
    };
    count_side(ex.conservative_users, true);
    count_side(ex.liberal_users, false);

    for (const auto& [id, cand] : tally) {
        if (cand.n_conservative + cand.n_liberal < min_followers) continue;
        ex.conservative_ranked.push_back(cand);
        ex.liberal_ranked.push_back(cand);
    }
    std::sort(ex.conservative_ranked.begin(), ex.conservative_ranked.end(),
              [](const EliteCandidate& a, const EliteCandidate& b) {
                  if (a.pop_conservative() != b.pop_conservative())
                      return a.pop_conservative() > b.pop_conservative();
                  return a.id < b.id;
              });
    std::sort(ex.liberal_ranked.begin(), ex.liberal_ranked.end(),
              [](const EliteCandidate& a, const EliteCandidate& b) {
                  if (a.pop_liberal() != b.pop_liberal())
                      return a.pop_liberal() > b.pop_liberal();
                  return a.id < b.id;
              });
    return ex;
}

Standardized standardize(std::span<const double> values) {
    if (values.size() < 2) throw domain_error("standardize: need at least 2 values");
    Standardized out;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    if (var <= 0.0) throw degenerate_error("standardize: constant input");
    out.mean = mean;
    out.std = std::sqrt(var);
    out.z.reserve(values.size());
    for (double v : values) out.z.push_back((v - mean) / out.std);
    return out;
}

void save_ca_model(const std::string& path, const CAModel& model) {
    nlohmann::ordered_json j;
    j["schema"] = "polarlens/1";
    j["cols"] = model.cols;
    j["col_masses"] = std::vector<double>(model.col_masses.data(),
                                          model.col_masses.data() + model.col_masses.size());
    nlohmann::ordered_json coords = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < model.col_std_coords.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index k = 0; k < model.col_std_coords.cols(); ++k)
            row.push_back(model.col_std_coords(i, k));
        coords.push_back(std::move(row));
    }
    j["col_std_coords"] = std::move(coords);
    j["singular_values"] = std::vector<double>(
        model.singular_values.data(), model.singular_values.data() + model.singular_values.size());
    j["anchor"] = model.anchor;
    j["zmean"] = model.zmean;
    j["zstd"] = model.zstd;
    std::ofstream out(path);
    if (!out) throw io_error("cannot write CA model: " + path);
    out << j.dump(2) << '\n';
}

CAModel load_ca_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open CA model: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw io_error("malformed CA model: " + path);

    CAModel model;
    model.cols = j.at("cols").get<std::vector<std::string>>();
    auto masses = j.at("col_masses").get<std::vector<double>>();
    model.col_masses = Eigen::Map<const Eigen::VectorXd>(
        masses.data(), static_cast<Eigen::Index>(masses.size()));
    auto coords = j.at("col_std_coords").get<std::vector<std::vector<double>>>();
    auto sv = j.at("singular_values").get<std::vector<double>>();
    model.singular_values =
        Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    model.col_std_coords.resize(static_cast<Eigen::Index>(coords.size()),
                                static_cast<Eigen::Index>(sv.size()));
    for (std::size_t i = 0; i < coords.size(); ++i)
        for (std::size_t k = 0; k < coords[i].size(); ++k)
            model.col_std_coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                coords[i][k];
    model.anchor = j.at("anchor").get<std::string>();
    model.zmean = j.at("zmean").get<double>();
    model.zstd = j.at("zstd").get<double>();
    return model;
}

} // namespace polarlens
