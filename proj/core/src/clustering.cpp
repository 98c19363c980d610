#include "polarlens/clustering.hpp"

#include "polarlens/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>

namespace polarlens {

namespace {

double dot_d(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

double norm_d(std::span<const float> v) { return std::sqrt(dot_d(v, v)); }

struct Farthest {
    double dist = -1.0;
    std::size_t index = EmbeddingMatrix::npos;

    void consider(double d, std::size_t i) {
        if (d > dist || (d == dist && i < index)) {
            dist = d;
            index = i;
        }
    }
    void merge(const Farthest& o) { consider(o.dist, o.index); }
};

struct CenterSet {
    std::vector<float> data; // K x E row-major, unit norm
    std::vector<double> norms;
    std::size_t dim = 0;

    std::size_t k() const { return norms.size(); }
    std::span<const float> row(std::size_t c) const { return {data.data() + c * dim, dim}; }

    void push(std::span<const float> v) {
        data.insert(data.end(), v.begin(), v.end());
        norms.push_back(norm_d(v));
    }
    void refresh_norms() {
        for (std::size_t c = 0; c < k(); ++c) norms[c] = norm_d(row(c));
    }
};

// Nearest center by cosine similarity; ties resolved to the lowest index by
// the strict > comparison over increasing c.
std::pair<std::uint32_t, double> nearest(const CenterSet& cs, std::span<const float> x,
                                         double xnorm) {
    std::uint32_t best = 0;
    double best_sim = -2.0;
    for (std::size_t c = 0; c < cs.k(); ++c) {
        double sim = dot_d(x, cs.row(c)) / (xnorm * cs.norms[c]);
        if (sim > best_sim) {
            best_sim = sim;
            best = static_cast<std::uint32_t>(c);
        }
    }
    return {best, std::clamp(best_sim, -1.0, 1.0)};
}

// Assigns points in [range] batches against fixed centers; returns the
// farthest (distance, lowest index) point. Order-free in the batch split.
Farthest assign_pass(const EmbeddingMatrix& x, const std::vector<double>& xnorms,
                     const CenterSet& cs, std::size_t batch_size,
                     std::vector<std::uint32_t>& out) {
    const std::size_t n = x.rows();
    std::size_t batch = std::max<std::size_t>(1, batch_size);
    std::size_t n_batches = (n + batch - 1) / batch;
    std::vector<Farthest> partial(n_batches);
    parallel_chunks(n_batches, 1, [&](std::size_t bb, std::size_t be) {
        for (std::size_t b = bb; b < be; ++b) {
            std::size_t lo = b * batch, hi = std::min(n, lo + batch);
            for (std::size_t i = lo; i < hi; ++i) {
                auto [c, sim] = nearest(cs, x.row(i), xnorms[i]);
                out[i] = c;
                partial[b].consider(1.0 - sim, i);
            }
        }
    });
    Farthest far;
    for (const auto& p : partial) far.merge(p);
    return far;
}

// Recomputes centers as normalized member means, accumulating in point-index
// order so the result does not depend on the batch split. Empty clusters are
// dropped and indices remapped in place.
void update_centers(const EmbeddingMatrix& x, std::vector<std::uint32_t>& assignments,
                    CenterSet& cs, std::vector<std::size_t>& counts) {
    const std::size_t kk = cs.k(), e = cs.dim, n = x.rows();
    std::vector<double> sums(kk * e, 0.0);
    counts.assign(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = x.row(i);
        double* s = sums.data() + assignments[i] * e;
        for (std::size_t j = 0; j < e; ++j) s[j] += r[j];
        ++counts[assignments[i]];
    }
    std::vector<std::uint32_t> remap(kk, kUnassigned);
    std::vector<float> new_data;
    std::vector<std::size_t> new_counts;
    new_data.reserve(cs.data.size());
    for (std::size_t c = 0; c < kk; ++c) {
        if (counts[c] == 0) continue;
        remap[c] = static_cast<std::uint32_t>(new_counts.size());
        double* s = sums.data() + c * e;
        double norm = 0.0;
        for (std::size_t j = 0; j < e; ++j) norm += s[j] * s[j];
        norm = std::sqrt(norm);
        if (norm <= 1e-300) {
            // Antipodal members cancel out; keep the previous center.
            auto old = cs.row(c);
            new_data.insert(new_data.end(), old.begin(), old.end());
        } else {
            for (std::size_t j = 0; j < e; ++j)
                new_data.push_back(static_cast<float>(s[j] / norm));
        }
        new_counts.push_back(counts[c]);
    }
    for (auto& a : assignments) a = remap[a];
    cs.data = std::move(new_data);
    cs.norms.resize(new_counts.size());
    cs.refresh_norms();
    counts = std::move(new_counts);
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw io_error("truncated cluster file: " + path);
    return v;
}

} // namespace

DpMeansResult dpmeans_fit(const EmbeddingMatrix& x, const DpMeansOptions& opts) {
    const std::size_t n = x.rows(), e = x.dim();
    if (n < 1) throw domain_error("dpmeans_fit: empty input");
    if (!(opts.lambda_dist > 0.0 && opts.lambda_dist < 2.0))
        throw domain_error("dpmeans_fit: lambda_dist must be in (0, 2)");
    if (opts.max_iter < 1) throw domain_error("dpmeans_fit: max_iter must be >= 1");
    x.check_unit_norm();

    std::vector<double> xnorms(n);
    for (std::size_t i = 0; i < n; ++i) xnorms[i] = norm_d(x.row(i));

    CenterSet cs;
    cs.dim = e;
    {
        std::vector<double> mean(e, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = x.row(i);
            for (std::size_t j = 0; j < e; ++j) mean[j] += r[j];
        }
        double norm = 0.0;
        for (double v : mean) norm += v * v;
        norm = std::sqrt(norm);
        std::vector<float> c0(e);
        if (norm <= 1e-300) {
            // Antipodal data with a zero mean: seed from the first point.
            auto r = x.row(0);
            std::copy(r.begin(), r.end(), c0.begin());
        } else {
            for (std::size_t j = 0; j < e; ++j) c0[j] = static_cast<float>(mean[j] / norm);
        }
        cs.push(c0);
    }

    DpMeansResult res;
    res.assignments.assign(n, 0);
    std::vector<std::uint32_t> next(n, 0);
    std::vector<std::size_t> counts{n};
    bool converged = false;

    std::size_t batch = std::max<std::size_t>(1, opts.batch_size);
    for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
        res.iterations = iter;
        bool spawned = false;
        if (opts.spawn_per_batch) {
            for (std::size_t lo = 0; lo < n; lo += batch) {
                std::size_t hi = std::min(n, lo + batch);
                Farthest far;
                std::mutex far_mu;
                parallel_chunks(hi - lo, 512, [&](std::size_t b, std::size_t e2) {
                    Farthest local;
                    for (std::size_t i = lo + b; i < lo + e2; ++i) {
                        auto [c, sim] = nearest(cs, x.row(i), xnorms[i]);
                        next[i] = c;
                        local.consider(1.0 - sim, i);
                    }
                    std::lock_guard<std::mutex> lock(far_mu);
                    far.merge(local);
                });
                if (far.dist > opts.lambda_dist) {
                    next[far.index] = static_cast<std::uint32_t>(cs.k());
                    cs.push(x.row(far.index));
                    spawned = true;
                }
            }
        } else {
            Farthest far = assign_pass(x, xnorms, cs, batch, next);
            if (far.dist > opts.lambda_dist) {
                next[far.index] = static_cast<std::uint32_t>(cs.k());
                cs.push(x.row(far.index));
                spawned = true;
            }
        }
        bool unchanged = !spawned && next == res.assignments;
        res.assignments = next;
        update_centers(x, res.assignments, cs, counts);
        if (unchanged) {
            converged = true;
            break;
        }
    }

    res.model.centers = std::move(cs.data);
    res.model.dim = e;
    res.model.counts = std::move(counts);
    res.model.lambda_dist = opts.lambda_dist;
    res.model.min_assign_sim = opts.min_assign_sim;

    if (!converged) {
        // Sync assignments to the final centers and report a pending spawn.
        CenterSet fin;
        fin.dim = e;
        fin.data = res.model.centers;
        fin.norms.resize(res.model.k());
        fin.refresh_norms();
        Farthest far = assign_pass(x, xnorms, fin, batch, res.assignments);
        res.model.counts.assign(res.model.k(), 0);
        for (auto a : res.assignments) ++res.model.counts[a];
        res.model.warning = far.dist > opts.lambda_dist;
        if (std::find(res.model.counts.begin(), res.model.counts.end(), 0u) !=
            res.model.counts.end()) {
            std::vector<std::uint32_t> remap(res.model.k(), kUnassigned);
            std::vector<float> keep_data;
            std::vector<std::size_t> keep_counts;
            for (std::size_t c = 0; c < res.model.k(); ++c) {
                if (res.model.counts[c] == 0) continue;
                remap[c] = static_cast<std::uint32_t>(keep_counts.size());
                auto r = res.model.center(c);
                keep_data.insert(keep_data.end(), r.begin(), r.end());
                keep_counts.push_back(res.model.counts[c]);
            }
            for (auto& a : res.assignments) a = remap[a];
            res.model.centers = std::move(keep_data);
            res.model.counts = std::move(keep_counts);
        }
    }
    return res;
}

std::vector<std::uint32_t> assign(const ClusterModel& model, const EmbeddingMatrix& x) {
    if (x.dim() != model.dim) throw domain_error("assign: dimension mismatch");
    if (model.k() == 0) throw domain_error("assign: empty model");
    CenterSet cs;
    cs.dim = model.dim;
    cs.data = model.centers;
    cs.norms.resize(model.k());
    cs.refresh_norms();

    std::vector<std::uint32_t> out(x.rows(), kUnassigned);
    parallel_chunks(x.rows(), 1024, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto r = x.row(i);
            auto [c, sim] = nearest(cs, r, norm_d(r));
            if (sim >= model.min_assign_sim) out[i] = c;
        }
    });
    return out;
}

std::size_t representative(const ClusterModel& model, std::size_t cluster,
                           const EmbeddingMatrix& x, const std::vector<std::size_t>& members) {
    if (cluster >= model.k()) throw domain_error("representative: cluster index out of range");
    if (members.empty()) throw domain_error("representative: empty member set");
    auto c = model.center(cluster);
    double cn = norm_d(c);
    std::size_t best = members[0];
    double best_sim = -2.0;
    for (std::size_t m : members) {
        if (m >= x.rows()) throw domain_error("representative: member index out of range");
        auto r = x.row(m);
        double sim = dot_d(r, c) / (norm_d(r) * cn);
        if (sim > best_sim || (sim == best_sim && m < best)) {
            best_sim = sim;
            best = m;
        }
    }
    return best;
}

void save_cluster_model(const std::string& bin_path, const std::string& json_path,
                        const ClusterModel& m) {
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw io_error("cannot write cluster model: " + bin_path);
    out.write("EMB1", 4);
    write_u32(out, static_cast<std::uint32_t>(m.k()));
    write_u32(out, static_cast<std::uint32_t>(m.dim));
    out.write(reinterpret_cast<const char*>(m.centers.data()),
              static_cast<std::streamsize>(m.centers.size() * sizeof(float)));
    if (!out) throw io_error("write failed: " + bin_path);
    out.close();

    nlohmann::ordered_json meta;
    meta["schema"] = "polarlens/1";
    meta["counts"] = m.counts;
    meta["lambda_dist"] = m.lambda_dist;
    meta["min_assign_sim"] = m.min_assign_sim;
    meta["warning"] = m.warning;
    std::ofstream js(json_path);
    if (!js) throw io_error("cannot write cluster sidecar: " + json_path);
    js << meta.dump(2) << "\n";
}

ClusterModel load_cluster_model(const std::string& bin_path, const std::string& json_path) {
    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw io_error("cannot open cluster model: " + bin_path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "EMB1", 4) != 0)
        throw io_error("bad magic in cluster model: " + bin_path);
    std::uint32_t kk = read_u32(in, bin_path);
    std::uint32_t e = read_u32(in, bin_path);
    ClusterModel m;
    m.dim = e;
    m.centers.resize(static_cast<std::size_t>(kk) * e);
    if (!in.read(reinterpret_cast<char*>(m.centers.data()),
                 static_cast<std::streamsize>(m.centers.size() * sizeof(float))))
        throw io_error("truncated cluster model: " + bin_path);

    std::ifstream js(json_path);
    if (!js) throw io_error("cannot open cluster sidecar: " + json_path);
    nlohmann::json meta = nlohmann::json::parse(js, nullptr, false);
    if (meta.is_discarded()) throw io_error("malformed cluster sidecar: " + json_path);
    m.counts = meta.at("counts").get<std::vector<std::size_t>>();
    m.lambda_dist = meta.at("lambda_dist").get<double>();
    m.min_assign_sim = meta.at("min_assign_sim").get<double>();
    m.warning = meta.value("warning", false);
    if (m.counts.size() != kk)
        throw io_error("cluster sidecar counts do not match center rows: " + json_path);
    return m;
}

} // namespace polarlens
