#include "polarlens/graphs.hpp"

#include "polarlens/common.hpp"
#include "polarlens/text_clean.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace polarlens {

namespace {

std::uint32_t intern_node(MentionGraph& g, const std::string& id) {
    auto it = g.node_index.find(id);
    if (it != g.node_index.end()) return it->second;
    auto idx = static_cast<std::uint32_t>(g.nodes.size());
    g.nodes.push_back({id, std::nullopt, std::nullopt});
    g.node_index.emplace(id, idx);
    return idx;
}

std::optional<double> node_attr(const GraphNode& n, const std::string& attr) {
    if (attr == "toxicity") return n.toxicity;
    if (attr == "partisanship") return n.partisanship;
    throw domain_error("unknown node attribute: " + attr);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

MentionGraph build_mention_graph(const std::vector<Tweet>& tweets,
                                 const std::vector<UserProfile>& users,
                                 const std::map<std::string, double>& user_toxicity,
                                 bool restrict_to_known) {
    MentionGraph g;
    UserLookup lookup(users);
    for (const auto& u : users) {
        std::uint32_t idx = intern_node(g, u.id);
        g.nodes[idx].partisanship = u.partisanship;
        auto it = user_toxicity.find(u.id);
        if (it != user_toxicity.end()) g.nodes[idx].toxicity = it->second;
    }

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> weights;
    for (const auto& tw : tweets) {
        const UserProfile* author = lookup.by_id(tw.user_id);
        if (restrict_to_known && !author) continue;
        std::uint32_t src = intern_node(g, tw.user_id);
        for (const auto& handle : tw.mentions) {
            const UserProfile* target = lookup.by_handle(handle);
            std::uint32_t dst;
            if (target) {
                dst = g.node_index.at(target->id);
            } else {
                if (restrict_to_known) continue;
                dst = intern_node(g, "@" + ascii_lower(handle));
            }
            if (dst == src) continue;
            ++weights[{src, dst}];
        }
    }
    g.edges.reserve(weights.size());
    for (const auto& [key, w] : weights) g.edges.push_back({key.first, key.second, w});
    return g;
}

double numeric_assortativity(const MentionGraph& g, const std::string& attr,
                             const AssortativityOptions& opts) {
    std::vector<double> xs, ys, ws;
    for (const auto& e : g.edges) {
        auto x = node_attr(g.nodes[e.src], attr);
        auto y = node_attr(g.nodes[e.dst], attr);
        if (!x || !y) continue;
        double w = opts.weighted ? static_cast<double>(e.weight) : 1.0;
        xs.push_back(*x);
        ys.push_back(*y);
        ws.push_back(w);
        if (!opts.directed) {
            xs.push_back(*y);
            ys.push_back(*x);
            ws.push_back(w);
        }
    }
    if (xs.size() < 2)
        throw degenerate_error("assortativity undefined: fewer than 2 usable edges");

    double wsum = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        wsum += ws[i];
        mx += ws[i] * xs[i];
        my += ws[i] * ys[i];
    }
    mx /= wsum;
    my /= wsum;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        cov += ws[i] * dx * dy;
        vx += ws[i] * dx * dx;
        vy += ws[i] * dy * dy;
    }
    if (vx <= 0.0 || vy <= 0.0)
        throw degenerate_error("assortativity undefined: zero attribute variance over edges");
    return cov / std::sqrt(vx * vy);
}

std::vector<MentionAggregates> mention_aggregates(const MentionGraph& g,
                                                  const std::vector<UserProfile>& users,
                                                  bool weighted) {
    // Out-adjacency grouped per source node.
    std::vector<std::vector<const GraphEdge*>> out(g.nodes.size());
    for (const auto& e : g.edges) out[e.src].push_back(&e);

    std::vector<MentionAggregates> rows;
    rows.reserve(users.size());
    for (const auto& u : users) {
        MentionAggregates row;
        row.user_id = u.id;
        auto it = g.node_index.find(u.id);
        if (it != g.node_index.end() && !out[it->second].empty()) {
            double tox_w = 0.0, tox_sum = 0.0;
            double par_w = 0.0, par_sum = 0.0;
            double gap_w = 0.0, gap_sum = 0.0;
            std::vector<std::pair<double, double>> par; // (weight, value)
            for (const GraphEdge* e : out[it->second]) {
                double w = weighted ? static_cast<double>(e->weight) : 1.0;
                const GraphNode& nb = g.nodes[e->dst];
                if (nb.toxicity) {
                    tox_w += w;
                    tox_sum += w * *nb.toxicity;
                }
                if (nb.partisanship) {
                    par_w += w;
                    par_sum += w * *nb.partisanship;
                    par.emplace_back(w, *nb.partisanship);
                    if (u.partisanship) {
                        gap_w += w;
                        gap_sum += w * std::abs(*u.partisanship - *nb.partisanship);
                    }
                }
            }
            if (tox_w > 0.0) row.mean_mentioned_toxicity = tox_sum / tox_w;
            if (par_w > 0.0) {
                double m = par_sum / par_w;
                row.mean_mentioned_partisanship = m;
                double ss = 0.0;
                for (const auto& [w, v] : par) ss += w * (v - m) * (v - m);
                row.std_mentioned_partisanship = std::sqrt(ss / par_w);
            }
            if (gap_w > 0.0) row.mean_abs_partisanship_gap = gap_sum / gap_w;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_edges_csv(const std::string& path, const MentionGraph& g) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write edges: " + path);
    out << "src,dst,weight\n";
    for (const auto& e : g.edges)
        out << g.nodes[e.src].id << ',' << g.nodes[e.dst].id << ',' << e.weight << '\n';
}

void write_aggregates_csv(const std::string& path, const std::vector<MentionAggregates>& rows) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write aggregates: " + path);
    out << "user_id,mean_mentioned_toxicity,mean_mentioned_partisanship,"
           "std_mentioned_partisanship,mean_abs_partisanship_gap\n";
    auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
    for (const auto& r : rows)
        out << r.user_id << ',' << cell(r.mean_mentioned_toxicity) << ','
            << cell(r.mean_mentioned_partisanship) << ',' << cell(r.std_mentioned_partisanship)
            << ',' << cell(r.mean_abs_partisanship_gap) << '\n';
}

} // namespace polarlens
