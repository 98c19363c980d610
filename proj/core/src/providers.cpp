#include "polarlens/providers.hpp"

#include "polarlens/common.hpp"
#include "polarlens/text_clean.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <httplib.h>

namespace polarlens {

namespace {

using json = nlohmann::json;

std::string index_range(std::size_t begin, std::size_t end) {
    return "texts [" + std::to_string(begin) + ", " + std::to_string(end) + ")";
}

// One POST with retry/backoff; returns the parsed body or throws io_error
// tagged with the text index range this batch covered.
json post_batch(const HttpProviderOptions& opts, const std::string& path, const json& body,
                std::size_t begin, std::size_t end) {
    std::string payload = body.dump();
    std::string last_error;
    int delay_ms = opts.backoff_initial_ms;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = static_cast<int>(std::lround(delay_ms * opts.backoff_factor));
        }
        httplib::Client client(opts.host, opts.port);
        client.set_connection_timeout(opts.timeout_seconds, 0);
        client.set_read_timeout(opts.timeout_seconds, 0);
        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw io_error("provider " + path + " returned status " + std::to_string(res->status) +
                           " for " + index_range(begin, end));
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded())
            throw io_error("provider " + path + " returned malformed JSON for " +
                           index_range(begin, end));
        return parsed;
    }
    throw io_error("provider " + path + " unreachable after " +
                   std::to_string(opts.max_retries + 1) + " attempts (" + last_error + ") for " +
                   index_range(begin, end));
}

// Splits texts into batches and runs `handle(batch_begin, batch_end)` over a
// bounded pool, preserving output order via index-addressed writes.
void run_batches(std::size_t n, const HttpProviderOptions& opts,
                 const std::function<void(std::size_t, std::size_t)>& handle) {
    if (n == 0) return;
    std::size_t batch = std::max<std::size_t>(1, opts.batch_size);
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (std::size_t b = 0; b < n; b += batch) spans.emplace_back(b, std::min(n, b + batch));

    std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(1, opts.max_concurrency),
                                                spans.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= spans.size()) return;
            {
                std::lock_guard<std::mutex> lock(error_mu);
                if (first_error) return;
            }
            try {
                handle(spans[i].first, spans[i].second);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace

StubScorer::StubScorer(std::set<std::string> lexicon) : lexicon_(std::move(lexicon)) {}

double StubScorer::score_one(const std::string& text) const {
    int hits = 0;
    for (const auto& core : word_cores(text))
        if (lexicon_.count(core)) ++hits;
    return std::min(1.0, 0.25 * hits);
}

std::vector<double> StubScorer::score(const std::vector<std::string>& texts) {
    std::vector<double> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out[i] = score_one(texts[i]);
    return out;
}

StubEmbedder::StubEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw domain_error("stub embedder: dim must be positive");
}

std::vector<float> StubEmbedder::embed_one(const std::string& text) const {
    std::uint64_t base = fnv1a64(text, fnv1a64(hex64(seed_)));
    std::vector<float> v(dim_);
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
        std::uint64_t h = fnv1a64(hex64(static_cast<std::uint64_t>(j)), base);
        // Map the hash to (-1, 1); the +1 offset keeps it away from exact zero.
        double x = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-52 - 1.0;
        v[j] = static_cast<float>(x);
        norm_sq += x * x;
    }
    double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) x = static_cast<float>(x * inv);
    return v;
}

std::vector<std::vector<float>> StubEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out[i] = embed_one(texts[i]);
    return out;
}

HttpScorer::HttpScorer(HttpProviderOptions opts) : opts_(std::move(opts)) {}
HttpScorer::~HttpScorer() = default;

std::vector<double> HttpScorer::score(const std::vector<std::string>& texts) {
    std::vector<double> out(texts.size());
    run_batches(texts.size(), opts_, [&](std::size_t begin, std::size_t end) {
        json body;
        body["texts"] = json::array();
        for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(texts[i]);
        json res = post_batch(opts_, "/score", body, begin, end);
        if (!res.is_object() || !res.contains("scores") || !res["scores"].is_array() ||
            res["scores"].size() != end - begin)
            throw io_error("scorer protocol error: expected " + std::to_string(end - begin) +
                           " scores for " + index_range(begin, end));
        for (std::size_t i = begin; i < end; ++i) {
            const auto& s = res["scores"][i - begin];
            if (!s.is_number())
                throw io_error("scorer protocol error: non-numeric score for " +
                               index_range(begin, end));
            double v = s.get<double>();
            if (v < 0.0 || v > 1.0)
                throw io_error("scorer protocol error: score out of [0,1] for " +
                               index_range(begin, end));
            out[i] = v;
        }
    });
    return out;
}

HttpEmbedder::HttpEmbedder(HttpProviderOptions opts, std::size_t dim)
    : opts_(std::move(opts)), dim_(dim) {
    if (dim_ == 0) throw domain_error("http embedder: dim must be positive");
}
HttpEmbedder::~HttpEmbedder() = default;

std::vector<std::vector<float>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out(texts.size());
    run_batches(texts.size(), opts_, [&](std::size_t begin, std::size_t end) {
        json body;
        body["texts"] = json::array();
        for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(texts[i]);
        json res = post_batch(opts_, "/embed", body, begin, end);
        if (!res.is_object() || !res.contains("vectors") || !res["vectors"].is_array() ||
            res["vectors"].size() != end - begin)
            throw io_error("embedder protocol error: expected " + std::to_string(end - begin) +
                           " vectors for " + index_range(begin, end));
        for (std::size_t i = begin; i < end; ++i) {
            const auto& row = res["vectors"][i - begin];
            if (!row.is_array() || row.size() != dim_)
                throw io_error("embedder protocol error: bad vector width for " +
                               index_range(begin, end));
            std::vector<float> v(dim_);
            double norm_sq = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) {
                if (!row[j].is_number())
                    throw io_error("embedder protocol error: non-numeric entry for " +
                                   index_range(begin, end));
                double x = row[j].get<double>();
                v[j] = static_cast<float>(x);
                norm_sq += x * x;
            }
            if (norm_sq <= 0.0)
                throw io_error("embedder protocol error: zero vector for " +
                               index_range(begin, end));
            double inv = 1.0 / std::sqrt(norm_sq);
            for (auto& x : v) x = static_cast<float>(x * inv);
            out[i] = std::move(v);
        }
    });
    return out;
}

std::set<std::string> load_scorer_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open scorer lexicon: " + path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        words.insert(ascii_lower(line));
    }
    return words;
}

} // namespace polarlens
