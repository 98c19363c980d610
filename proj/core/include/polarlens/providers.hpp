#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace polarlens {

// Produces toxicity scores in [0, 1], one per input text.
class ToxicityScorer {
public:
    virtual ~ToxicityScorer() = default;
    virtual std::vector<double> score(const std::vector<std::string>& texts) = 0;
};

// Produces one embedding row per input text.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dim() const = 0;
};

// Deterministic lexicon scorer: 0.25 per toxic token occurrence, capped at 1.
class StubScorer final : public ToxicityScorer {
public:
    explicit StubScorer(std::set<std::string> lexicon);
    std::vector<double> score(const std::vector<std::string>& texts) override;
    double score_one(const std::string& text) const;

private:
    std::set<std::string> lexicon_;
};

// Deterministic hash embedder: seeded FNV-1a stream expanded to a unit vector.
class StubEmbedder final : public Embedder {
public:
    StubEmbedder(std::size_t dim, std::uint64_t seed);
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    std::vector<float> embed_one(const std::string& text) const;
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

struct HttpProviderOptions {
    std::string host = "127.0.0.1";
    int port = 0;
    std::size_t batch_size = 64;
    std::size_t max_concurrency = 4;
    int max_retries = 3;
    int backoff_initial_ms = 100;
    double backoff_factor = 2.0;
    int timeout_seconds = 30;
};

// Remote scorer speaking POST /score {"texts": [...]} -> {"scores": [...]}.
class HttpScorer final : public ToxicityScorer {
public:
    explicit HttpScorer(HttpProviderOptions opts);
    ~HttpScorer() override;
    std::vector<double> score(const std::vector<std::string>& texts) override;

private:
    HttpProviderOptions opts_;
};

// Remote embedder speaking POST /embed {"texts": [...]} -> {"vectors": [[...]]}.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(HttpProviderOptions opts, std::size_t dim);
    ~HttpEmbedder() override;
    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    std::size_t dim() const override { return dim_; }

private:
    HttpProviderOptions opts_;
    std::size_t dim_;
};

// Loads one lowercase toxic word per line; '#' lines and blanks are skipped.
std::set<std::string> load_scorer_lexicon(const std::string& path);

} // namespace polarlens
