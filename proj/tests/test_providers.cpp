#include "polarlens/providers.hpp"

#include "polarlens/common.hpp"

#include <doctest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <thread>
#include <vector>

using namespace polarlens;
using json = nlohmann::json;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("polarlens_prov_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        auto p = path / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p.string();
    }
};

// In-process HTTP fixture; handlers are installed per test before start().
struct TestServer {
    httplib::Server svr;
    int port = 0;
    std::thread th;

    void start() {
        port = svr.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        th = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }
    ~TestServer() {
        svr.stop();
        if (th.joinable()) th.join();
    }
};

HttpProviderOptions quick_opts(int port) {
    HttpProviderOptions opts;
    opts.port = port;
    opts.backoff_initial_ms = 1;
    opts.timeout_seconds = 5;
    return opts;
}

} // namespace

TEST_CASE("stub scorer counts lexicon occurrences at 0.25 each, capped at 1") {
    StubScorer scorer({"militia", "traitor", "scum"});

    CHECK(scorer.score_one("") == 0.0);
    CHECK(scorer.score_one("a perfectly pleasant afternoon") == 0.0);
    CHECK(scorer.score_one("the militia gathered") == 0.25);
    CHECK(scorer.score_one("militia militia") == 0.5); // occurrences, not distinct words
    CHECK(scorer.score_one("militia traitor scum") == 0.75);
    CHECK(scorer.score_one("militia traitor scum militia") == 1.0);
    CHECK(scorer.score_one("militia traitor scum militia traitor") == 1.0); // capped

    // Matching runs on lowercased alphanumeric cores.
    CHECK(scorer.score_one("MILITIA!") == 0.25);
    CHECK(scorer.score_one("(traitor)...") == 0.25);
    CHECK(scorer.score_one("antimilitia") == 0.0); // whole cores only

    // Batch form is order-preserving and elementwise.
    auto got = scorer.score({"militia", "calm", "traitor scum"});
    CHECK(got == std::vector<double>{0.25, 0.0, 0.5});
}

TEST_CASE("stub embedder is deterministic, unit-norm and seed-sensitive") {
    StubEmbedder emb(16, 42);
    CHECK(emb.dim() == 16);

    auto a1 = emb.embed_one("hello world");
    auto a2 = emb.embed_one("hello world");
    CHECK(a1 == a2); // bitwise deterministic

    auto b = emb.embed_one("hello worlds");
    CHECK(a1 != b);

    StubEmbedder other_seed(16, 43);
    CHECK(other_seed.embed_one("hello world") != a1);

    // Unit norm within 1e-6.
    for (const auto& v : {a1, b}) {
        double norm_sq = 0.0;
        for (float x : v) norm_sq += static_cast<double>(x) * x;
        CHECK(std::abs(std::sqrt(norm_sq) - 1.0) < 1e-6);
    }

    // Batch equals per-text calls, order preserved.
    auto batch = emb.embed({"hello world", "hello worlds"});
    REQUIRE(batch.size() == 2);
    CHECK(batch[0] == a1);
    CHECK(batch[1] == b);

    CHECK_THROWS_AS(StubEmbedder(0, 1), domain_error);
}

TEST_CASE("scorer lexicon loads lowercased words, skipping blanks and comments") {
    TempDir tmp;
    auto path = tmp.file("lex.txt", "# comment\nMilitia\n\ntraitor\r\n  \nSCUM\n");
    auto words = load_scorer_lexicon(path);
    // Note: "  " (spaces) is not blank and not a comment; it is kept verbatim.
    CHECK(words.count("militia") == 1);
    CHECK(words.count("traitor") == 1);
    CHECK(words.count("scum") == 1);
    CHECK(words.count("# comment") == 0);
    CHECK(words.count("Militia") == 0);

    CHECK_THROWS_AS((void)load_scorer_lexicon(tmp.path.string() + "/absent.txt"), io_error);
}

TEST_CASE("http scorer passes scores through and preserves order across batches") {
    TestServer server;
    std::atomic<int> requests{0};
    std::vector<std::size_t> batch_sizes;
    std::mutex mu;
    server.svr.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        ++requests;
        json body = json::parse(req.body);
        json scores = json::array();
        {
            std::lock_guard<std::mutex> lock(mu);
            batch_sizes.push_back(body["texts"].size());
        }
        // Score encodes the text's own payload so order mixups would show.
        for (const auto& t : body["texts"])
            scores.push_back(std::stod(t.get<std::string>()) / 100.0);
        res.set_content(json{{"scores", scores}}.dump(), "application/json");
    });
    server.start();

    auto opts = quick_opts(server.port);
    opts.batch_size = 3;
    opts.max_concurrency = 2;
    HttpScorer scorer(opts);

    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) texts.push_back(std::to_string(i));
    auto got = scorer.score(texts);
    REQUIRE(got.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(got[static_cast<std::size_t>(i)] == i / 100.0);

    CHECK(requests.load() == 4); // 3+3+3+1
    std::multiset<std::size_t> sizes(batch_sizes.begin(), batch_sizes.end());
    CHECK(sizes == std::multiset<std::size_t>{3, 3, 3, 1});

    // An empty request list never touches the network.
    int before = requests.load();
    CHECK(scorer.score({}).empty());
    CHECK(requests.load() == before);
}

TEST_CASE("http scorer retries transient failures with backoff then succeeds") {
    TestServer server;
    std::atomic<int> hits{0};
    server.svr.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        int h = ++hits;
        if (h <= 2) {
            res.status = 503;
            return;
        }
        json body = json::parse(req.body);
        json scores = json::array();
        for (std::size_t i = 0; i < body["texts"].size(); ++i) scores.push_back(0.5);
        res.set_content(json{{"scores", scores}}.dump(), "application/json");
    });
    server.start();

    auto opts = quick_opts(server.port);
    opts.max_retries = 3;
    HttpScorer scorer(opts);
    auto got = scorer.score({"a", "b"});
    CHECK(got == std::vector<double>{0.5, 0.5});
    CHECK(hits.load() == 3); // two 503s, then success
}

TEST_CASE("http scorer reports the failing text index range when retries run out") {
    TestServer server;
    server.svr.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
    });
    server.start();

    auto opts = quick_opts(server.port);
    opts.batch_size = 2;
    opts.max_concurrency = 1;
    opts.max_retries = 1;
    HttpScorer scorer(opts);

    std::vector<std::string> texts = {"a", "b", "c", "d", "e"};
    try {
        (void)scorer.score(texts);
        FAIL("expected io_error");
    } catch (const io_error& ex) {
        std::string msg = ex.what();
        CHECK(msg.find("2 attempts") != std::string::npos);
        CHECK(msg.find("texts [0, 2)") != std::string::npos);
    }
}

TEST_CASE("http scorer rejects malformed and out-of-contract responses") {
    TestServer server;
    std::atomic<int> mode{0};
    server.svr.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        std::size_t n = body["texts"].size();
        switch (mode.load()) {
        case 0: res.set_content("{not json", "application/json"); break;
        case 1: res.set_content(json{{"scores", json::array({0.1})}}.dump(),
                                "application/json"); break; // wrong count vs n=2
        case 2: res.set_content(json{{"scores", json::array({0.5, 1.7})}}.dump(),
                                "application/json"); break; // out of [0,1]
        case 3: res.set_content(json{{"scores", json::array({0.5, "high"})}}.dump(),
                                "application/json"); break; // non-numeric
        default: {
            json scores = json::array();
            for (std::size_t i = 0; i < n; ++i) scores.push_back(0.0);
            res.set_content(json{{"scores", scores}}.dump(), "application/json");
        }
        }
    });
    server.start();

    auto opts = quick_opts(server.port);
    opts.max_retries = 0;
    HttpScorer scorer(opts);
    std::vector<std::string> two = {"a", "b"};

    mode = 0;
    CHECK_THROWS_WITH_AS((void)scorer.score(two),
                         doctest::Contains("malformed JSON"), io_error);
    mode = 1;
    CHECK_THROWS_WITH_AS((void)scorer.score(two),
                         doctest::Contains("protocol error"), io_error);
    mode = 2;
    CHECK_THROWS_WITH_AS((void)scorer.score(two),
                         doctest::Contains("out of [0,1]"), io_error);
    mode = 3;
    CHECK_THROWS_WITH_AS((void)scorer.score(two),
                         doctest::Contains("non-numeric"), io_error);

    // Client errors are not retried: a 404 fails fast even with retries left.
    TestServer gone;
    gone.svr.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 404;
    });
    gone.start();
    auto gopts = quick_opts(gone.port);
    gopts.max_retries = 5;
    HttpScorer gscorer(gopts);
    CHECK_THROWS_WITH_AS((void)gscorer.score(two), doctest::Contains("status 404"), io_error);
}

TEST_CASE("http scorer surfaces transport failure with attempt count") {
    auto opts = quick_opts(1); // nothing listens on port 1
    opts.max_retries = 1;
    HttpScorer scorer(opts);
    try {
        (void)scorer.score({"a"});
        FAIL("expected io_error");
    } catch (const io_error& ex) {
        std::string msg = ex.what();
        CHECK(msg.find("unreachable after 2 attempts") != std::string::npos);
        CHECK(msg.find("texts [0, 1)") != std::string::npos);
    }
}

TEST_CASE("http embedder normalizes pass-through vectors and validates shape") {
    TestServer server;
    std::atomic<int> mode{0};
    server.svr.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        std::size_t n = body["texts"].size();
        json vectors = json::array();
        switch (mode.load()) {
        case 0:
            // Known non-unit vectors; the client must normalize.
            vectors.push_back(json::array({3.0, 4.0}));
            if (n > 1) vectors.push_back(json::array({0.0, 5.0}));
            break;
        case 1: vectors.push_back(json::array({1.0, 2.0, 3.0})); break; // wrong width
        case 2: vectors.push_back(json::array({0.0, 0.0})); break;      // zero vector
        default: break;                                                  // wrong count
        }
        res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    server.start();

    auto opts = quick_opts(server.port);
    opts.max_retries = 0;
    HttpEmbedder emb(opts, 2);
    CHECK(emb.dim() == 2);

    mode = 0;
    auto rows = emb.embed({"a", "b"});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == doctest::Approx(0.6).epsilon(1e-7));
    CHECK(rows[0][1] == doctest::Approx(0.8).epsilon(1e-7));
    CHECK(rows[1][0] == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(rows[1][1] == doctest::Approx(1.0).epsilon(1e-7));

    mode = 1;
    CHECK_THROWS_WITH_AS((void)emb.embed({"a"}), doctest::Contains("bad vector width"),
                         io_error);
    mode = 2;
    CHECK_THROWS_WITH_AS((void)emb.embed({"a"}), doctest::Contains("zero vector"), io_error);
    mode = 3;
    CHECK_THROWS_WITH_AS((void)emb.embed({"a"}), doctest::Contains("protocol error"),
                         io_error);

    CHECK_THROWS_AS(HttpEmbedder(opts, 0), domain_error);
}

TEST_CASE("http providers keep in-flight requests within the configured bound") {
    TestServer server;
    std::atomic<int> inflight{0};
    std::atomic<int> peak{0};
    server.svr.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
        int cur = ++inflight;
        int prev = peak.load();
        while (cur > prev && !peak.compare_exchange_weak(prev, cur)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        json body = json::parse(req.body);
        json scores = json::array();
        for (std::size_t i = 0; i < body["texts"].size(); ++i) scores.push_back(0.25);
        --inflight;
        res.set_content(json{{"scores", scores}}.dump(), "application/json");
    });
    server.start();

    auto opts = quick_opts(server.port);
    opts.batch_size = 1;
    opts.max_concurrency = 3;
    HttpScorer scorer(opts);

    std::vector<std::string> texts(12, "x");
    auto got = scorer.score(texts);
    CHECK(got == std::vector<double>(12, 0.25));
    CHECK(peak.load() <= 3);
    CHECK(peak.load() >= 1);
}
