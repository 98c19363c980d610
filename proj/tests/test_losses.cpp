#include "polarlens/losses.hpp"

#include "polarlens/common.hpp"
#include "polarlens/rng.hpp"

#include <doctest.h>

#include <Eigen/Core>

#include <cmath>
#include <vector>

using namespace polarlens;

namespace {

Eigen::MatrixXd random_batch(Rng& rng, int b, int e) {
    Eigen::MatrixXd m(b, e);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < e; ++j) m(i, j) = rng.next_gaussian();
    return m;
}

double cos_rows(const Eigen::MatrixXd& a, int i, const Eigen::MatrixXd& b, int j) {
    return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

// Textbook double loop, no log-sum-exp tricks. Intentionally naive.
double simcse_brute(const Eigen::MatrixXd& h, const Eigen::MatrixXd& ht, double tau) {
    const int b = static_cast<int>(h.rows());
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        double denom = 0.0;
        for (int j = 0; j < b; ++j) denom += std::exp(cos_rows(h, i, ht, j) / tau);
        total += -std::log(std::exp(cos_rows(h, i, ht, i) / tau) / denom);
    }
    return total / b;
}

double supcon_brute(const Eigen::MatrixXd& h, const std::vector<bool>& y, double tau) {
    const int b = static_cast<int>(h.rows());
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        double num = 0.0, denom = 0.0;
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            double e = std::exp(cos_rows(h, i, h, j) / tau);
            denom += e;
            if (y[j] == y[i]) num += e;
        }
        total += -std::log(num / denom);
    }
    return total / b;
}

Eigen::VectorXd fuse_brute(const Eigen::MatrixXd& tokens, const Eigen::VectorXd& hc,
                           const Eigen::MatrixXd& w) {
    const int l = static_cast<int>(tokens.rows());
    const int e = static_cast<int>(tokens.cols());
    double lambda = 1.0 / std::sqrt(static_cast<double>(e));
    Eigen::VectorXd wh = w * hc;
    std::vector<double> s(l);
    double mx = -1e300;
    for (int i = 0; i < l; ++i) {
        s[i] = lambda * tokens.row(i).dot(wh);
        mx = std::max(mx, s[i]);
    }
    double z = 0.0;
    for (int i = 0; i < l; ++i) z += std::exp(s[i] - mx);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(e);
    for (int i = 0; i < l; ++i) out += (std::exp(s[i] - mx) / z) * tokens.row(i).transpose();
    return out;
}

} // namespace

TEST_CASE("simcse matches the naive double loop on random batches") {
    Rng rng(1001);
    for (int trial = 0; trial < 100; ++trial) {
        int b = 1 + static_cast<int>(rng.next_below(32));
        int e = 2 + static_cast<int>(rng.next_below(15));
        auto h = random_batch(rng, b, e);
        auto ht = random_batch(rng, b, e);
        double got = simcse_loss(h, ht, 0.07);
        double want = simcse_brute(h, ht, 0.07);
        CHECK(std::abs(got - want) <= 1e-6);
    }
}

TEST_CASE("simcse single-row batch scores exactly zero") {
    Rng rng(1002);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = random_batch(rng, 1, 8);
        auto ht = random_batch(rng, 1, 8);
        CHECK(simcse_loss(h, ht, 0.07) == 0.0);
    }
}

TEST_CASE("simcse never goes negative even when twins are adversarial") {
    Rng rng(1003);
    for (int trial = 0; trial < 50; ++trial) {
        int b = 2 + static_cast<int>(rng.next_below(10));
        auto h = random_batch(rng, b, 6);
        auto ht = h;
        // Point each twin away from its anchor and toward a rival row.
        for (int i = 0; i < b; ++i) ht.row(i) = h.row((i + 1) % b);
        CHECK(simcse_loss(h, ht, 0.07) >= 0.0);
    }
}

TEST_CASE("simcse of perfectly aligned twins is below the shuffled batch") {
    Rng rng(1004);
    for (int trial = 0; trial < 30; ++trial) {
        int b = 3 + static_cast<int>(rng.next_below(12));
        auto h = random_batch(rng, b, 10);
        double aligned = simcse_loss(h, h, 0.07);
        Eigen::MatrixXd rolled(b, 10);
        for (int i = 0; i < b; ++i) rolled.row(i) = h.row((i + 1) % b);
        double mismatched = simcse_loss(h, rolled, 0.07);
        CHECK(aligned < mismatched);
    }
}

TEST_CASE("supcon matches the naive double loop on random labeled batches") {
    Rng rng(2001);
    for (int trial = 0; trial < 100; ++trial) {
        int b = 4 + static_cast<int>(rng.next_below(29));
        int e = 2 + static_cast<int>(rng.next_below(15));
        auto h = random_batch(rng, b, e);
        std::vector<bool> y(b);
        // Guarantee two of each label, then randomize the rest.
        y[0] = y[1] = true;
        y[2] = y[3] = false;
        for (int i = 4; i < b; ++i) y[i] = rng.next_below(2) == 1;
        double got = supcon_loss(h, y, 0.07);
        double want = supcon_brute(h, y, 0.07);
        CHECK(std::abs(got - want) <= 1e-6);
    }
}

TEST_CASE("supcon two-row same-label batch scores exactly zero") {
    Rng rng(2002);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = random_batch(rng, 2, 8);
        CHECK(supcon_loss(h, {true, true}, 0.07) == 0.0);
        CHECK(supcon_loss(h, {false, false}, 0.07) == 0.0);
    }
}

TEST_CASE("supcon throws when any anchor has no same-label partner") {
    Rng rng(2003);
    auto h = random_batch(rng, 3, 5);
    CHECK_THROWS_AS((void)supcon_loss(h, {true, false, false}, 0.07), domain_error);
    auto h2 = random_batch(rng, 2, 5);
    CHECK_THROWS_AS((void)supcon_loss(h2, {true, false}, 0.07), domain_error);
    auto h1 = random_batch(rng, 1, 5);
    CHECK_THROWS_AS((void)supcon_loss(h1, {true}, 0.07), domain_error);
}

TEST_CASE("supcon drops when clusters tighten") {
    // Two well-separated label groups with shrinking in-group noise: the
    // loss should decrease as the groups get tighter.
    Rng rng(2004);
    auto make = [&](double noise) {
        Eigen::MatrixXd h(8, 16);
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 16; ++j) h(i, j) = noise * rng.next_gaussian();
            h(i, i < 4 ? 0 : 1) += 1.0;
        }
        return h;
    };
    std::vector<bool> y = {true, true, true, true, false, false, false, false};
    double loose = supcon_loss(make(0.5), y, 0.07);
    double tight = supcon_loss(make(0.05), y, 0.07);
    CHECK(tight < loose);
}

TEST_CASE("losses are invariant to row rescaling (cosine similarity)") {
    Rng rng(2005);
    auto h = random_batch(rng, 6, 8);
    auto ht = random_batch(rng, 6, 8);
    auto hs = h;
    auto hts = ht;
    for (int i = 0; i < 6; ++i) {
        hs.row(i) *= (1.0 + i);
        hts.row(i) *= 0.25 * (1.0 + i);
    }
    CHECK(simcse_loss(hs, hts, 0.07) == doctest::Approx(simcse_loss(h, ht, 0.07)).epsilon(1e-12));
    std::vector<bool> y = {true, false, true, false, true, false};
    CHECK(supcon_loss(hs, y, 0.07) == doctest::Approx(supcon_loss(h, y, 0.07)).epsilon(1e-12));
}

TEST_CASE("temperature sharpens both losses consistently with the oracle") {
    Rng rng(2006);
    auto h = random_batch(rng, 10, 12);
    auto ht = random_batch(rng, 10, 12);
    std::vector<bool> y = {true, true, false, false, true, false, true, false, true, false};
    for (double tau : {0.03, 0.07, 0.2, 1.0}) {
        CHECK(std::abs(simcse_loss(h, ht, tau) - simcse_brute(h, ht, tau)) <= 1e-6);
        CHECK(std::abs(supcon_loss(h, y, tau) - supcon_brute(h, y, tau)) <= 1e-6);
    }
}

TEST_CASE("fusion weights validate shape and fix lambda") {
    auto w = FusionWeights::make(Eigen::MatrixXd::Identity(4, 4));
    CHECK(w.lambda == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)FusionWeights::make(Eigen::MatrixXd::Zero(3, 4)), domain_error);
}

TEST_CASE("attention over a single token returns that token") {
    Rng rng(3001);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd tokens = random_batch(rng, 1, 6);
        Eigen::VectorXd hc = random_batch(rng, 1, 6).row(0);
        auto w = FusionWeights::make(random_batch(rng, 6, 6));
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        CHECK((out - tokens.row(0).transpose()).norm() < 1e-12);
    }
}

TEST_CASE("zero weight matrix degrades attention to the token mean") {
    Rng rng(3002);
    for (int trial = 0; trial < 20; ++trial) {
        int l = 2 + static_cast<int>(rng.next_below(6));
        Eigen::MatrixXd tokens = random_batch(rng, l, 5);
        Eigen::VectorXd hc = random_batch(rng, 1, 5).row(0);
        auto w = FusionWeights::make(Eigen::MatrixXd::Zero(5, 5));
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        Eigen::VectorXd mean = tokens.colwise().mean();
        CHECK((out - mean).norm() < 1e-12);
    }
}

TEST_CASE("attention matches five hand-computed cases") {
    // Case 1: two orthogonal tokens, identity weights, summary on token 0.
    {
        Eigen::MatrixXd tokens(2, 2);
        tokens << 1.0, 0.0, 0.0, 1.0;
        Eigen::VectorXd hc(2);
        hc << 1.0, 0.0;
        auto w = FusionWeights::make(Eigen::MatrixXd::Identity(2, 2));
        double lambda = 1.0 / std::sqrt(2.0);
        double a0 = std::exp(lambda) / (std::exp(lambda) + 1.0);
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        CHECK(out(0) == doctest::Approx(a0).epsilon(1e-9));
        CHECK(out(1) == doctest::Approx(1.0 - a0).epsilon(1e-9));
    }
    // Case 2: equal scores give the plain mean.
    {
        Eigen::MatrixXd tokens(3, 2);
        tokens << 2.0, 0.0, 0.0, 2.0, 1.0, 1.0;
        Eigen::VectorXd hc(2);
        hc << 1.0, 1.0;
        auto w = FusionWeights::make(Eigen::MatrixXd::Identity(2, 2));
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        CHECK(out(0) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(out(1) == doctest::Approx(1.0).epsilon(1e-9));
    }
    // Case 3: weight matrix swaps the summary coordinates.
    {
        Eigen::MatrixXd tokens(2, 2);
        tokens << 1.0, 0.0, 0.0, 1.0;
        Eigen::VectorXd hc(2);
        hc << 1.0, 0.0;
        Eigen::MatrixXd swap(2, 2);
        swap << 0.0, 1.0, 1.0, 0.0;
        auto w = FusionWeights::make(swap);
        double lambda = 1.0 / std::sqrt(2.0);
        double a1 = std::exp(lambda) / (std::exp(lambda) + 1.0);
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        CHECK(out(0) == doctest::Approx(1.0 - a1).epsilon(1e-9));
        CHECK(out(1) == doctest::Approx(a1).epsilon(1e-9));
    }
    // Case 4: a dominating score concentrates nearly all mass.
    {
        Eigen::MatrixXd tokens(2, 1);
        tokens << 100.0, 0.0;
        Eigen::VectorXd hc(1);
        hc << 1.0;
        auto w = FusionWeights::make(Eigen::MatrixXd::Identity(1, 1));
        // lambda = 1, scores are 100 and 0.
        double a0 = 1.0 / (1.0 + std::exp(-100.0));
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        CHECK(out(0) == doctest::Approx(100.0 * a0).epsilon(1e-9));
    }
    // Case 5: E = 4 scales lambda to 1/2.
    {
        Eigen::MatrixXd tokens(2, 4);
        tokens << 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0;
        Eigen::VectorXd hc(4);
        hc << 2.0, 0.0, 0.0, 0.0;
        auto w = FusionWeights::make(Eigen::MatrixXd::Identity(4, 4));
        // scores: 0.5 * <t_i, hc> = {1, 0}.
        double a0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
        Eigen::VectorXd out = attention_fuse(tokens, hc, w);
        CHECK(out(0) == doctest::Approx(a0).epsilon(1e-9));
        CHECK(out(1) == doctest::Approx(1.0 - a0).epsilon(1e-9));
    }
}

TEST_CASE("attention output is invariant to token row order") {
    Rng rng(3003);
    for (int trial = 0; trial < 100; ++trial) {
        int l = 2 + static_cast<int>(rng.next_below(7));
        int e = 2 + static_cast<int>(rng.next_below(7));
        Eigen::MatrixXd tokens = random_batch(rng, l, e);
        Eigen::VectorXd hc = random_batch(rng, 1, e).row(0);
        auto w = FusionWeights::make(random_batch(rng, e, e));
        Eigen::VectorXd base = attention_fuse(tokens, hc, w);

        std::vector<int> perm(l);
        for (int i = 0; i < l; ++i) perm[i] = i;
        rng.shuffle_indices(perm);
        Eigen::MatrixXd shuffled(l, e);
        for (int i = 0; i < l; ++i) shuffled.row(i) = tokens.row(perm[i]);
        Eigen::VectorXd out = attention_fuse(shuffled, hc, w);
        CHECK((out - base).norm() < 1e-9);
    }
}

TEST_CASE("attention matches the brute softmax and stays in the convex hull") {
    Rng rng(3004);
    for (int trial = 0; trial < 50; ++trial) {
        int l = 2 + static_cast<int>(rng.next_below(6));
        int e = 2 + static_cast<int>(rng.next_below(6));
        Eigen::MatrixXd tokens = random_batch(rng, l, e);
        Eigen::VectorXd hc = random_batch(rng, 1, e).row(0);
        Eigen::MatrixXd wm = random_batch(rng, e, e);
        auto w = FusionWeights::make(wm);
        Eigen::VectorXd got = attention_fuse(tokens, hc, w);
        Eigen::VectorXd want = fuse_brute(tokens, hc, wm);
        CHECK((got - want).norm() < 1e-9);
        for (int j = 0; j < e; ++j) {
            CHECK(got(j) >= tokens.col(j).minCoeff() - 1e-9);
            CHECK(got(j) <= tokens.col(j).maxCoeff() + 1e-9);
        }
    }
}

TEST_CASE("attention rejects mismatched shapes") {
    Eigen::MatrixXd tokens = Eigen::MatrixXd::Ones(2, 3);
    Eigen::VectorXd hc = Eigen::VectorXd::Ones(4);
    auto w = FusionWeights::make(Eigen::MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS((void)attention_fuse(tokens, hc, w), domain_error);
    Eigen::VectorXd hc3 = Eigen::VectorXd::Ones(3);
    auto w4 = FusionWeights::make(Eigen::MatrixXd::Identity(4, 4));
    CHECK_THROWS_AS((void)attention_fuse(tokens, hc3, w4), domain_error);
}
