#include "polarlens/clustering.hpp"
#include "polarlens/gam.hpp"
#include "polarlens/losses.hpp"
#include "polarlens/rng.hpp"
#include "polarlens/synth.hpp"
#include "polarlens/text_clean.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace polarlens;

void bm_dpmeans_fit(benchmark::State& state) {
    auto blobs = make_blobs(static_cast<std::size_t>(state.range(0)), 5, 64, 0.15, 7);
    DpMeansOptions opts;
    for (auto _ : state) {
        auto res = dpmeans_fit(blobs.points, opts);
        benchmark::DoNotOptimize(res.model.centers.data());
    }
}
BENCHMARK(bm_dpmeans_fit)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void bm_assign(benchmark::State& state) {
    auto blobs = make_blobs(static_cast<std::size_t>(state.range(0)), 5, 64, 0.15, 7);
    auto res = dpmeans_fit(blobs.points, {});
    for (auto _ : state) {
        auto a = assign(res.model, blobs.points);
        benchmark::DoNotOptimize(a.data());
    }
}
BENCHMARK(bm_assign)->Arg(4000)->Arg(16000)->Unit(benchmark::kMillisecond);

void bm_simcse_loss(benchmark::State& state) {
    Eigen::Index b = state.range(0), e = 64;
    Rng rng(3);
    Eigen::MatrixXd h(b, e), ht(b, e);
    for (Eigen::Index i = 0; i < b; ++i)
        for (Eigen::Index j = 0; j < e; ++j) {
            h(i, j) = rng.next_gaussian();
            ht(i, j) = rng.next_gaussian();
        }
    for (auto _ : state) benchmark::DoNotOptimize(simcse_loss(h, ht, 0.07));
}
BENCHMARK(bm_simcse_loss)->Arg(32)->Arg(256);

void bm_spline_eval(benchmark::State& state) {
    Rng rng(5);
    std::vector<double> x(2000);
    for (auto& v : x) v = rng.next_double();
    auto basis = build_basis("x", x);
    for (auto _ : state) {
        auto m = basis.centered_matrix(x);
        benchmark::DoNotOptimize(m.data());
    }
}
BENCHMARK(bm_spline_eval)->Unit(benchmark::kMillisecond);

void bm_clean_text(benchmark::State& state) {
    std::string s = "RT @someone Check https://t.co/abc THIS out #MAGA snake_case camelCase \xF0\x9F\x98\x80 !!";
    for (auto _ : state) benchmark::DoNotOptimize(clean_text(s));
}
BENCHMARK(bm_clean_text);

} // namespace

BENCHMARK_MAIN();
