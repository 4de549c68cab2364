// Serial reference vs OpenMP correlator on a synthetic two-channel stream.

#include <map>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mrr/engine.hpp"

namespace {

struct Streams {
  std::vector<std::int64_t> a, b;
};

// Poisson tags at `rate` per second on each channel for `seconds`.
const Streams& streams(double rate, double seconds) {
  static std::map<std::pair<double, double>, Streams> cache;
  auto& s = cache[{rate, seconds}];
  if (s.a.empty()) {
    std::mt19937_64 rng(17);
    std::exponential_distribution<double> gap(rate * 1e-12);
    for (auto* v : {&s.a, &s.b}) {
      double t = 0;
      while ((t += gap(rng)) < seconds * 1e12) v->push_back(static_cast<std::int64_t>(t));
    }
  }
  return s;
}

void run(benchmark::State& state, mrr::engine::Backend backend) {
  const double rate = static_cast<double>(state.range(0));
  const auto& s = streams(rate, 2.0);
  const std::int64_t range = state.range(1);
  for (auto _ : state) {
    auto h = mrr::engine::make_histogram(81, {-range * 81, range * 81});
    if (backend == mrr::engine::Backend::Serial)
      mrr::engine::accumulate_serial(s.a, s.b, h);
    else
      mrr::engine::accumulate_parallel(s.a, s.b, h);
    benchmark::DoNotOptimize(h.counts.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.a.size() + s.b.size()));
}

void BM_Serial(benchmark::State& st) { run(st, mrr::engine::Backend::Serial); }
void BM_Parallel(benchmark::State& st) { run(st, mrr::engine::Backend::Parallel); }

// rate per channel, half range in 81 ps bins
#define ARGS ->Args({100'000, 12'346})->Args({1'000'000, 12'346})->Args({1'000'000, 150})->Unit(benchmark::kMillisecond)
BENCHMARK(BM_Serial) ARGS;
BENCHMARK(BM_Parallel) ARGS;

}  // namespace

BENCHMARK_MAIN();
