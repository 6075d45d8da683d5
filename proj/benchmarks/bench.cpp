// Microbenchmarks for the hot paths: scalar graph resolvents, the grid
// Helmholtz solve, one implicit step, and a diagnostics record.

#include <benchmark/benchmark.h>

#include <cmath>

#include "chdbc/diagnostics.hpp"
#include "chdbc/experiments.hpp"

namespace {

using namespace chdbc;

void bm_resolvent_poly(benchmark::State& state) {
  MonotoneGraph g = MonotoneGraph::polynomial(5, 2.0);
  double r = -3.0;
  for (auto _ : state) {
    r = r >= 3.0 ? -3.0 : r + 1e-3;
    benchmark::DoNotOptimize(resolvent(g, 0.05, r));
  }
}
BENCHMARK(bm_resolvent_poly);

void bm_resolvent_log(benchmark::State& state) {
  MonotoneGraph g = MonotoneGraph::logarithmic(1.0);
  double r = -3.0;
  for (auto _ : state) {
    r = r >= 3.0 ? -3.0 : r + 1e-3;
    benchmark::DoNotOptimize(resolvent(g, 0.05, r));
  }
}
BENCHMARK(bm_resolvent_log);

InteriorField smooth_field(const Grid& g) {
  InteriorField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      f.at(i, j) = std::cos(2.0 * 3.14159265358979323846 * g.x(i)) * (1.0 + g.y(j) * g.y(j));
  return f;
}

void bm_helmholtz(benchmark::State& state) {
  Grid g(32, 33);
  InteriorField f = smooth_field(g);
  for (auto _ : state) benchmark::DoNotOptimize(helmholtz_neumann_solve(1.0, f));
}
BENCHMARK(bm_helmholtz);

ProblemConfig default_cfg() {
  ProblemConfig cfg;
  cfg.pi.slope = -1.0;  // double-well split: convex cubic + linear perturbation
  return cfg;
}

void bm_step(benchmark::State& state) {
  ProblemConfig cfg = default_cfg();
  InitialDataSpec init;
  State s0 = make_initial_state(cfg, init.build(cfg.grid));
  for (auto _ : state) benchmark::DoNotOptimize(step(cfg, s0));
}
BENCHMARK(bm_step)->Unit(benchmark::kMillisecond);

void bm_record(benchmark::State& state) {
  ProblemConfig cfg = default_cfg();
  InitialDataSpec init;
  State s0 = make_initial_state(cfg, init.build(cfg.grid));
  State s1 = step(cfg, s0);
  for (auto _ : state) benchmark::DoNotOptimize(record(cfg, s0, s1));
}
BENCHMARK(bm_record)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
