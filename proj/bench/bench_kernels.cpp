// Serial reference vs OpenMP kernel for the parallel hot paths. Each pair
// runs the same work with the same seeds; only Execution differs.

#include <benchmark/benchmark.h>

#include "mslab/formula.hpp"
#include "mslab/freeness_sim.hpp"
#include "mslab/gibbs_flow.hpp"
#include "mslab/microstates.hpp"
#include "mslab/optimize.hpp"

using namespace mslab;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

void set_label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

void BM_WordTraces(benchmark::State& state) {
  RngStream rng(1, 0);
  const int n = static_cast<int>(state.range(1));
  const auto x = sample_ginibre(n, 2, rng);
  const auto words = enumerate_star_words(2, 4);
  for (auto _ : state) benchmark::DoNotOptimize(word_traces(x, words, state.range(0) != 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(words.size()));
  set_label(state);
}
BENCHMARK(BM_WordTraces)->ArgsProduct({{0, 1}, {16, 64}})->Unit(benchmark::kMillisecond);

void BM_SampleSpecs(benchmark::State& state) {
  NeighborhoodSpec spec;
  spec.d = 1;
  spec.r = 4;
  spec.field = Field::SelfAdjoint;
  spec.constraints = {{parse_formula("tr.re(x1 x1)"), 1.0, 0.1}, {parse_formula("tr.re(x1 x1 x1 x1)"), 2.0, 0.1}};
  SamplingConfig cfg;
  cfg.samples = 20'000;
  cfg.seed = 2;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(sample_specs({spec}, 8, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.samples);
  set_label(state);
}
BENCHMARK(BM_SampleSpecs)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MultiStart(benchmark::State& state) {
  const auto f = parse_formula("tr.re(x1 x1* x1 x1*) - tr.re(x1 x1*)");
  const TupleObjective obj = [&](const MatrixTuple& y, MatrixTuple* grad) {
    if (!grad) return eval_formula(*f, y).value;
    auto g = cyclic_gradient(*f, y);
    *grad = g.gradient;
    return g.value;
  };
  OptConfig cfg;
  cfg.starts = 8;
  cfg.max_iters = 100;
  cfg.seed = 3;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(minimize_over_ball(obj, 2.0, 16, 1, cfg));
  set_label(state);
}
BENCHMARK(BM_MultiStart)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_GibbsChains(benchmark::State& state) {
  Potential v;
  v.phi = parse_formula("0.5*tr.re(x1 x1) + 0.1*tr.re(x1 x1 x1 x1)");
  v.field = Field::SelfAdjoint;
  v.bounds = {0.0, 0.5, 0.0, 1.4};
  GibbsConfig cfg;
  cfg.n = 32;
  cfg.burn_in = 50;
  cfg.samples = 20;
  cfg.thin = 2;
  cfg.chains = 4;
  cfg.seed = 4;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(sample_gibbs_moments(v, cfg));
  set_label(state);
}
BENCHMARK(BM_GibbsChains)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FreenessTrials(benchmark::State& state) {
  FreenessConfig cfg;
  cfg.n_list = {128};
  cfg.trials = 4;
  cfg.seed = 5;
  cfg.execution = mode(state);
  const auto semi = LawSpec::semicircle();
  for (auto _ : state) benchmark::DoNotOptimize(asymptotic_freeness_experiment({semi}, {semi}, cfg));
  set_label(state);
}
BENCHMARK(BM_FreenessTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
