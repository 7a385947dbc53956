#include <benchmark/benchmark.h>

#include "safemes/agents.hpp"
#include "safemes/fallback.hpp"
#include "safemes/plant.hpp"
#include "safemes/safety.hpp"
#include "safemes/timeseries.hpp"

using namespace safemes;

namespace {

const ExogenousSeries& year() {
  static const ExogenousSeries s = synth_profiles(1, 35040);
  return s;
}

const OperationLog& fitted_log() {
  static const OperationLog log =
      collect_log(PlantConfig{}, year(), noisy_fallback_policy(PlantConfig{}, 0.8), 10000, 11);
  return log;
}

const SafetyLayer& layer() {
  static const SafetyLayer l(fit_surrogates(fitted_log(), 0.25, PlantConfig{}, ForestParams{}),
                             tolerance_from_series(year(), 0.15));
  return l;
}

}  // namespace

static void BM_PlantStep(benchmark::State& st) {
  const PlantConfig cfg;
  PlantState state = reset(cfg);
  Rng rng(1);
  std::size_t k = 0;
  for (auto _ : st) {
    const StepResult r = step(state, random_action(rng), year()[k], cfg);
    state = r.state;
    k = (k + 1) % year().size();
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_PlantStep);

static void BM_FallbackPolicy(benchmark::State& st) {
  const PlantConfig cfg;
  double demand = 0.2;
  for (auto _ : st) {
    benchmark::DoNotOptimize(fallback_policy(demand, cfg));
    demand = demand > 2.4 ? 0.2 : demand + 0.01;
  }
}
BENCHMARK(BM_FallbackPolicy);

static void BM_SafetyCheck(benchmark::State& st) {
  const SafetyLayer& l = layer();
  Rng rng(2);
  const SafetyFeatures f{5.0, 0.5, 0.5};
  for (auto _ : st) benchmark::DoNotOptimize(l.check(random_action(rng), f, 1.0));
}
BENCHMARK(BM_SafetyCheck);

static void BM_FitSurrogates(benchmark::State& st) {
  const OperationLog& log = fitted_log();
  for (auto _ : st) benchmark::DoNotOptimize(fit_surrogates(log, 0.25, PlantConfig{}, ForestParams{}));
}
BENCHMARK(BM_FitSurrogates)->Unit(benchmark::kMillisecond)->Iterations(2);

static void BM_ActorForward(benchmark::State& st) {
  Td3Agent agent(Td3Hyper::preset("safefallback"), 3);
  Observation s;
  s.values.fill(0.4);
  for (auto _ : st) benchmark::DoNotOptimize(agent.policy_action(s));
}
BENCHMARK(BM_ActorForward);

static void BM_Td3Update(benchmark::State& st) {
  Td3Hyper h = Td3Hyper::preset("safefallback");
  h.batch_size = static_cast<int>(st.range(0));
  Td3Agent agent(h, 4);
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    ExperienceTuple t;
    for (double& v : t.s.values) v = std::uniform_real_distribution<double>(0, 1)(rng);
    t.s_next = t.s;
    t.a = random_action(rng);
    t.r = -1.0;
    agent.store(t);
  }
  for (auto _ : st) benchmark::DoNotOptimize(agent.update(1));
}
BENCHMARK(BM_Td3Update)->Arg(16)->Arg(100)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
