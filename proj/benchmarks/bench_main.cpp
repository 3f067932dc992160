#include "mrcie/equilibrium.hpp"
#include "mrcie/metrics.hpp"
#include "mrcie/sim.hpp"
#include "mrcie/synthesis.hpp"

#include <benchmark/benchmark.h>

using namespace mrcie;

namespace {

const WtgPlant& plant() {
  static const WtgPlant w = build_wtg_plant(DfigModel{});
  return w;
}

AugmentedSystem augmented(double eta_m, double kappa) {
  return assemble_augmented(assemble_plant(DieselModel{}, plant().reduced), ReferenceModel{}, {eta_m, kappa});
}

void BM_Linearize(benchmark::State& st) {
  const DfigModel m = plant().model;
  for (auto _ : st) {
    const auto op = solve_equilibrium(m, EquilibriumTargets{});
    benchmark::DoNotOptimize(linearize(m, op));
  }
}
BENCHMARK(BM_Linearize)->Unit(benchmark::kMillisecond);

void BM_SynthesizeDelayFree(benchmark::State& st) {
  const auto aug = augmented(0.0, 0.0);
  for (auto _ : st) benchmark::DoNotOptimize(synthesize(aug));
}
BENCHMARK(BM_SynthesizeDelayFree)->Unit(benchmark::kMillisecond);

// the 52x52 delayed block dominates pipeline time
void BM_SynthesizeDelayed(benchmark::State& st) {
  const auto aug = augmented(0.01, 0.02);
  for (auto _ : st) benchmark::DoNotOptimize(synthesize(aug));
}
BENCHMARK(BM_SynthesizeDelayed)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_Simulate(benchmark::State& st) {
  Scenario s;
  s.wtg = plant();
  s.fidelity = static_cast<Fidelity>(st.range(0));
  s.duration = 10.0;
  MrcGroup g;
  g.pom_bus = "1";
  g.controller.kind = ControllerSpec::Kind::Washout;
  g.controller.K_ie = 0.1;
  s.groups = {g};
  s.disturbances = {{1.0, 0.05, "18"}};
  st.SetLabel(to_string(s.fidelity));
  for (auto _ : st) benchmark::DoNotOptimize(simulate(s));
}
BENCHMARK(BM_Simulate)
    ->Arg(static_cast<int>(Fidelity::Nonlinear))
    ->Arg(static_cast<int>(Fidelity::Linear10))
    ->Arg(static_cast<int>(Fidelity::Reduced1))
    ->Unit(benchmark::kMillisecond);

void BM_DelayedStable(benchmark::State& st) {
  const auto aug = augmented(0.0, 0.0);
  const auto res = synthesize(aug);
  for (auto _ : st) benchmark::DoNotOptimize(delayed_stable(aug.A, aug.B_tilde, res.K, 0.1));
}
BENCHMARK(BM_DelayedStable)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
