#include <benchmark/benchmark.h>

#include "splitcem/assembly.hpp"
#include "splitcem/problems.hpp"
#include "splitcem/spaces.hpp"
#include "splitcem/steppers.hpp"

using namespace splitcem;

namespace {

Preset sized(int nc, int nf) {
  PresetOverrides ov;
  ov.coarse_cells = nc;
  ov.fine_cells = nf;
  return preset("E1", ov);
}

void BM_AssembleStiffness(benchmark::State& state) {
  const int nf = static_cast<int>(state.range(0));
  const Preset p = sized(nf / 10, nf);
  const auto g = build_grids(p.coarse_cells, p.fine_cells);
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(g, p.problem.kappa));
}
BENCHMARK(BM_AssembleStiffness)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_BuildSpaces(benchmark::State& state) {
  const int nf = static_cast<int>(state.range(0));
  const Preset p = sized(nf / 10, nf);
  const auto g = build_grids(p.coarse_cells, p.fine_cells);
  for (auto _ : state) benchmark::DoNotOptimize(build_spaces(g, p.problem.kappa, {}));
}
BENCHMARK(BM_BuildSpaces)->Arg(40)->Arg(100)->Unit(benchmark::kMillisecond);

template <Scheme S>
void BM_Step(benchmark::State& state) {
  const Preset p = sized(10, 100);
  const auto g = build_grids(p.coarse_cells, p.fine_cells);
  const FineProblem fine(g, p.problem);
  const MultiscaleSpaces sp = build_spaces(g, p.problem.kappa, {});
  auto stepper = make_stepper(S, fine, &sp, p.dt, NewtonConfig{}, ReactionMode::fully_explicit);
  SchemeState s = stepper->initial_state(Vector::Zero(g.num_dofs()));
  for (auto _ : state) stepper->advance(s);
}
BENCHMARK_TEMPLATE(BM_Step, Scheme::fine_be)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Step, Scheme::cem_plus)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Step, Scheme::pexp)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
