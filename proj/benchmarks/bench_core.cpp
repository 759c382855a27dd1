#include "pdrci/geometry.hpp"
#include "pdrci/lmi.hpp"
#include "pdrci/synthesis.hpp"

#include <benchmark/benchmark.h>

using namespace pdrci;

namespace {

const ProblemSpec& di() {
  static const ProblemSpec p = preset("demo-double-integrator");
  return p;
}

void BM_AssembleStageOne(benchmark::State& st) {
  const int d = static_cast<int>(st.range(0));
  const MatrixXd Pi = synthesis::select_initial_P(4, 2);
  for (auto _ : st) {
    conic::ConicProgram p;
    const auto L = lmi::declare_layout(p, di(), 4, lmi::Stage::One, false, 1e-7);
    lmi::FixedPoint fx;
    fx.P0.assign(2, Pi);
    fx.Y.assign(4, MatrixXd::Identity(2, 2));
    const lmi::Context c{p, L, fx, di()};
    auto conds = lmi::assemble_stage1(c, d, 1e-7);
    benchmark::DoNotOptimize(conds.data());
  }
}
BENCHMARK(BM_AssembleStageOne)->Arg(0)->Arg(1)->Arg(2)->Arg(3);

void BM_SolveMaxEig(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  MatrixXd M = MatrixXd::Random(n, n);
  M = (M + M.transpose()).eval();
  for (auto _ : st) {
    conic::ConicProgram p;
    auto t = p.free_var("t", 1, 1);
    p.add_psd("tI-M", conic::scale(p.entry(t), MatrixXd::Identity(n, n)) - conic::AffineExpr(M));
    p.minimize(p.expr(t));
    benchmark::DoNotOptimize(conic::solve(p).objective);
  }
}
BENCHMARK(BM_SolveMaxEig)->Arg(4)->Arg(16)->Arg(48);

void BM_StageOneInitial(benchmark::State& st) {
  synthesis::SynthesisOptions o;
  const MatrixXd Pi = synthesis::select_initial_P(4, 2);
  for (auto _ : st) benchmark::DoNotOptimize(synthesis::solve_stage1_initial(di(), Pi, o).W.data());
}
BENCHMARK(BM_StageOneInitial)->Unit(benchmark::kMillisecond);

void BM_StageTwoStep(benchmark::State& st) {
  synthesis::SynthesisOptions o;
  o.iters_stage1 = 2;
  const auto s0 = synthesis::iterate_stage1(di(), synthesis::solve_stage1_initial(di(), synthesis::select_initial_P(4, 2), o), o);
  for (auto _ : st) {
    auto s = s0;
    benchmark::DoNotOptimize(synthesis::stage2_step(di(), s, o));
  }
}
BENCHMARK(BM_StageTwoStep)->Unit(benchmark::kMillisecond);

void BM_McVolume(benchmark::State& st) {
  geometry::ParamPolytope pp;
  pp.P = {synthesis::select_initial_P(8, 2), synthesis::select_initial_P(8, 2) * 1.1};
  pp.W = MatrixXd::Identity(2, 2);
  const auto h = geometry::robust_intersection(pp);
  const auto box = geometry::bounding_box(h);
  for (auto _ : st) benchmark::DoNotOptimize(geometry::mc_volume(h, box, st.range(0), 1).value);
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_McVolume)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);

void BM_VertexEnumerate(benchmark::State& st) {
  geometry::ParamPolytope pp;
  pp.P = {synthesis::select_initial_P(static_cast<int>(st.range(0)), 2)};
  pp.W = MatrixXd::Identity(2, 2);
  const auto h = geometry::robust_intersection(pp);
  for (auto _ : st) benchmark::DoNotOptimize(geometry::vertex_enumerate_2d(h).area);
}
BENCHMARK(BM_VertexEnumerate)->Arg(4)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
