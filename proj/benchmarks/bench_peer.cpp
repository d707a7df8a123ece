#include <benchmark/benchmark.h>

#include "peer/harness.hpp"

using namespace peer;

namespace {

StageBlock constant_block(const SplitProblem& problem, const VectorXd& u0,
                          int s, double dt) {
  StageBlock block;
  block.t_n = 0.0;
  block.dt = dt;
  for (int i = 0; i < s; ++i) {
    block.stages.push_back(u0);
    block.f0_vals.push_back(problem.f0(u0));
    block.f1_vals.push_back(problem.f1(u0));
  }
  return block;
}

}  // namespace

static void BM_ConstructOrder4(benchmark::State& state) {
  const auto m = builtin_method(4);
  MatrixXd r_lower = m.R;
  r_lower.diagonal().setZero();
  for (auto _ : state) {
    auto built = construct_order_s(m.c, m.gamma, m.P, m.S2, r_lower);
    benchmark::DoNotOptimize(built);
  }
}
BENCHMARK(BM_ConstructOrder4);

static void BM_ValidateOrder4(benchmark::State& state) {
  const auto m = builtin_method(4);
  for (auto _ : state) {
    auto report = validate(m);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_ValidateOrder4);

static void BM_StepBalanceLaw(benchmark::State& state) {
  const auto m = builtin_method(2);
  const auto problem = wb_boscarino_pareschi();
  const auto block = constant_block(problem, *problem.initial, m.s, 0.1);
  for (auto _ : state) {
    auto next = step(m, problem, block, {});
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_StepBalanceLaw);

static void BM_IntegrateStiffPendulum(benchmark::State& state) {
  const auto m = builtin_method(3);
  const auto rp = ap_pareschi_russo(1e-6);
  for (auto _ : state) {
    auto traj = integrate(m, rp.full, *rp.full.initial, 1.0, 0.025);
    benchmark::DoNotOptimize(traj);
  }
}
BENCHMARK(BM_IntegrateStiffPendulum);

static void BM_StabilityScan(benchmark::State& state) {
  const auto m = builtin_method(2);
  for (auto _ : state) {
    auto field = stability_scan(m, {});
    benchmark::DoNotOptimize(field);
  }
}
BENCHMARK(BM_StabilityScan);

static void BM_StepRelaxationGrid(benchmark::State& state) {
  const auto m = builtin_method(2);
  const auto rp = jin_xin_demo(1e-6, 64);
  const auto block =
      constant_block(rp.full, *rp.full.initial, m.s, 0.0078125);
  for (auto _ : state) {
    auto next = step(m, rp.full, block, {});
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_StepRelaxationGrid);

BENCHMARK_MAIN();
