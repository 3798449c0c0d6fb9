// Serial reference kernels against the OpenMP kernels, plus a full solve.
// Shapes follow the desk experiment (K = 3) with growing N = M.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "glift/kernels.hpp"
#include "glift/rng.hpp"
#include "glift/solver.hpp"
#include "glift/synth.hpp"

using namespace glift;

namespace {

struct Problem {
  kernels::DictMatrix<double> a;
  kernels::DictRowMatrix<double> a_rows;
  CMatrix b, x;
  CVector y;

  explicit Problem(Index n) {
    Sampler s(1, static_cast<std::uint64_t>(n));
    a = s.normal_matrix(n, n) / std::sqrt(double(n));
    a_rows = a;
    b = s.complex_normal_matrix(n, 3);
    x = s.complex_normal_matrix(3, n);
    y = s.complex_normal_vector(n);
  }
};

void forward_reference(benchmark::State& st) {
  const Problem p(st.range(0));
  CVector y;
  for (auto _ : st) {
    kernels::reference::lift_forward(p.a, p.b, p.x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void forward_omp(benchmark::State& st) {
  const Problem p(st.range(0));
  CVector y;
  for (auto _ : st) {
    kernels::omp::lift_forward(p.a_rows, p.b, p.x, y);
    benchmark::DoNotOptimize(y.data());
  }
  st.counters["threads"] = omp_get_max_threads();
}

void adjoint_reference(benchmark::State& st) {
  const Problem p(st.range(0));
  CMatrix x;
  for (auto _ : st) {
    kernels::reference::lift_adjoint(p.a, p.b, p.y, x);
    benchmark::DoNotOptimize(x.data());
  }
}

void adjoint_omp(benchmark::State& st) {
  const Problem p(st.range(0));
  CMatrix x;
  for (auto _ : st) {
    kernels::omp::lift_adjoint(p.a, p.b, p.y, x);
    benchmark::DoNotOptimize(x.data());
  }
  st.counters["threads"] = omp_get_max_threads();
}

void desk_solve(benchmark::State& st) {
  InstanceParams p;
  p.sigma = 0.1;
  p.gamma_target = 0.02;
  p.exec = st.range(0) ? Exec::parallel : Exec::serial;
  const Instance inst = gen_instance(p);
  for (auto _ : st) {
    auto sol = solve_group_lasso(*inst.op, inst.y, 1.6);
    benchmark::DoNotOptimize(sol.estimate.data());
  }
}

}  // namespace

BENCHMARK(forward_reference)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(forward_omp)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(adjoint_reference)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(adjoint_omp)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(desk_solve)->Arg(0)->Arg(1)->ArgName("parallel");

BENCHMARK_MAIN();
