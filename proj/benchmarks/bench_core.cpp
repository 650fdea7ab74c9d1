#include <benchmark/benchmark.h>

#include "clb/model.hpp"
#include "clb/solvers.hpp"
#include "clb/umps.hpp"

using namespace clb;

namespace {

void BM_contract_rank4(benchmark::State& state) {
  const long d = state.range(0);
  Tensor a({d, 2, d});
  Tensor w({2, 2, 2, 2});
  for (auto& v : a.data()) v = 0.5;
  for (auto& v : w.data()) v = 0.25;
  for (auto _ : state) {
    Tensor out = contract(w, a, {{3, 1}});
    benchmark::DoNotOptimize(out.data().data());
  }
}
BENCHMARK(BM_contract_rank4)->Arg(16)->Arg(32)->Arg(64);

void BM_svd_truncate(benchmark::State& state) {
  const long d = state.range(0);
  Tensor m({d, d});
  std::uint64_t s = 88172645463325252ull;
  for (auto& v : m.data()) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    v = Complex(static_cast<double>(s % 1000) / 1000.0 - 0.5, 0);
  }
  for (auto _ : state) {
    auto res = svd_truncate(m, d / 2);
    benchmark::DoNotOptimize(res.s.data());
  }
}
BENCHMARK(BM_svd_truncate)->Arg(64)->Arg(128);

void BM_canonicalize(benchmark::State& state) {
  const long chi = state.range(0);
  FixedPointResult fp = power_fixed_point(MeasurementAngle(1.2), chi, 1e-6, 64);
  for (auto _ : state) {
    CanonicalForm cf = canonicalize(fp.psi);
    benchmark::DoNotOptimize(cf.c.data().data());
  }
}
BENCHMARK(BM_canonicalize)->Arg(8)->Arg(16)->Arg(32);

void BM_power_step(benchmark::State& state) {
  const long chi = state.range(0);
  const RowOperator h = build_bulk_mpo(MeasurementAngle(1.3));
  FixedPointResult fp = power_fixed_point(MeasurementAngle(1.3), chi, 1e-6, 64);
  for (auto _ : state) {
    auto step = power_step(fp.psi, h, chi);
    benchmark::DoNotOptimize(step.psi.a.data().data());
  }
}
BENCHMARK(BM_power_step)->Arg(8)->Arg(16)->Arg(32);

void BM_correlator_100(benchmark::State& state) {
  const long chi = state.range(0);
  FixedPointResult fp = power_fixed_point(MeasurementAngle(1.45), chi, 1e-8, 400);
  for (auto _ : state) {
    auto c = correlator(fp.psi, PauliOp::X, 100);
    benchmark::DoNotOptimize(c.values.data());
  }
}
BENCHMARK(BM_correlator_100)->Arg(16)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
