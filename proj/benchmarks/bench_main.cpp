#include <benchmark/benchmark.h>

#include "varreg/estimates.hpp"
#include "varreg/operators.hpp"
#include "varreg/regularizers.hpp"
#include "varreg/rng.hpp"
#include "varreg/solvers.hpp"

using namespace varreg;

namespace {

void BM_RadonApply(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const auto map = make_radon(RadonGeometry::uniform(g, 2 * g, 2 * g));
  const Vector u = disk_phantom(g, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(map.apply(u));
  state.SetItemsProcessed(state.iterations() * map.out_dim());
}
BENCHMARK(BM_RadonApply)->Arg(16)->Arg(32)->Arg(64);

void BM_RadonAdjoint(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const auto map = make_radon(RadonGeometry::uniform(g, 2 * g, 2 * g));
  const Vector y = Rng(1).gaussian_vector(map.out_dim());
  for (auto _ : state) benchmark::DoNotOptimize(map.adjoint(y));
  state.SetItemsProcessed(state.iterations() * map.out_dim());
}
BENCHMARK(BM_RadonAdjoint)->Arg(16)->Arg(32)->Arg(64);

void BM_TikhonovCg(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const auto map = make_radon(RadonGeometry::uniform(g, 2 * g, 2 * g));
  const Vector v = map.apply(disk_phantom(g, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(solve_tikhonov_exact(map, v, 1e-2));
}
BENCHMARK(BM_TikhonovCg)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_FistaL1(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  Rng rng(7);
  DenseMatrix a(n / 2, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.gaussian();
  const auto map = make_dense(a / std::sqrt(static_cast<double>(n / 2)));
  const auto inst = construct_source_instance(map, Regularizer::l1(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_fista(map, inst.v_star, 1e-2, Regularizer::l1()));
}
BENCHMARK(BM_FistaL1)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TvPath(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const std::vector<double> kernel{0.25, 0.5, 0.25};
  const auto map = make_convolution(kernel, n);
  const auto reg = Regularizer::tv_1d(n);
  const auto inst = construct_source_instance(map, reg, 5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_primal_dual(map, inst.v_star, 1e-2, reg));
}
BENCHMARK(BM_TvPath)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TvImage(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const auto map = make_radon(RadonGeometry::uniform(g, 2 * g, 2 * g));
  const auto reg = Regularizer::tv_2d(g, g);
  const Vector v = map.apply(disk_phantom(g, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(solve_primal_dual(map, v, 1e-2, reg));
}
BENCHMARK(BM_TvImage)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
