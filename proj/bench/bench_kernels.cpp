// Serial reference kernels against their OpenMP versions, plus one full
// entropic GW solve at the training batch size.

#include <benchmark/benchmark.h>

#include <limits>
#include <random>

#include "gwgen/gw_core.hpp"
#include "gwgen/kernels.hpp"

namespace {

using gwgen::Index;
using gwgen::Matrix;
using gwgen::Vector;
namespace par = gwgen::kernels::parallel;
namespace ser = gwgen::kernels::serial;

Matrix gaussian(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = n01(rng);
  return m;
}

template <bool Parallel>
void pairwise(benchmark::State& s) {
  const Matrix x = gaussian(s.range(0), 2, 1);
  for (auto _ : s) benchmark::DoNotOptimize(Parallel ? par::pairwise_distances(x) : ser::pairwise_distances(x));
  s.SetComplexityN(s.range(0));
}

template <bool Parallel>
void pairwise_backward(benchmark::State& s) {
  const Matrix x = gaussian(s.range(0), 2, 2);
  const Matrix u = gaussian(s.range(0), s.range(0), 3);
  for (auto _ : s)
    benchmark::DoNotOptimize(Parallel ? par::pairwise_distances_backward(x, u, 1e-12)
                                      : ser::pairwise_distances_backward(x, u, 1e-12));
}

template <bool Parallel>
void gibbs(benchmark::State& s) {
  const Index n = s.range(0);
  const Matrix c = gaussian(n, n, 4).cwiseAbs();
  const Vector f = Vector::Zero(n), g = Vector::Zero(n);
  for (auto _ : s)
    benchmark::DoNotOptimize(Parallel ? par::gibbs_kernel(c, f, g, 0.01) : ser::gibbs_kernel(c, f, g, 0.01));
}

template <bool Parallel>
void row_lse(benchmark::State& s) {
  const Index n = s.range(0);
  const Matrix c = gaussian(n, n, 5).cwiseAbs();
  const Vector f = Vector::Zero(n), g = Vector::Zero(n);
  for (auto _ : s)
    benchmark::DoNotOptimize(Parallel ? par::row_lse(c, f, g, 0.01) : ser::row_lse(c, f, g, 0.01));
}

template <bool Parallel>
void matvec(benchmark::State& s) {
  const Index n = s.range(0);
  const gwgen::kernels::RowMatrix k = gaussian(n, n, 6).cwiseAbs();
  const Vector x = gaussian(n, 1, 7);
  for (auto _ : s) benchmark::DoNotOptimize(Parallel ? par::matvec(k, x) : ser::matvec(k, x));
}

template <bool Parallel>
void floyd(benchmark::State& s) {
  const Index n = s.range(0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix g = Matrix::Constant(n, n, std::numeric_limits<double>::infinity());
  g.diagonal().setZero();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (j == i + 1 || u(rng) < 0.05) g(i, j) = g(j, i) = 0.1 + u(rng);
  for (auto _ : s) {
    Matrix d = g;
    Parallel ? par::floyd_warshall(d) : ser::floyd_warshall(d);
    benchmark::DoNotOptimize(d.data());
  }
}

void entropic_gw(benchmark::State& s) {
  const Index n = s.range(0);
  const auto d = gwgen::pairwise_euclidean(gaussian(n, 2, 9));
  const auto dbar = gwgen::pairwise_euclidean(gaussian(n, 2, 10));
  const auto p = gwgen::ProbabilityVector::uniform(n);
  gwgen::GwConfig cfg;
  cfg.outer_iters = static_cast<int>(s.range(1));
  for (auto _ : s) benchmark::DoNotOptimize(gwgen::solve_entropic_gw(d, dbar, p, p, cfg).loss);
}

}  // namespace

BENCHMARK(pairwise<false>)->Arg(256)->Arg(1024);
BENCHMARK(pairwise<true>)->Arg(256)->Arg(1024);
BENCHMARK(pairwise_backward<false>)->Arg(256)->Arg(1024);
BENCHMARK(pairwise_backward<true>)->Arg(256)->Arg(1024);
BENCHMARK(gibbs<false>)->Arg(256)->Arg(1024);
BENCHMARK(gibbs<true>)->Arg(256)->Arg(1024);
BENCHMARK(row_lse<false>)->Arg(256)->Arg(1024);
BENCHMARK(row_lse<true>)->Arg(256)->Arg(1024);
BENCHMARK(matvec<false>)->Arg(256)->Arg(1024);
BENCHMARK(matvec<true>)->Arg(256)->Arg(1024);
BENCHMARK(floyd<false>)->Arg(200)->Arg(500);
BENCHMARK(floyd<true>)->Arg(200)->Arg(500);
BENCHMARK(entropic_gw)->Args({256, 10})->Args({256, 50})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
