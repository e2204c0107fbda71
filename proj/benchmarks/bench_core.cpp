#include <benchmark/benchmark.h>

#include "gradhess/data.hpp"
#include "gradhess/estimator.hpp"
#include "gradhess/gradops.hpp"
#include "gradhess/linalg.hpp"
#include "gradhess/mlp.hpp"
#include "gradhess/rng.hpp"

using namespace gradhess;

namespace {

linalg::SymMatrix random_spd(int d, std::uint64_t seed) {
  RngStream stream(seed);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = stream.next_gaussian();
  }
  Matrix s = a * a.transpose() / d + 0.1 * Matrix::Identity(d, d);
  return linalg::SymMatrix(0.5 * (s + s.transpose()));
}

Vector random_vec(int d, std::uint64_t seed) {
  RngStream stream(seed);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = stream.next_gaussian();
  return v;
}

void BM_OperatorNorm(benchmark::State& state) {
  const auto a = random_spd(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(linalg::operator_norm(a));
  }
}
BENCHMARK(BM_OperatorNorm)->Arg(16)->Arg(64)->Arg(256);

void BM_SpdSolve(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto a = random_spd(d, 2);
  const Vector v = random_vec(d, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(linalg::spd_solve(a, v));
  }
}
BENCHMARK(BM_SpdSolve)->Arg(16)->Arg(64)->Arg(256);

void BM_SyntheticGeneration(benchmark::State& state) {
  data::SyntheticConfig config;
  config.d = 6;
  config.n_samples = state.range(0);
  config.covariance =
      data::CovarianceSpec::dense(data::make_random_dense_covariance(6, 4));
  config.w0 = random_vec(6, 5);
  config.inherent_noise_std = 0.1;
  config.seed = 6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(data::generate_synthetic(config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SyntheticGeneration)->Arg(10000)->Arg(100000);

void BM_GradientCovariance(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  RngStream stream(7);
  gradops::GradientSample sample;
  sample.w = Vector::Zero(6);
  sample.n = 256;
  for (int j = 0; j < k; ++j) sample.gradients.push_back(random_vec(6, j));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradops::gradient_covariance(sample));
  }
}
BENCHMARK(BM_GradientCovariance)->Arg(500)->Arg(3125);

void BM_EstimatePipeline(benchmark::State& state) {
  data::SyntheticConfig config;
  config.d = 6;
  config.n_samples = 100000;
  config.covariance =
      data::CovarianceSpec::dense(data::make_random_dense_covariance(6, 8));
  config.w0 = random_vec(6, 9);
  config.inherent_noise_std = 0.1;
  config.seed = 10;
  const auto dataset = data::generate_synthetic(config);
  const Vector w = random_vec(6, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimator::estimate_hessian(dataset, w, 256, 0.01, 12));
  }
}
BENCHMARK(BM_EstimatePipeline);

void BM_MlpGradient(benchmark::State& state) {
  mlp::MlpSyntheticConfig config;
  config.d = 10;
  config.hidden = {20, 10};
  config.n_samples = 1000;
  config.seed = 13;
  const auto generator = mlp::make_mlp_generator(config);
  const auto dataset = mlp::sample_mlp_dataset(config, generator);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        mlp::mlp_gradient(generator, dataset.X, dataset.y));
  }
}
BENCHMARK(BM_MlpGradient);

}  // namespace

BENCHMARK_MAIN();
