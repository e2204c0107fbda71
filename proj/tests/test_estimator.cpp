#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gradhess/errors.hpp"
#include "gradhess/estimator.hpp"
#include "gradhess/serialize.hpp"
#include "test_helpers.hpp"

using namespace gradhess;
namespace gd = gradhess::data;
namespace ge = gradhess::estimator;

namespace {

gd::SyntheticConfig small_fig_config(std::uint64_t seed, long n_samples) {
  gd::SyntheticConfig config;
  config.d = 6;
  config.n_samples = n_samples;
  config.seed = RngStream(seed).substream("data").next_u64();
  config.covariance = gd::CovarianceSpec::dense(
      gd::make_random_dense_covariance(6, seed));
  RngStream stream = RngStream(seed).substream("w0");
  config.w0 = testutil::random_vector(6, stream);
  config.inherent_noise_std = 0.1;
  return config;
}

Vector least_squares(const gd::RegressionDataset& dataset) {
  const Matrix gram = dataset.X.transpose() * dataset.X;
  return linalg::spd_solve(linalg::SymMatrix(gram),
                           dataset.X.transpose() * dataset.y);
}

}  // namespace

TEST_CASE("estimate_hessian recovers a dense covariance") {
  const auto config = small_fig_config(1, 200000);
  const auto dataset = gd::generate_synthetic(config);
  RngStream stream = RngStream(2).substream("init");
  const Vector w = testutil::random_vector(6, stream);

  const auto estimate = ge::estimate_hessian(dataset, w, 256, 0.01, 3);
  REQUIRE(estimate.diagnostics.has_value());
  CHECK(estimate.diagnostics->r < 0.35);  // k = 781 here; tighter with more
  CHECK(estimate.diagnostics->reference == gradops::ReferenceKind::kTrueSigma);
  CHECK(estimate.k == 781);
  CHECK(estimate.noise_variance == doctest::Approx(256.0));

  ge::PipelineOptions no_noise;
  no_noise.injection = ge::InjectionPolicy::none();
  const auto clean = ge::estimate_hessian(dataset, w, 256, 0.01, 3, no_noise);
  CHECK(clean.diagnostics->r > 0.9);
}

TEST_CASE("estimate_hessian with n = N fails for lack of batches") {
  const auto config = small_fig_config(4, 1000);
  const auto dataset = gd::generate_synthetic(config);
  CHECK_THROWS_AS(
      ge::estimate_hessian(dataset, config.w0, 1000, 0.01, 1),
      InsufficientBatchesError);
}

TEST_CASE("file-backed estimates use the pooled empirical reference") {
  const auto config = small_fig_config(5, 20000);
  const auto dataset = gd::generate_synthetic(config);
  const std::string path = "/tmp/gradhess_test_ref.csv";
  {
    std::ofstream out(path, std::ios::trunc);
    out << "x0,x1,x2,x3,x4,x5,y\n";
    for (long i = 0; i < dataset.n_samples(); ++i) {
      for (int j = 0; j < 6; ++j) {
        out << serialize::format_double(dataset.X(i, j)) << ',';
      }
      out << serialize::format_double(dataset.y[i]) << '\n';
    }
  }
  const auto file_data = gd::load_csv(path, "y", {}, {});
  const Vector w = least_squares(file_data);
  const auto estimate = ge::estimate_hessian(file_data, w, 256,
                                             std::nullopt, 6);
  CHECK(estimate.diagnostics->reference ==
        gradops::ReferenceKind::kPooledEmpirical);
  CHECK(estimate.diagnostics->r < 0.6);  // conservative mode, k = 78
}

TEST_CASE("distort_weights lands at exactly the requested distance") {
  RngStream stream(6);
  const Vector w0 = testutil::random_vector(5, stream);
  CHECK((ge::distort_weights(w0, 0.0, 9) - w0).norm() == 0.0);

  for (double c : {0.1, 1.0, 10.0}) {
    const Vector w = ge::distort_weights(w0, c, 9);
    CHECK(std::abs((w - w0).norm() - c) <= 1e-12 * std::max(1.0, c));
  }
  CHECK((ge::distort_weights(w0, 2.0, 9) - ge::distort_weights(w0, 2.0, 9))
            .norm() == 0.0);
  CHECK((ge::distort_weights(w0, 2.0, 9) - ge::distort_weights(w0, 2.0, 10))
            .norm() != 0.0);
  CHECK_THROWS_AS(ge::distort_weights(w0, -1.0, 9), InvalidInputError);
}

TEST_CASE("run_sweep validates its spec") {
  auto spec = ge::default_sweep_spec(ge::SweepAxis::kNoiseStd, {});
  CHECK_THROWS_AS(ge::run_sweep(spec), InvalidInputError);
  spec.values = {16.0, 8.0};
  CHECK_THROWS_AS(ge::run_sweep(spec), InvalidInputError);
  spec.values = {8.0, 8.0};
  CHECK_THROWS_AS(ge::run_sweep(spec), InvalidInputError);
}

TEST_CASE("run_sweep: single point, failures recorded, determinism") {
  auto spec = ge::default_sweep_spec(ge::SweepAxis::kBatchSizeN,
                                     {256.0, 4096.0});
  spec.base.n_samples = 2048;  // 4096 is infeasible on purpose
  spec.repeats = 1;
  spec.seeds = {3};
  const auto result = ge::run_sweep(spec);
  REQUIRE(result.points.size() == 2);
  CHECK(result.points[0].r.has_value());
  CHECK(result.aggregates[0].std_r == 0.0);
  CHECK(!result.points[1].r.has_value());
  CHECK(!result.points[1].error.empty());
  CHECK(result.aggregates[1].failures == 1);

  const auto again = ge::run_sweep(spec);
  CHECK(serialize::sweep_csv(result) == serialize::sweep_csv(again));
}

TEST_CASE("r improves with more batches (monotone trend over repeats)") {
  auto spec = ge::default_sweep_spec(ge::SweepAxis::kNumBatchesK,
                                     {50.0, 200.0, 800.0});
  spec.base.d = 4;
  spec.base.n_samples = 64 * 800;
  spec.batch_size_n = 64;
  spec.repeats = 4;
  const auto result = ge::run_sweep(spec);
  REQUIRE(result.aggregates.size() == 3);
  CHECK(result.aggregates[0].mean_r >= result.aggregates[1].mean_r);
  CHECK(result.aggregates[1].mean_r >= result.aggregates[2].mean_r);
}

TEST_CASE("larger batch sizes flatten the r-vs-noise curve") {
  // Batch-size x noise grid: the spread (max - min) of mean r across the
  // tested noise levels shrinks as n grows.
  auto spread_at = [](int n) {
    auto spec = ge::default_sweep_spec(ge::SweepAxis::kNoiseStd,
                                       {12.0, 16.0, 24.0, 32.0});
    spec.base.n_samples = 131072;
    spec.batch_size_n = n;
    spec.repeats = 2;
    const auto result = ge::run_sweep(spec);
    double lo = 1e300, hi = -1e300;
    for (const auto& agg : result.aggregates) {
      lo = std::min(lo, agg.mean_r);
      hi = std::max(hi, agg.mean_r);
    }
    return hi - lo;
  };
  CHECK(spread_at(1024) < spread_at(128));
}

TEST_CASE("noise-std sweep dips at sqrt(n) (reduced scale)") {
  auto spec = ge::default_sweep_spec(ge::SweepAxis::kNoiseStd,
                                     {8.0, 16.0, 24.0});
  spec.base.n_samples = 200000;
  spec.repeats = 3;
  const auto result = ge::run_sweep(spec);
  CHECK(result.aggregates[1].mean_r < result.aggregates[0].mean_r);
  CHECK(result.aggregates[1].mean_r < result.aggregates[2].mean_r);
}

TEST_CASE("ablation ordering at the converged weights") {
  const auto config = small_fig_config(7, 200000);
  const auto dataset = gd::generate_synthetic(config);
  const Vector w = least_squares(dataset);
  const auto cmp = ge::compare_estimators(dataset, w, 256, 0.01, 8);
  CHECK(cmp.r_noise_eq_n < cmp.r_times_n);
  CHECK(cmp.r_times_n < cmp.r_no_noise);
  CHECK(cmp.r_no_noise >= 0.9);
  CHECK(cmp.r_noise_eq_n < cmp.r_no_noise - 0.3);
}

TEST_CASE("times_n is exactly the rescaled clean covariance") {
  const auto config = small_fig_config(9, 20000);
  const auto dataset = gd::generate_synthetic(config);
  const Vector w = config.w0;
  const std::uint64_t seed = 11;

  ge::PipelineOptions no_noise;
  no_noise.injection = ge::InjectionPolicy::none();
  const auto clean = ge::estimate_hessian(dataset, w, 256, 0.01, seed,
                                          no_noise);
  const auto sigma = config.covariance.materialize(6);
  const double expected = linalg::relative_op_distance(
      linalg::SymMatrix::from_symmetric(256.0 * clean.s_g.mat()), sigma);

  const auto cmp = ge::compare_estimators(dataset, w, 256, 0.01, seed);
  CHECK(cmp.r_times_n == doctest::Approx(expected).epsilon(1e-12));
}
