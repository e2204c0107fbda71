#include "gradhess/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "gradhess/errors.hpp"
#include "gradhess/parallel.hpp"
#include "gradhess/rng.hpp"

namespace gradhess::estimator {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return RngStream(seed).substream(name).next_u64();
}

// Advances the caller's stream; repeated calls yield distinct draws.
Vector random_gaussian_vector(int d, RngStream& stream) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = stream.next_gaussian();
  return v;
}

}  // namespace

data::BatchSet prepare_batches(const data::RegressionDataset& dataset, int n,
                               std::uint64_t seed,
                               const PipelineOptions& options) {
  const data::RegressionDataset* source = &dataset;
  data::RegressionDataset centered_dataset;
  if (options.center == CenterMode::kGlobal) {
    centered_dataset = data::center_dataset(dataset);
    source = &centered_dataset;
  }
  data::BatchSet batches =
      data::partition_batches(*source, n, derive_seed(seed, "partition"));
  if (options.max_batches > 0) {
    if (options.max_batches > batches.k) {
      throw InvalidInputError(
          "estimate_hessian: requested " +
          std::to_string(options.max_batches) + " batches, only " +
          std::to_string(batches.k) + " available");
    }
    batches.batches.resize(options.max_batches);
    batches.k = options.max_batches;
  }
  if (options.center == CenterMode::kPerBatch) {
    batches = data::center_batches(batches);
  }
  return batches;
}

data::BatchSet apply_injection(const data::BatchSet& batches,
                               std::optional<double> inherent_variance,
                               std::uint64_t seed,
                               const InjectionPolicy& policy) {
  const std::uint64_t inject_seed = derive_seed(seed, "noise");
  switch (policy.kind) {
    case InjectionPolicy::Kind::kAuto:
      return data::inject_target_noise(
          batches, data::calibrate_noise(batches.n, inherent_variance),
          inject_seed);
    case InjectionPolicy::Kind::kConservative:
      return data::inject_target_noise(
          batches, data::calibrate_noise(batches.n, std::nullopt),
          inject_seed);
    case InjectionPolicy::Kind::kManual:
      return data::inject_target_noise(batches, policy.manual_variance,
                                       inject_seed);
    case InjectionPolicy::Kind::kNone:
      return batches;
  }
  throw InvalidInputError("apply_injection: unknown policy");
}

std::pair<linalg::SymMatrix, gradops::ReferenceKind> reference_covariance(
    const data::RegressionDataset& dataset, const data::BatchSet& batches,
    const PipelineOptions& options) {
  if (options.reference) {
    return {*options.reference, gradops::ReferenceKind::kTrueSigma};
  }
  if (const auto* config =
          std::get_if<data::SyntheticConfig>(&dataset.provenance)) {
    return {config->covariance.materialize(config->d),
            gradops::ReferenceKind::kTrueSigma};
  }
  return {data::pooled_empirical_covariance(batches),
          gradops::ReferenceKind::kPooledEmpirical};
}

gradops::HessianEstimate estimate_hessian(
    const data::RegressionDataset& dataset, const Vector& w, int n,
    std::optional<double> inherent_variance, std::uint64_t seed,
    const PipelineOptions& options) {
  if (w.size() != dataset.d()) {
    throw DimensionError("estimate_hessian: w length does not match dataset");
  }
  const data::BatchSet clean = prepare_batches(dataset, n, seed, options);
  const auto [reference, kind] = reference_covariance(dataset, clean, options);
  const data::BatchSet noisy =
      apply_injection(clean, inherent_variance, seed, options.injection);

  const auto sample = gradops::gradient_sample(noisy, w, options.threads);
  auto estimate = gradops::gradient_covariance(sample);
  estimate.noise_variance =
      inherent_variance.value_or(0.0) + noisy.injected_variance;
  estimate.diagnostics = gradops::Diagnostics{
      linalg::relative_op_distance(estimate.s_g, reference), kind};
  return estimate;
}

Vector distort_weights(const Vector& w0, double c, std::uint64_t seed) {
  if (c < 0.0) throw InvalidInputError("distort_weights: c >= 0 required");
  RngStream stream = RngStream(seed).substream("distort");
  Vector v = random_gaussian_vector(static_cast<int>(w0.size()), stream);
  while (v.norm() < 1e-12) {
    v = random_gaussian_vector(static_cast<int>(w0.size()), stream);
  }
  v /= v.norm();
  return w0 + c * v;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNumBatchesK:
      return "num_batches_k";
    case SweepAxis::kBatchSizeN:
      return "batch_size_n";
    case SweepAxis::kNumFeaturesD:
      return "num_features_d";
    case SweepAxis::kDistortionC:
      return "distortion_c";
    case SweepAxis::kNoiseStd:
      return "noise_std";
  }
  return "unknown";
}

SweepSpec default_sweep_spec(SweepAxis axis, std::vector<double> values) {
  SweepSpec spec;
  spec.axis = axis;
  spec.values = std::move(values);
  spec.base.d = 6;
  spec.base.covariance = data::CovarianceSpec::identity_scaled(2.0);
  spec.base.inherent_noise_std = 0.1;
  spec.base.n_samples = 800000;
  spec.batch_size_n = 256;
  spec.repeats = 10;
  return spec;
}

namespace {

struct PointSetup {
  data::SyntheticConfig config;
  int n = 0;
  PipelineOptions options;
  std::optional<double> inherent_variance;
  std::optional<double> distortion;
};

// Resolves the base configuration plus the axis value into one concrete
// pipeline invocation.
PointSetup resolve_point(const SweepSpec& spec, double value,
                         std::uint64_t seed) {
  PointSetup setup;
  setup.config = spec.base;
  setup.n = spec.batch_size_n;
  setup.options.center = spec.center;
  setup.options.threads = 1;  // parallelism lives at the point level
  setup.inherent_variance =
      spec.inherent_variance.has_value()
          ? spec.inherent_variance
          : std::optional<double>(spec.base.inherent_noise_std *
                                  spec.base.inherent_noise_std);
  setup.distortion = spec.distortion_c;

  switch (spec.axis) {
    case SweepAxis::kNumBatchesK:
      setup.options.max_batches = static_cast<int>(std::llround(value));
      break;
    case SweepAxis::kBatchSizeN:
      setup.n = static_cast<int>(std::llround(value));
      break;
    case SweepAxis::kNumFeaturesD: {
      const int d = static_cast<int>(std::llround(value));
      setup.config.d = d;
      if (setup.config.covariance.is_dense()) {
        setup.config.covariance = data::CovarianceSpec::dense(
            data::make_random_dense_covariance(d, derive_seed(seed, "cov")));
      }
      setup.config.w0.resize(0);
      break;
    }
    case SweepAxis::kDistortionC:
      setup.distortion = value;
      break;
    case SweepAxis::kNoiseStd:
      setup.options.injection = InjectionPolicy::manual(value * value);
      break;
  }
  return setup;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) {
    throw InvalidInputError("run_sweep: values list is empty");
  }
  if (!std::is_sorted(spec.values.begin(), spec.values.end()) ||
      std::adjacent_find(spec.values.begin(), spec.values.end()) !=
          spec.values.end()) {
    throw InvalidInputError("run_sweep: values must be strictly increasing");
  }
  if (spec.repeats < 1) {
    throw InvalidInputError("run_sweep: repeats >= 1 required");
  }
  std::vector<std::uint64_t> seeds = spec.seeds;
  if (seeds.empty()) {
    for (int i = 0; i < spec.repeats; ++i) {
      seeds.push_back(static_cast<std::uint64_t>(10 * i));
    }
  } else if (static_cast<int>(seeds.size()) != spec.repeats) {
    throw InvalidInputError("run_sweep: seeds list must match repeats");
  }

  SweepResult result;
  result.spec = spec;
  result.spec.seeds = seeds;
  result.points.resize(spec.values.size() *
                       static_cast<std::size_t>(spec.repeats));

  // Points are independent jobs with their own substreams; run them in a
  // work pool and write each result to its own slot.
  parallel_for(result.points.size(), spec.threads, [&](std::size_t index) {
    const std::size_t vi = index / spec.repeats;
    const int ri = static_cast<int>(index % spec.repeats);
    const double value = spec.values[vi];
    const std::uint64_t seed = seeds[ri];
    const std::uint64_t point_seed =
        RngStream(seed).substream("sweep-point").substream(vi).next_u64();
    SweepPoint point;
    point.value = value;
    point.repeat = ri;
    point.seed = seed;
    try {
      PointSetup setup = resolve_point(spec, value, seed);
      setup.config.seed = derive_seed(seed, "data");
      if (setup.config.w0.size() == 0) {
        RngStream w0_stream = RngStream(seed).substream("w0");
        setup.config.w0 =
            random_gaussian_vector(setup.config.d, w0_stream);
      }
      const auto dataset = data::generate_synthetic(setup.config);
      // The weights are drawn per repeat, shared across axis values, so
      // curves along the axis are paired comparisons.
      Vector w;
      if (setup.distortion.has_value()) {
        w = distort_weights(setup.config.w0, *setup.distortion,
                            derive_seed(seed, "distort-dir"));
      } else {
        RngStream init_stream = RngStream(seed).substream("init");
        w = random_gaussian_vector(setup.config.d, init_stream);
      }
      const auto estimate =
          estimate_hessian(dataset, w, setup.n, setup.inherent_variance,
                           point_seed, setup.options);
      point.r = estimate.diagnostics->r;
      point.reference = estimate.diagnostics->reference;
      point.k = estimate.k;
      point.n = estimate.n;
      point.d = setup.config.d;
      point.injected_variance =
          estimate.noise_variance - setup.inherent_variance.value_or(0.0);
    } catch (const Error& err) {
      point.error = err.what();
    }
    result.points[index] = std::move(point);
  });

  for (std::size_t vi = 0; vi < spec.values.size(); ++vi) {
    SweepAggregate agg;
    agg.value = spec.values[vi];
    std::vector<double> rs;
    for (int ri = 0; ri < spec.repeats; ++ri) {
      const auto& point = result.points[vi * spec.repeats + ri];
      if (point.r) {
        rs.push_back(*point.r);
        ++agg.successes;
      } else {
        ++agg.failures;
      }
    }
    if (!rs.empty()) {
      double mean = 0.0;
      for (double r : rs) mean += r;
      mean /= static_cast<double>(rs.size());
      double var = 0.0;
      for (double r : rs) var += (r - mean) * (r - mean);
      agg.mean_r = mean;
      agg.std_r = rs.size() > 1 ? std::sqrt(var / (rs.size() - 1)) : 0.0;
    }
    result.aggregates.push_back(agg);
  }
  return result;
}

EstimatorComparison compare_estimators(const data::RegressionDataset& dataset,
                                       const Vector& w, int n,
                                       std::optional<double> inherent_variance,
                                       std::uint64_t seed,
                                       const PipelineOptions& options) {
  const data::BatchSet clean = prepare_batches(dataset, n, seed, options);
  const auto [reference, kind] = reference_covariance(dataset, clean, options);

  const auto clean_sample = gradops::gradient_sample(clean, w, options.threads);
  const auto clean_cov = gradops::gradient_covariance(clean_sample);

  const data::BatchSet noisy = apply_injection(
      clean, inherent_variance, seed, InjectionPolicy::automatic());
  const auto noisy_sample = gradops::gradient_sample(noisy, w, options.threads);
  const auto noisy_cov = gradops::gradient_covariance(noisy_sample);

  EstimatorComparison cmp;
  cmp.reference = kind;
  cmp.k = clean_cov.k;
  cmp.n = n;
  cmp.r_no_noise = linalg::relative_op_distance(clean_cov.s_g, reference);
  cmp.r_times_n = linalg::relative_op_distance(
      linalg::SymMatrix::from_symmetric(static_cast<double>(n) *
                                        clean_cov.s_g.mat()),
      reference);
  cmp.r_noise_eq_n = linalg::relative_op_distance(noisy_cov.s_g, reference);
  return cmp;
}

}  // namespace gradhess::estimator
