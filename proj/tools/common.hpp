#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradhess/data.hpp"
#include "gradhess/errors.hpp"
#include "gradhess/estimator.hpp"
#include "gradhess/rng.hpp"

namespace ghcli {

using nlohmann::json;

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return gradhess::RngStream(seed).substream(name).next_u64();
}

inline gradhess::Vector random_init(int d, std::uint64_t seed) {
  gradhess::RngStream stream = gradhess::RngStream(seed).substream("init");
  gradhess::Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = stream.next_gaussian();
  return v;
}

/// Dataset source shared by the subcommands: synthetic Gaussian/Rademacher
/// or an ingested CSV.
struct DatasetOptions {
  // synthetic
  int d = 6;
  std::string sigma = "dense";  // "dense" or "identity:<std>"
  long n_samples = 800000;
  double inherent_std = 0.1;
  std::string x_dist = "gaussian";
  // file
  std::string csv_path;
  std::string target_column;
  std::vector<std::string> feature_columns;
  std::vector<std::string> scales;  // "column=divisor"
  std::optional<double> inherent_var_override;
  // both
  std::string center = "batch";  // batch | global | none

  bool is_file() const { return !csv_path.empty(); }

  void add_options(CLI::App* cmd) {
    cmd->add_option("--d", d, "Synthetic feature count");
    cmd->add_option("--sigma", sigma,
                    "Synthetic covariance: 'dense' or 'identity:<std>'");
    cmd->add_option("--n-samples", n_samples, "Synthetic sample count");
    cmd->add_option("--inherent-std", inherent_std,
                    "Synthetic inherent target-noise std");
    cmd->add_option("--x-dist", x_dist, "gaussian | rademacher")
        ->check(CLI::IsMember({"gaussian", "rademacher"}));
    cmd->add_option("--csv", csv_path, "Ingest a CSV file instead");
    cmd->add_option("--target", target_column, "CSV target column");
    cmd->add_option("--features", feature_columns,
                    "CSV feature columns (default: all non-target)")
        ->delimiter(',');
    cmd->add_option("--scale", scales,
                    "Per-column divisors, e.g. position=100")
        ->delimiter(',');
    cmd->add_option_function<double>(
           "--inherent-var",
           [this](const double& v) { inherent_var_override = v; },
           "Known inherent target-noise variance (file data)")
        ->expected(1);
    cmd->add_option("--center", center, "batch | global | none")
        ->check(CLI::IsMember({"batch", "global", "none"}));
  }

  json to_json() const {
    json j;
    j["d"] = d;
    j["sigma"] = sigma;
    j["n_samples"] = n_samples;
    j["inherent_std"] = inherent_std;
    j["x_dist"] = x_dist;
    j["csv"] = csv_path;
    j["target"] = target_column;
    j["features"] = feature_columns;
    j["scales"] = scales;
    if (inherent_var_override) j["inherent_var"] = *inherent_var_override;
    j["center"] = center;
    return j;
  }

  void from_json(const json& j) {
    d = j.value("d", d);
    sigma = j.value("sigma", sigma);
    n_samples = j.value("n_samples", n_samples);
    inherent_std = j.value("inherent_std", inherent_std);
    x_dist = j.value("x_dist", x_dist);
    csv_path = j.value("csv", csv_path);
    target_column = j.value("target", target_column);
    feature_columns = j.value("features", feature_columns);
    scales = j.value("scales", scales);
    if (j.contains("inherent_var")) {
      inherent_var_override = j["inherent_var"].get<double>();
    }
    center = j.value("center", center);
  }

  std::vector<gradhess::data::ColumnScale> parse_scales() const {
    std::vector<gradhess::data::ColumnScale> rules;
    for (const auto& entry : scales) {
      const auto pos = entry.find('=');
      if (pos == std::string::npos) {
        throw gradhess::InvalidInputError(
            "--scale entries must look like column=divisor, got '" + entry +
            "'");
      }
      rules.push_back({entry.substr(0, pos), std::stod(entry.substr(pos + 1))});
    }
    return rules;
  }

  gradhess::data::RegressionDataset build(std::uint64_t seed) const {
    namespace data = gradhess::data;
    if (is_file()) {
      if (target_column.empty()) {
        throw gradhess::InvalidInputError("--csv requires --target");
      }
      auto dataset =
          data::load_csv(csv_path, target_column, feature_columns,
                         parse_scales());
      return dataset;
    }
    data::SyntheticConfig config;
    config.d = d;
    config.n_samples = n_samples;
    config.inherent_noise_std = inherent_std;
    config.x_distribution = x_dist == "rademacher"
                                ? data::XDistribution::kRademacher
                                : data::XDistribution::kGaussian;
    if (config.x_distribution == data::XDistribution::kRademacher) {
      // the sign distribution fixes the covariance at 1
      config.covariance = data::CovarianceSpec::identity_scaled(1.0);
      gradhess::RngStream r_stream = gradhess::RngStream(seed).substream("w0");
      config.w0.resize(d);
      for (int i = 0; i < d; ++i) config.w0[i] = r_stream.next_gaussian();
      config.seed = derive_seed(seed, "data");
      return data::generate_synthetic(config);
    }
    if (sigma == "dense") {
      config.covariance = data::CovarianceSpec::dense(
          data::make_random_dense_covariance(d, derive_seed(seed, "cov")));
    } else if (sigma.rfind("identity:", 0) == 0) {
      config.covariance = data::CovarianceSpec::identity_scaled(
          std::stod(sigma.substr(std::string("identity:").size())));
    } else {
      throw gradhess::InvalidInputError(
          "--sigma must be 'dense' or 'identity:<std>', got '" + sigma + "'");
    }
    gradhess::RngStream w0_stream = gradhess::RngStream(seed).substream("w0");
    config.w0.resize(d);
    for (int i = 0; i < d; ++i) config.w0[i] = w0_stream.next_gaussian();
    config.seed = derive_seed(seed, "data");
    return data::generate_synthetic(config);
  }

  /// Inherent variance as known to the pipeline: synthetic configs know
  /// their own noise, file data only via the override flag.
  std::optional<double> inherent_variance() const {
    if (is_file()) return inherent_var_override;
    return inherent_std * inherent_std;
  }

  gradhess::estimator::CenterMode center_mode() const {
    if (center == "global") return gradhess::estimator::CenterMode::kGlobal;
    if (center == "none") return gradhess::estimator::CenterMode::kNone;
    return gradhess::estimator::CenterMode::kPerBatch;
  }
};

/// "auto" | "conservative" | "none" | numeric variance.
inline gradhess::estimator::InjectionPolicy parse_injection(
    const std::string& noise) {
  using Policy = gradhess::estimator::InjectionPolicy;
  if (noise == "auto") return Policy::automatic();
  if (noise == "conservative") return Policy::conservative();
  if (noise == "none") return Policy::none();
  try {
    return Policy::manual(std::stod(noise));
  } catch (const std::exception&) {
    throw gradhess::InvalidInputError(
        "--noise must be auto|conservative|none|<variance>, got '" + noise +
        "'");
  }
}

inline std::vector<std::uint64_t> resolve_seeds(
    const std::vector<std::uint64_t>& seeds, int repeats) {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (int i = 0; i < repeats; ++i) out.push_back(10ULL * i);
  return out;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

}  // namespace ghcli
