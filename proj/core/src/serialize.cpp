#include "gradhess/serialize.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gradhess/errors.hpp"

namespace gradhess::serialize {

using nlohmann::json;

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + temp.string() + "' for writing");
    out << content;
    if (!out) throw IoError("short write to '" + temp.string() + "'");
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    throw IoError("cannot rename '" + temp.string() + "' to '" +
                  target.string() + "': " + ec.message());
  }
}

std::string to_string(gradops::ReferenceKind kind) {
  return kind == gradops::ReferenceKind::kTrueSigma ? "true_sigma"
                                                    : "pooled_empirical";
}

std::string matrix_csv(const Matrix& m) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  return out.str();
}

void write_matrix_binary(const std::string& path, const Matrix& m) {
  std::string payload;
  payload.resize(static_cast<std::size_t>(m.size()) * sizeof(double));
  double* out = reinterpret_cast<double*>(payload.data());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) *out++ = m(i, j);
  }
  write_text_atomic(path, payload);
  json sidecar{{"rows", m.rows()},
               {"cols", m.cols()},
               {"dtype", "float64"},
               {"order", "row-major"}};
  write_text_atomic(path + ".json", sidecar.dump(2) + "\n");
}

std::string sweep_csv(const estimator::SweepResult& result) {
  std::ostringstream out;
  out << "axis,value,repeat,seed,r,reference_kind,k,n,d,injected_variance\n";
  const std::string axis = estimator::to_string(result.spec.axis);
  for (const auto& point : result.points) {
    out << axis << ',' << format_double(point.value) << ',' << point.repeat
        << ',' << point.seed << ',';
    if (point.r) out << format_double(*point.r);
    out << ',' << to_string(point.reference) << ',' << point.k << ','
        << point.n << ',' << point.d << ','
        << format_double(point.injected_variance) << '\n';
  }
  for (const auto& agg : result.aggregates) {
    out << axis << ',' << format_double(agg.value) << ",-1,0,"
        << format_double(agg.mean_r) << ",,,,,\n";
    out << axis << ',' << format_double(agg.value) << ",-2,0,"
        << format_double(agg.std_r) << ",,,,,\n";
  }
  return out.str();
}

namespace {

json config_to_json(const data::SyntheticConfig& config) {
  json j;
  j["d"] = config.d;
  if (config.covariance.is_dense()) {
    const Matrix& m = config.covariance.dense_matrix().mat();
    std::vector<std::vector<double>> rows(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      rows[i].assign(m.row(i).begin(), m.row(i).end());
    }
    j["covariance"] = {{"kind", "dense"}, {"entries", rows}};
  } else {
    j["covariance"] = {{"kind", "identity_scaled"},
                       {"std", config.covariance.std()}};
  }
  j["w0"] = std::vector<double>(config.w0.begin(), config.w0.end());
  j["inherent_noise_std"] = config.inherent_noise_std;
  j["n_samples"] = config.n_samples;
  j["x_distribution"] =
      config.x_distribution == data::XDistribution::kGaussian ? "gaussian"
                                                              : "rademacher";
  j["seed"] = config.seed;
  return j;
}

json provenance_to_json(const data::Provenance& provenance) {
  if (const auto* config = std::get_if<data::SyntheticConfig>(&provenance)) {
    return json{{"kind", "synthetic"}, {"config", config_to_json(*config)}};
  }
  const auto& file = std::get<data::FileProvenance>(provenance);
  json scalings = json::array();
  for (const auto& rule : file.scalings) {
    scalings.push_back({{"column", rule.column}, {"divisor", rule.divisor}});
  }
  return json{{"kind", "file"},
              {"path", file.path},
              {"target_column", file.target_column},
              {"feature_columns", file.feature_columns},
              {"scalings", scalings}};
}

}  // namespace

std::string sweep_json(const estimator::SweepResult& result) {
  json j;
  j["axis"] = estimator::to_string(result.spec.axis);
  j["values"] = result.spec.values;
  j["repeats"] = result.spec.repeats;
  j["seeds"] = result.spec.seeds;
  j["batch_size_n"] = result.spec.batch_size_n;
  j["base"] = config_to_json(result.spec.base);
  json points = json::array();
  for (const auto& point : result.points) {
    json p;
    p["value"] = point.value;
    p["repeat"] = point.repeat;
    p["seed"] = point.seed;
    if (point.r) {
      p["r"] = *point.r;
    } else {
      p["error"] = point.error;
    }
    p["reference_kind"] = to_string(point.reference);
    p["k"] = point.k;
    p["n"] = point.n;
    p["d"] = point.d;
    p["injected_variance"] = point.injected_variance;
    points.push_back(std::move(p));
  }
  j["points"] = std::move(points);
  json aggregates = json::array();
  for (const auto& agg : result.aggregates) {
    aggregates.push_back({{"value", agg.value},
                          {"mean_r", agg.mean_r},
                          {"std_r", agg.std_r},
                          {"successes", agg.successes},
                          {"failures", agg.failures}});
  }
  j["aggregates"] = std::move(aggregates);
  return j.dump(2);
}

std::string comparison_csv(const estimator::EstimatorComparison& comparison) {
  std::ostringstream out;
  out << "estimator,r,reference_kind,k,n\n";
  const std::string tail = "," + to_string(comparison.reference) + "," +
                           std::to_string(comparison.k) + "," +
                           std::to_string(comparison.n) + "\n";
  out << "no_noise," << format_double(comparison.r_no_noise) << tail;
  out << "times_n," << format_double(comparison.r_times_n) << tail;
  out << "noise_eq_n," << format_double(comparison.r_noise_eq_n) << tail;
  return out.str();
}

std::string trajectory_csv(const optim::Trajectory& trajectory) {
  std::ostringstream out;
  out << "epoch,loss,test_mse,dist_to_ref,r,risk_error\n";
  for (const auto& record : trajectory.records) {
    out << record.epoch << ',' << format_double(record.train_loss) << ',';
    if (record.test_mse) out << format_double(*record.test_mse);
    out << ',';
    if (record.dist_to_ref) out << format_double(*record.dist_to_ref);
    out << ',';
    if (record.r) out << format_double(*record.r);
    out << ',';
    if (record.risk_error) out << format_double(*record.risk_error);
    out << '\n';
  }
  return out.str();
}

std::string trajectory_json(const optim::Trajectory& trajectory,
                            const optim::TrainConfig& config) {
  json j;
  json schedule = json::array();
  for (const auto& seg : config.schedule) {
    schedule.push_back({{"first_epoch", seg.first_epoch},
                        {"last_epoch", seg.last_epoch},
                        {"rate", seg.rate}});
  }
  j["config"] = {
      {"epochs", config.epochs},
      {"schedule", std::move(schedule)},
      {"optimizer",
       config.optimizer == optim::Optimizer::kGd ? "gd" : "adam"},
      {"precondition", config.precondition},
      {"ridge_damping", config.ridge_damping},
      {"cadence",
       config.cadence.kind == optim::UpdateCadence::Kind::kPerEpoch
           ? json{{"kind", "per_epoch"}}
           : json{{"kind", "per_m_batches"}, {"m", config.cadence.m}}},
      {"seed", config.seed}};
  j["final_w"] = std::vector<double>(trajectory.final_w.begin(),
                                     trajectory.final_w.end());
  json records = json::array();
  for (const auto& record : trajectory.records) {
    json r;
    r["epoch"] = record.epoch;
    r["loss"] = record.train_loss;
    if (record.test_mse) r["test_mse"] = *record.test_mse;
    if (record.dist_to_ref) r["dist_to_ref"] = *record.dist_to_ref;
    if (record.r) r["r"] = *record.r;
    if (record.risk_error) r["risk_error"] = *record.risk_error;
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  return j.dump(2);
}

std::string provenance_json(const data::Provenance& provenance) {
  return provenance_to_json(provenance).dump(2);
}

std::string estimate_json(const gradops::HessianEstimate& estimate) {
  json j;
  j["k"] = estimate.k;
  j["n"] = estimate.n;
  j["noise_variance"] = estimate.noise_variance;
  if (estimate.diagnostics) {
    j["r"] = estimate.diagnostics->r;
    j["reference_kind"] = to_string(estimate.diagnostics->reference);
  }
  return j.dump(2);
}

}  // namespace gradhess::serialize
