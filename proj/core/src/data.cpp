#include "gradhess/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "gradhess/errors.hpp"
#include "gradhess/rng.hpp"

namespace gradhess::data {

namespace {

std::vector<long> seeded_permutation(long n, RngStream stream) {
  std::vector<long> perm(n);
  std::iota(perm.begin(), perm.end(), 0L);
  for (long i = n - 1; i > 0; --i) {
    const auto j = static_cast<long>(
        stream.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

}  // namespace

CovarianceSpec CovarianceSpec::identity_scaled(double std) {
  if (!(std::isfinite(std)) || std < 0.0) {
    throw InvalidInputError("CovarianceSpec: std must be finite and >= 0");
  }
  CovarianceSpec spec;
  spec.std_ = std;
  return spec;
}

CovarianceSpec CovarianceSpec::dense(linalg::SymMatrix sigma) {
  const auto report = linalg::spectral_report(sigma);
  if (report.min_eigenvalue < -1e-10 * report.op_norm) {
    throw InvalidInputError(
        "CovarianceSpec: dense covariance is not PSD (min eigenvalue " +
        std::to_string(report.min_eigenvalue) + ")");
  }
  CovarianceSpec spec;
  spec.dense_ = std::move(sigma);
  return spec;
}

linalg::SymMatrix CovarianceSpec::materialize(Eigen::Index d) const {
  if (dense_) {
    if (dense_->dim() != d) {
      throw DimensionError("CovarianceSpec: dense covariance is " +
                           std::to_string(dense_->dim()) + "x" +
                           std::to_string(dense_->dim()) +
                           ", dataset has d=" + std::to_string(d));
    }
    return *dense_;
  }
  return linalg::SymMatrix::from_symmetric(std_ * std_ *
                                           Matrix::Identity(d, d));
}

RegressionDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.d < 1) throw InvalidInputError("generate_synthetic: d >= 1");
  if (config.n_samples < 1) {
    throw InvalidInputError("generate_synthetic: n_samples >= 1");
  }
  if (config.w0.size() != config.d) {
    throw DimensionError("generate_synthetic: w0 length must equal d");
  }
  if (config.inherent_noise_std < 0.0) {
    throw InvalidInputError("generate_synthetic: negative noise std");
  }
  if (config.x_distribution == XDistribution::kRademacher && config.d != 1) {
    throw InvalidInputError(
        "generate_synthetic: rademacher features require d == 1");
  }

  const long n = config.n_samples;
  const int d = config.d;
  RngStream root(config.seed);
  RngStream xs = root.substream("x");
  RngStream es = root.substream("eps");

  Matrix X(n, d);
  if (config.x_distribution == XDistribution::kRademacher) {
    for (long i = 0; i < n; ++i) {
      X(i, 0) = (xs.substream(static_cast<std::uint64_t>(i)).next_u64() & 1)
                    ? 1.0
                    : -1.0;
    }
  } else {
    Matrix Z(n, d);
    for (long i = 0; i < n; ++i) {
      RngStream row = xs.substream(static_cast<std::uint64_t>(i));
      for (int j = 0; j < d; ++j) Z(i, j) = row.next_gaussian();
    }
    if (config.covariance.is_dense()) {
      const Matrix root_sigma =
          linalg::psd_sqrt(config.covariance.materialize(d));
      X.noalias() = Z * root_sigma;  // root is symmetric
    } else {
      X = config.covariance.std() * Z;
    }
  }

  Vector y = X * config.w0;
  if (config.inherent_noise_std > 0.0) {
    for (long i = 0; i < n; ++i) {
      y[i] += config.inherent_noise_std *
              es.substream(static_cast<std::uint64_t>(i)).next_gaussian();
    }
  }
  return RegressionDataset{std::move(X), std::move(y), config};
}

BatchSet partition_batches(const RegressionDataset& dataset, int n,
                           std::uint64_t seed) {
  const long total = dataset.n_samples();
  if (n < 1) throw InvalidInputError("partition_batches: n >= 1 required");
  if (n > total) {
    throw InvalidInputError("partition_batches: batch size " +
                            std::to_string(n) + " exceeds dataset size " +
                            std::to_string(total));
  }
  const auto perm =
      seeded_permutation(total, RngStream(seed).substream("shuffle"));
  const int k = static_cast<int>(total / n);
  BatchSet out;
  out.n = n;
  out.k = k;
  out.batches.reserve(k);
  const int d = dataset.d();
  for (int j = 0; j < k; ++j) {
    Batch batch;
    batch.X.resize(n, d);
    batch.y.resize(n);
    for (int i = 0; i < n; ++i) {
      const long src = perm[static_cast<long>(j) * n + i];
      batch.X.row(i) = dataset.X.row(src);
      batch.y[i] = dataset.y[src];
    }
    out.batches.push_back(std::move(batch));
  }
  out.pipeline.push_back("partition");
  return out;
}

BatchSet center_batches(const BatchSet& batches) {
  BatchSet out = batches;
  for (auto& batch : out.batches) {
    const Vector col_means = batch.X.colwise().mean();
    batch.X.rowwise() -= col_means.transpose();
    batch.y.array() -= batch.y.mean();
  }
  out.centered = true;
  out.pipeline.push_back("center");
  return out;
}

RegressionDataset center_dataset(const RegressionDataset& dataset) {
  RegressionDataset out = dataset;
  const Vector col_means = out.X.colwise().mean();
  out.X.rowwise() -= col_means.transpose();
  out.y.array() -= out.y.mean();
  return out;
}

NoiseCalibration calibrate_noise(int n,
                                 std::optional<double> inherent_variance) {
  if (n < 1) throw InvalidInputError("calibrate_noise: n >= 1 required");
  NoiseCalibration cal;
  cal.batch_size_n = n;
  cal.inherent_variance = inherent_variance;
  if (inherent_variance.has_value()) {
    if (*inherent_variance < 0.0) {
      throw InvalidInputError("calibrate_noise: negative inherent variance");
    }
    if (*inherent_variance >= n) {
      throw CalibrationError(
          "calibrate_noise: inherent variance " +
          std::to_string(*inherent_variance) +
          " >= batch size " + std::to_string(n) +
          "; total variance n is unreachable");
    }
    cal.injected_variance = static_cast<double>(n) - *inherent_variance;
    cal.mode = CalibrationMode::kExact;
  } else {
    cal.injected_variance = static_cast<double>(n);
    cal.mode = CalibrationMode::kConservative;
  }
  return cal;
}

BatchSet inject_target_noise(const BatchSet& batches,
                             const NoiseCalibration& calibration,
                             std::uint64_t seed) {
  if (calibration.batch_size_n != batches.n) {
    throw InvalidInputError(
        "inject_target_noise: calibration batch size " +
        std::to_string(calibration.batch_size_n) +
        " does not match batch set n=" + std::to_string(batches.n));
  }
  BatchSet out =
      inject_target_noise(batches, calibration.injected_variance, seed);
  out.calibration = calibration;
  return out;
}

BatchSet inject_target_noise(const BatchSet& batches, double injected_variance,
                             std::uint64_t seed) {
  if (!(injected_variance >= 0.0) || !std::isfinite(injected_variance)) {
    throw InvalidInputError("inject_target_noise: variance must be >= 0");
  }
  BatchSet out = batches;
  const double std = std::sqrt(injected_variance);
  RngStream root = RngStream(seed).substream("inject");
  for (int j = 0; j < out.k; ++j) {
    if (std == 0.0) break;
    RngStream stream = root.substream(static_cast<std::uint64_t>(j));
    Vector& y = out.batches[j].y;
    for (int i = 0; i < out.n; ++i) y[i] += std * stream.next_gaussian();
  }
  out.injected_variance += injected_variance;
  out.pipeline.push_back("inject");
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, long line_number,
                  const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end) {
    throw IoError("load_csv: non-numeric cell '" + cell + "' in column '" +
                  column + "' at line " + std::to_string(line_number));
  }
  return value;
}

}  // namespace

RegressionDataset load_csv(const std::string& path,
                           const std::string& target_column,
                           const std::vector<std::string>& feature_columns,
                           const std::vector<ColumnScale>& scaling_rules) {
  std::ifstream file(path);
  if (!file) throw IoError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(file, line)) {
    throw IoError("load_csv: empty file '" + path + "'");
  }
  const auto header = split_csv_line(line);

  auto column_index = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw IoError("load_csv: column '" + name + "' not found in '" + path +
                    "'");
    }
    return static_cast<int>(it - header.begin());
  };

  const int target_idx = column_index(target_column);
  std::vector<std::string> features = feature_columns;
  if (features.empty()) {
    for (const auto& name : header) {
      if (name != target_column) features.push_back(name);
    }
  }
  std::vector<int> feature_idx;
  feature_idx.reserve(features.size());
  for (const auto& name : features) feature_idx.push_back(column_index(name));

  std::vector<std::vector<double>> rows;
  long line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IoError("load_csv: line " + std::to_string(line_number) + " has " +
                    std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(feature_idx.size() + 1);
    for (std::size_t c = 0; c < feature_idx.size(); ++c) {
      row.push_back(
          parse_cell(cells[feature_idx[c]], line_number, features[c]));
    }
    row.push_back(parse_cell(cells[target_idx], line_number, target_column));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw IoError("load_csv: no data rows in '" + path + "'");
  }

  const long n = static_cast<long>(rows.size());
  const int d = static_cast<int>(feature_idx.size());
  Matrix X(n, d);
  Vector y(n);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = rows[i][j];
    y[i] = rows[i][d];
  }

  for (const auto& rule : scaling_rules) {
    if (rule.divisor == 0.0) {
      throw InvalidInputError("load_csv: zero divisor for column '" +
                              rule.column + "'");
    }
    if (rule.column == target_column) {
      y /= rule.divisor;
      continue;
    }
    const auto it = std::find(features.begin(), features.end(), rule.column);
    if (it == features.end()) {
      throw IoError("load_csv: scaling rule names unknown column '" +
                    rule.column + "'");
    }
    X.col(it - features.begin()) /= rule.divisor;
  }

  if (!X.allFinite() || !y.allFinite()) {
    throw IoError("load_csv: non-finite values after parsing '" + path + "'");
  }

  FileProvenance prov{path, target_column, std::move(features), scaling_rules};
  return RegressionDataset{std::move(X), std::move(y), std::move(prov)};
}

std::pair<RegressionDataset, RegressionDataset> split_holdout(
    const RegressionDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw InvalidInputError("split_holdout: fraction must be in [0, 1)");
  }
  const long total = dataset.n_samples();
  const long n_test = static_cast<long>(std::ceil(fraction * total));
  const auto perm =
      seeded_permutation(total, RngStream(seed).substream("holdout"));
  const int d = dataset.d();

  RegressionDataset train{Matrix(total - n_test, d), Vector(total - n_test),
                          dataset.provenance};
  RegressionDataset test{Matrix(n_test, d), Vector(n_test),
                         dataset.provenance};
  for (long i = 0; i < n_test; ++i) {
    test.X.row(i) = dataset.X.row(perm[i]);
    test.y[i] = dataset.y[perm[i]];
  }
  for (long i = n_test; i < total; ++i) {
    train.X.row(i - n_test) = dataset.X.row(perm[i]);
    train.y[i - n_test] = dataset.y[perm[i]];
  }
  return {std::move(train), std::move(test)};
}

linalg::SymMatrix pooled_empirical_covariance(const BatchSet& batches) {
  if (batches.batches.empty()) {
    throw InvalidInputError("pooled_empirical_covariance: no batches");
  }
  const Eigen::Index d = batches.batches.front().X.cols();
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& batch : batches.batches) {
    sum.noalias() += batch.X.transpose() * batch.X;
  }
  sum /= static_cast<double>(batches.n) * batches.k;
  return linalg::SymMatrix(sum);
}

linalg::SymMatrix make_random_dense_covariance(int d, std::uint64_t seed) {
  RngStream stream = RngStream(seed).substream("dense-cov");
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = stream.next_gaussian();
  }
  Matrix sigma = a * a.transpose() / d;
  return linalg::SymMatrix(sigma);
}

linalg::SymMatrix make_spd_with_condition(int d, double kappa,
                                          std::uint64_t seed) {
  if (!(kappa >= 1.0)) {
    throw InvalidInputError("make_spd_with_condition: kappa >= 1 required");
  }
  RngStream stream = RngStream(seed).substream("spd-cond");
  Matrix g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = stream.next_gaussian();
  }
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector eigs(d);
  for (int i = 0; i < d; ++i) {
    const double t = d == 1 ? 1.0 : static_cast<double>(i) / (d - 1);
    eigs[i] = std::pow(kappa, t - 1.0);  // 1/kappa .. 1
  }
  Matrix sigma = q * eigs.asDiagonal() * q.transpose();
  return linalg::SymMatrix(0.5 * (sigma + sigma.transpose()));
}

}  // namespace gradhess::data
