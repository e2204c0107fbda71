// gradhess command line: Hessian estimation from batch gradients with
// calibrated target noise, sensitivity sweeps, preconditioned training,
// gradient-only adversarial risk, and MLP experiments.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "common.hpp"
#include "gradhess/errors.hpp"
#include "gradhess/estimator.hpp"
#include "gradhess/mlp.hpp"
#include "gradhess/optim.hpp"
#include "gradhess/risk.hpp"
#include "gradhess/serialize.hpp"

namespace ghcli {

namespace estimator = gradhess::estimator;
namespace data = gradhess::data;
namespace gradops = gradhess::gradops;
namespace optim = gradhess::optim;
namespace risk = gradhess::risk;
namespace mlp = gradhess::mlp;
namespace serialize = gradhess::serialize;
namespace linalg = gradhess::linalg;
using gradhess::Matrix;
using gradhess::Vector;

struct GlobalOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  std::string config_path;
};

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw gradhess::IoError("cannot open config '" + path + "'");
  json j;
  in >> j;
  return j;
}

void write_output(const GlobalOptions& global, const std::string& name,
                  const std::string& content) {
  serialize::write_text_atomic(join_path(global.out_dir, name), content);
}

Vector analytic_solution(const data::RegressionDataset& dataset) {
  const Matrix gram = dataset.X.transpose() * dataset.X;
  const Vector rhs = dataset.X.transpose() * dataset.y;
  return linalg::spd_solve(linalg::SymMatrix(gram), rhs);
}

Vector resolve_init(const std::string& init,
                    const data::RegressionDataset& dataset,
                    std::uint64_t seed) {
  if (init == "random") return random_init(dataset.d(), seed);
  if (init == "zero") return Vector::Zero(dataset.d());
  if (init == "ls") return analytic_solution(dataset);
  if (init == "w0" || init.rfind("distort:", 0) == 0) {
    const auto* config =
        std::get_if<data::SyntheticConfig>(&dataset.provenance);
    if (!config) {
      throw gradhess::InvalidInputError(
          "--init " + init + " needs synthetic data (w0 unknown for files)");
    }
    if (init == "w0") return config->w0;
    const double c = std::stod(init.substr(std::string("distort:").size()));
    return estimator::distort_weights(config->w0, c,
                                      derive_seed(seed, "init-distort"));
  }
  throw gradhess::InvalidInputError(
      "--init must be random|zero|ls|w0|distort:<c>, got '" + init + "'");
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
  DatasetOptions dataset;
  int n = 256;
  std::string noise = "auto";
  std::string init = "random";
  int repeats = 1;
  std::vector<std::uint64_t> seeds;
  bool save_matrices = false;
  long mc_check = 0;  // Monte-Carlo oracle trials (0 = off)

  json to_json(const GlobalOptions& global) const {
    json j;
    j["command"] = "estimate";
    j["dataset"] = dataset.to_json();
    j["n"] = n;
    j["noise"] = noise;
    j["init"] = init;
    j["repeats"] = repeats;
    j["seeds"] = seeds;
    j["save_matrices"] = save_matrices;
    j["mc_check"] = mc_check;
    j["seed"] = global.seed;
    j["threads"] = global.threads;
    return j;
  }

  void from_json(const json& j, GlobalOptions& global) {
    dataset.from_json(j.at("dataset"));
    n = j.value("n", n);
    noise = j.value("noise", noise);
    init = j.value("init", init);
    repeats = j.value("repeats", repeats);
    seeds = j.value("seeds", seeds);
    save_matrices = j.value("save_matrices", save_matrices);
    mc_check = j.value("mc_check", mc_check);
    global.seed = j.value("seed", global.seed);
    global.threads = j.value("threads", global.threads);
  }
};

// Closed-form vs Monte-Carlo gradient-covariance cross-check at the same
// evaluation point; the entrywise gap is reported in standard errors.
json mc_oracle_check(const data::RegressionDataset& dataset, const Vector& w,
                     int n, double total_variance, long trials,
                     std::uint64_t seed, int threads) {
  const auto* config =
      std::get_if<data::SyntheticConfig>(&dataset.provenance);
  if (!config) {
    throw gradhess::InvalidInputError(
        "--mc-check needs synthetic data (closed forms require the true "
        "covariance)");
  }
  const auto sigma = config->covariance.materialize(config->d);
  gradops::GradientSampler sampler{config->x_distribution, sigma, config->w0};
  const auto mc = gradops::monte_carlo_population_cov(
      sampler, w, total_variance, n, trials, seed, threads);
  const auto closed =
      config->x_distribution == data::XDistribution::kGaussian
          ? gradops::population_cov_gaussian(sigma, w, config->w0,
                                             total_variance, n)
          : linalg::SymMatrix::from_symmetric(
                (total_variance / n) * sigma.mat());
  double max_z = 0.0;
  double max_abs = 0.0;
  for (int i = 0; i < config->d; ++i) {
    for (int j = 0; j < config->d; ++j) {
      const double gap = std::abs(mc.cov(i, j) - closed(i, j));
      max_abs = std::max(max_abs, gap);
      max_z = std::max(gap / std::max(mc.standard_error(i, j), 1e-300),
                       max_z);
    }
  }
  return json{{"trials", trials},
              {"max_abs_gap", max_abs},
              {"max_gap_in_standard_errors", max_z},
              {"distribution", config->x_distribution ==
                                       data::XDistribution::kGaussian
                                   ? "gaussian"
                                   : "rademacher"}};
}

int run_estimate(const GlobalOptions& global, const EstimateOptions& opts) {
  const auto seeds = resolve_seeds(opts.seeds, opts.repeats);
  std::ostringstream est_csv;
  est_csv << "seed,r,reference_kind,k,n,d,noise_variance\n";
  std::ostringstream cmp_csv;
  cmp_csv << "seed,estimator,r,reference_kind,k,n\n";

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::uint64_t seed = derive_seed(global.seed, "run") ^ seeds[i];
    const auto dataset = opts.dataset.build(seed);
    const Vector w = resolve_init(opts.init, dataset, seed);

    estimator::PipelineOptions pipeline;
    pipeline.center = opts.dataset.center_mode();
    pipeline.injection = parse_injection(opts.noise);
    pipeline.threads = global.threads;

    const auto estimate = estimator::estimate_hessian(
        dataset, w, opts.n, opts.dataset.inherent_variance(), seed, pipeline);
    est_csv << seeds[i] << ',' << serialize::format_double(
                                      estimate.diagnostics->r)
            << ',' << serialize::to_string(estimate.diagnostics->reference)
            << ',' << estimate.k << ',' << estimate.n << ',' << dataset.d()
            << ',' << serialize::format_double(estimate.noise_variance)
            << '\n';

    const auto comparison = estimator::compare_estimators(
        dataset, w, opts.n, opts.dataset.inherent_variance(), seed, pipeline);
    const std::string tail = "," + serialize::to_string(comparison.reference) +
                             "," + std::to_string(comparison.k) + "," +
                             std::to_string(comparison.n) + "\n";
    cmp_csv << seeds[i] << ",no_noise,"
            << serialize::format_double(comparison.r_no_noise) << tail;
    cmp_csv << seeds[i] << ",times_n,"
            << serialize::format_double(comparison.r_times_n) << tail;
    cmp_csv << seeds[i] << ",noise_eq_n,"
            << serialize::format_double(comparison.r_noise_eq_n) << tail;

    if (opts.save_matrices) {
      write_output(global, "s_g_seed" + std::to_string(seeds[i]) + ".csv",
                   serialize::matrix_csv(estimate.s_g.mat()));
      const auto batches = estimator::prepare_batches(dataset, opts.n, seed,
                                                      pipeline);
      const auto [reference, kind] =
          estimator::reference_covariance(dataset, batches, pipeline);
      write_output(global, "reference_seed" + std::to_string(seeds[i]) + ".csv",
                   serialize::matrix_csv(reference.mat()));
    }
    if (i == 0) {
      write_output(global, "provenance.json",
                   serialize::provenance_json(dataset.provenance));
      if (opts.mc_check > 0) {
        write_output(global, "oracle_check.json",
                     mc_oracle_check(dataset, w, opts.n,
                                     estimate.noise_variance, opts.mc_check,
                                     derive_seed(seed, "mc-check"),
                                     global.threads)
                             .dump(2) +
                         "\n");
      }
    }
  }

  write_output(global, "estimate.csv", est_csv.str());
  write_output(global, "comparison.csv", cmp_csv.str());
  write_output(global, "config.json", opts.to_json(global).dump(2) + "\n");
  return 0;
}

// ------------------------------------------------------------------- sweep

struct SweepOptions {
  DatasetOptions dataset;
  std::string axis = "noise-std";
  std::vector<double> values;
  int n = 256;
  int repeats = 10;
  std::vector<std::uint64_t> seeds;
  std::optional<double> distortion;

  json to_json(const GlobalOptions& global) const {
    json j;
    j["command"] = "sweep";
    j["dataset"] = dataset.to_json();
    j["axis"] = axis;
    j["values"] = values;
    j["n"] = n;
    j["repeats"] = repeats;
    j["seeds"] = seeds;
    if (distortion) j["distortion"] = *distortion;
    j["seed"] = global.seed;
    j["threads"] = global.threads;
    return j;
  }

  void from_json(const json& j, GlobalOptions& global) {
    dataset.from_json(j.at("dataset"));
    axis = j.value("axis", axis);
    values = j.value("values", values);
    n = j.value("n", n);
    repeats = j.value("repeats", repeats);
    seeds = j.value("seeds", seeds);
    if (j.contains("distortion")) distortion = j["distortion"].get<double>();
    global.seed = j.value("seed", global.seed);
    global.threads = j.value("threads", global.threads);
  }
};

estimator::SweepAxis parse_axis(const std::string& axis) {
  if (axis == "k") return estimator::SweepAxis::kNumBatchesK;
  if (axis == "n") return estimator::SweepAxis::kBatchSizeN;
  if (axis == "d") return estimator::SweepAxis::kNumFeaturesD;
  if (axis == "c") return estimator::SweepAxis::kDistortionC;
  if (axis == "noise-std") return estimator::SweepAxis::kNoiseStd;
  throw gradhess::InvalidInputError(
      "--axis must be k|n|d|c|noise-std, got '" + axis + "'");
}

int run_sweep(const GlobalOptions& global, const SweepOptions& opts) {
  if (opts.dataset.is_file()) {
    throw gradhess::InvalidInputError("sweep supports synthetic data only");
  }
  estimator::SweepSpec spec;
  spec.axis = parse_axis(opts.axis);
  spec.values = opts.values;
  spec.batch_size_n = opts.n;
  spec.repeats = opts.repeats;
  spec.seeds = resolve_seeds(opts.seeds, opts.repeats);
  spec.center = opts.dataset.center_mode();
  spec.distortion_c = opts.distortion;
  spec.threads = global.threads;

  spec.base.d = opts.dataset.d;
  spec.base.n_samples = opts.dataset.n_samples;
  spec.base.inherent_noise_std = opts.dataset.inherent_std;
  if (opts.dataset.sigma == "dense") {
    spec.base.covariance = data::CovarianceSpec::dense(
        data::make_random_dense_covariance(
            opts.dataset.d, derive_seed(global.seed, "cov")));
  } else {
    spec.base.covariance = data::CovarianceSpec::identity_scaled(std::stod(
        opts.dataset.sigma.substr(std::string("identity:").size())));
  }

  const auto result = estimator::run_sweep(spec);
  write_output(global, "sweep.csv", serialize::sweep_csv(result));
  write_output(global, "sweep.json", serialize::sweep_json(result));
  write_output(global, "config.json", opts.to_json(global).dump(2) + "\n");
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainOptions {
  DatasetOptions dataset;
  int n = 256;
  std::string noise = "auto";
  std::string gradients = "noisy";  // noisy | clean (oracle)
  std::string optimizer = "gd";
  bool precondition = false;
  double ridge = 0.0;
  int epochs = 0;
  std::string lr = "0.1";
  std::string cadence = "epoch";  // epoch | m:<count>
  int warmup_epochs = 0;
  double warmup_lr = 0.01;
  int warmup_m = 50;
  double holdout = 0.0;
  std::string init = "random";

  json to_json(const GlobalOptions& global) const {
    json j;
    j["command"] = "train";
    j["dataset"] = dataset.to_json();
    j["n"] = n;
    j["noise"] = noise;
    j["gradients"] = gradients;
    j["optimizer"] = optimizer;
    j["precondition"] = precondition;
    j["ridge"] = ridge;
    j["epochs"] = epochs;
    j["lr"] = lr;
    j["cadence"] = cadence;
    j["warmup_epochs"] = warmup_epochs;
    j["warmup_lr"] = warmup_lr;
    j["warmup_m"] = warmup_m;
    j["holdout"] = holdout;
    j["init"] = init;
    j["seed"] = global.seed;
    j["threads"] = global.threads;
    return j;
  }

  void from_json(const json& j, GlobalOptions& global) {
    dataset.from_json(j.at("dataset"));
    n = j.value("n", n);
    noise = j.value("noise", noise);
    gradients = j.value("gradients", gradients);
    optimizer = j.value("optimizer", optimizer);
    precondition = j.value("precondition", precondition);
    ridge = j.value("ridge", ridge);
    epochs = j.value("epochs", epochs);
    lr = j.value("lr", lr);
    cadence = j.value("cadence", cadence);
    warmup_epochs = j.value("warmup_epochs", warmup_epochs);
    warmup_lr = j.value("warmup_lr", warmup_lr);
    warmup_m = j.value("warmup_m", warmup_m);
    holdout = j.value("holdout", holdout);
    init = j.value("init", init);
    global.seed = j.value("seed", global.seed);
    global.threads = j.value("threads", global.threads);
  }
};

std::vector<optim::RateSegment> parse_schedule(const std::string& lr,
                                               int epochs) {
  std::vector<optim::RateSegment> schedule;
  if (lr.find(':') == std::string::npos) {
    schedule.push_back({1, epochs, std::stod(lr)});
    return schedule;
  }
  std::stringstream ss(lr);
  std::string segment;
  while (std::getline(ss, segment, ',')) {
    const auto colon = segment.find(':');
    const auto dash = segment.find('-');
    if (colon == std::string::npos || dash == std::string::npos ||
        dash > colon) {
      throw gradhess::InvalidInputError(
          "--lr segments must look like first-last:rate, got '" + segment +
          "'");
    }
    schedule.push_back({std::stoi(segment.substr(0, dash)),
                        std::stoi(segment.substr(dash + 1, colon - dash - 1)),
                        std::stod(segment.substr(colon + 1))});
  }
  return schedule;
}

optim::UpdateCadence parse_cadence(const std::string& cadence) {
  if (cadence == "epoch") return optim::UpdateCadence::per_epoch();
  if (cadence.rfind("m:", 0) == 0) {
    return optim::UpdateCadence::per_m_batches(
        std::stoi(cadence.substr(2)));
  }
  throw gradhess::InvalidInputError("--cadence must be epoch|m:<count>, got '" +
                                    cadence + "'");
}

int run_train(const GlobalOptions& global, const TrainOptions& opts) {
  const std::uint64_t seed = global.seed;
  auto full_dataset = opts.dataset.build(seed);

  std::optional<data::RegressionDataset> test_set;
  data::RegressionDataset train_data = full_dataset;
  if (opts.holdout > 0.0) {
    auto [train, test] = data::split_holdout(full_dataset, opts.holdout,
                                             derive_seed(seed, "holdout"));
    train_data = std::move(train);
    test_set = std::move(test);
  }

  estimator::PipelineOptions pipeline;
  pipeline.center = opts.dataset.center_mode();
  pipeline.threads = global.threads;

  const auto clean = estimator::prepare_batches(train_data, opts.n, seed,
                                                pipeline);
  const auto noisy = estimator::apply_injection(
      clean, opts.dataset.inherent_variance(), seed,
      parse_injection(opts.noise));
  const bool use_noisy = opts.gradients != "clean";
  const data::BatchSet& training = use_noisy ? noisy : clean;

  optim::TrainingReferences refs;
  refs.w_reference = analytic_solution(train_data);
  const auto [sigma_ref, kind] =
      estimator::reference_covariance(train_data, clean, pipeline);
  refs.sigma_reference = sigma_ref;
  if (const auto* config =
          std::get_if<data::SyntheticConfig>(&train_data.provenance)) {
    refs.w0 = config->w0;
  }
  if (use_noisy) refs.eval_batches = clean;
  if (test_set) refs.test_set = *test_set;

  Vector w = resolve_init(opts.init, train_data, seed);
  if (opts.warmup_epochs > 0) {
    optim::TrainConfig warmup;
    warmup.epochs = opts.warmup_epochs;
    warmup.schedule = {{1, opts.warmup_epochs, opts.warmup_lr}};
    warmup.optimizer = optim::Optimizer::kAdam;
    warmup.precondition = false;
    warmup.cadence = optim::UpdateCadence::per_m_batches(opts.warmup_m);
    warmup.seed = seed;
    const auto warm = optim::run_training(training, w, warmup, refs,
                                          global.threads);
    w = warm.final_w;
    write_output(global, "warmup.csv", serialize::trajectory_csv(warm));
  }

  optim::TrainConfig config;
  config.epochs = opts.epochs;
  config.schedule = parse_schedule(opts.lr, opts.epochs);
  config.optimizer = opts.optimizer == "adam" ? optim::Optimizer::kAdam
                                              : optim::Optimizer::kGd;
  config.precondition = opts.precondition;
  config.ridge_damping = opts.ridge;
  config.cadence = parse_cadence(opts.cadence);
  config.seed = seed;

  const auto trajectory =
      optim::run_training(training, w, config, refs, global.threads);
  write_output(global, "trajectory.csv", serialize::trajectory_csv(trajectory));
  write_output(global, "trajectory.json",
               serialize::trajectory_json(trajectory, config));
  write_output(global, "provenance.json",
               serialize::provenance_json(train_data.provenance));
  write_output(global, "config.json", opts.to_json(global).dump(2) + "\n");
  return 0;
}

// -------------------------------------------------------------------- risk

struct RiskOptions {
  DatasetOptions dataset;
  int n = 256;
  std::string noise = "auto";
  double beta = 0.5;
  double ridge = 0.0;
  std::vector<double> c_values = {0.1, 0.3, 1.0, 3.0};
  int repeats = 1;
  std::vector<std::uint64_t> seeds;

  json to_json(const GlobalOptions& global) const {
    json j;
    j["command"] = "risk";
    j["dataset"] = dataset.to_json();
    j["n"] = n;
    j["noise"] = noise;
    j["beta"] = beta;
    j["ridge"] = ridge;
    j["c_values"] = c_values;
    j["repeats"] = repeats;
    j["seeds"] = seeds;
    j["seed"] = global.seed;
    j["threads"] = global.threads;
    return j;
  }

  void from_json(const json& j, GlobalOptions& global) {
    dataset.from_json(j.at("dataset"));
    n = j.value("n", n);
    noise = j.value("noise", noise);
    beta = j.value("beta", beta);
    ridge = j.value("ridge", ridge);
    c_values = j.value("c_values", c_values);
    repeats = j.value("repeats", repeats);
    seeds = j.value("seeds", seeds);
    global.seed = j.value("seed", global.seed);
    global.threads = j.value("threads", global.threads);
  }
};

int run_risk(const GlobalOptions& global, const RiskOptions& opts) {
  const auto seeds = resolve_seeds(opts.seeds, opts.repeats);
  std::ostringstream csv;
  csv << "seed,c,beta,quad_form,true_quad_form,risk_estimate,oracle_risk,"
         "abs_error\n";
  json reports = json::array();
  bool wrote_provenance = false;

  for (const auto base_seed : seeds) {
    const std::uint64_t seed = derive_seed(global.seed, "risk") ^ base_seed;
    const auto dataset = opts.dataset.build(seed);
    estimator::PipelineOptions pipeline;
    pipeline.center = opts.dataset.center_mode();
    pipeline.threads = global.threads;
    const auto clean =
        estimator::prepare_batches(dataset, opts.n, seed, pipeline);
    const auto noisy = estimator::apply_injection(
        clean, opts.dataset.inherent_variance(), seed,
        parse_injection(opts.noise));

    const auto* config =
        std::get_if<data::SyntheticConfig>(&dataset.provenance);

    auto emit_row = [&](const std::optional<double>& c, const Vector& w) {
      const auto sample =
          gradops::gradient_sample(noisy, w, global.threads);
      const auto estimate = gradops::gradient_covariance(sample);
      const Vector mean = gradops::gradient_mean(sample);
      std::optional<linalg::SymMatrix> sigma;
      std::optional<Vector> w0;
      if (config) {
        sigma = config->covariance.materialize(config->d);
        w0 = config->w0;
      }
      const auto report = risk::adversarial_risk_gradient_only(
          w, mean, estimate, opts.beta, opts.ridge, sigma, w0);
      csv << base_seed << ',';
      if (c) csv << serialize::format_double(*c);
      csv << ',' << serialize::format_double(report.beta) << ','
          << serialize::format_double(report.quad_form) << ',';
      if (sigma && w0) {
        const Vector diff = w - *w0;
        csv << serialize::format_double(diff.dot(sigma->mat() * diff));
      }
      csv << ',' << serialize::format_double(report.risk_estimate) << ',';
      if (report.oracle_risk) {
        csv << serialize::format_double(*report.oracle_risk);
      }
      csv << ',';
      if (report.abs_error) csv << serialize::format_double(*report.abs_error);
      csv << '\n';

      json row{{"seed", base_seed},
               {"beta", report.beta},
               {"quad_form", report.quad_form},
               {"risk_estimate", report.risk_estimate}};
      if (c) row["c"] = *c;
      if (report.oracle_risk) row["oracle_risk"] = *report.oracle_risk;
      if (report.abs_error) row["abs_error"] = *report.abs_error;
      reports.push_back(std::move(row));
    };

    if (config) {
      for (const double c : opts.c_values) {
        emit_row(c, estimator::distort_weights(
                        config->w0, c, derive_seed(seed, "c-distort")));
      }
    } else {
      emit_row(std::nullopt, analytic_solution(dataset));
    }
    if (!wrote_provenance) {
      write_output(global, "provenance.json",
                   serialize::provenance_json(dataset.provenance));
      wrote_provenance = true;
    }
  }

  write_output(global, "risk.csv", csv.str());
  write_output(global, "risk.json", reports.dump(2) + "\n");
  write_output(global, "config.json", opts.to_json(global).dump(2) + "\n");
  return 0;
}

// --------------------------------------------------------------------- mlp

struct MlpOptions {
  int d = 2;
  std::vector<int> hidden = {5};
  double x_std = 5.0;
  long n_samples = 10000;
  double noise_std = 0.0;
  int n = 64;
  std::string noise = "auto";  // auto -> total variance n; number -> variance
  double distortion = 0.1;
  int train_epochs = 0;  // per-batch Adam epochs before estimating
  double train_lr = 0.01;
  int repeats = 1;
  std::vector<std::uint64_t> seeds;
  bool save_hessian = false;

  json to_json(const GlobalOptions& global) const {
    json j;
    j["command"] = "mlp";
    j["d"] = d;
    j["hidden"] = hidden;
    j["x_std"] = x_std;
    j["n_samples"] = n_samples;
    j["noise_std"] = noise_std;
    j["n"] = n;
    j["noise"] = noise;
    j["distortion"] = distortion;
    j["train_epochs"] = train_epochs;
    j["train_lr"] = train_lr;
    j["repeats"] = repeats;
    j["seeds"] = seeds;
    j["save_hessian"] = save_hessian;
    j["seed"] = global.seed;
    j["threads"] = global.threads;
    return j;
  }

  void from_json(const json& j, GlobalOptions& global) {
    d = j.value("d", d);
    hidden = j.value("hidden", hidden);
    x_std = j.value("x_std", x_std);
    n_samples = j.value("n_samples", n_samples);
    noise_std = j.value("noise_std", noise_std);
    n = j.value("n", n);
    noise = j.value("noise", noise);
    distortion = j.value("distortion", distortion);
    train_epochs = j.value("train_epochs", train_epochs);
    train_lr = j.value("train_lr", train_lr);
    repeats = j.value("repeats", repeats);
    seeds = j.value("seeds", seeds);
    save_hessian = j.value("save_hessian", save_hessian);
    global.seed = j.value("seed", global.seed);
    global.threads = j.value("threads", global.threads);
  }
};

int run_mlp(const GlobalOptions& global, const MlpOptions& opts) {
  const auto seeds = resolve_seeds(opts.seeds, opts.repeats);
  std::ostringstream csv;
  csv << "seed,block,layer,r_noisy,r_clean,target_dependence_rel\n";
  json summary = json::array();

  for (const auto base_seed : seeds) {
    const std::uint64_t seed = derive_seed(global.seed, "mlp") ^ base_seed;
    mlp::MlpSyntheticConfig config;
    config.d = opts.d;
    config.hidden = opts.hidden;
    // "--hidden 0" requests the degenerate linear architecture
    std::erase(config.hidden, 0);
    config.x_std = opts.x_std;
    config.n_samples = opts.n_samples;
    config.noise_std = opts.noise_std;
    config.seed = seed;

    const auto generator = mlp::make_mlp_generator(config);
    mlp::MlpModel eval = generator;
    eval.set_params(estimator::distort_weights(
        generator.flatten(), opts.distortion, derive_seed(seed, "distort")));
    const auto dataset = mlp::sample_mlp_dataset(config, generator, {&eval});

    const double injected =
        opts.noise == "auto"
            ? static_cast<double>(opts.n) - config.noise_std * config.noise_std
            : std::stod(opts.noise);
    if (injected < 0.0) {
      throw gradhess::CalibrationError(
          "mlp: inherent variance exceeds batch size; cannot calibrate");
    }

    const auto clean = mlp::partition_mlp(dataset, opts.n,
                                          derive_seed(seed, "partition"));
    const auto noisy =
        data::inject_target_noise(clean, injected, derive_seed(seed, "noise"));

    if (opts.train_epochs > 0) {
      // per-batch Adam on the noisy targets: estimates are evaluated in a
      // neighbourhood of the solution rather than at the raw distortion
      Vector theta = eval.flatten();
      auto adam = optim::AdamState::zeros(theta.size());
      for (int epoch = 0; epoch < opts.train_epochs; ++epoch) {
        for (const auto& batch : noisy.batches) {
          eval.set_params(theta);
          const Vector g = mlp::mlp_gradient(eval, batch.X, batch.y);
          auto [next_theta, next_adam] =
              optim::adam_step(adam, theta, g, opts.train_lr);
          theta = next_theta;
          adam = next_adam;
        }
      }
      eval.set_params(theta);
    }

    const auto fd = mlp::mlp_hessian_fd(eval, dataset.X, dataset.y, 1e-4,
                                        global.threads);

    const Vector params = eval.flatten();
    const auto est_noisy =
        mlp::mlp_hessian_estimate(eval, noisy, params, fd, global.threads);
    const auto est_clean =
        mlp::mlp_hessian_estimate(eval, clean, params, fd, global.threads);
    const auto rs_noisy = mlp::blockwise_r(est_noisy.s_g, fd);
    const auto rs_clean = mlp::blockwise_r(est_clean.s_g, fd);

    // Target dependence of the FD blocks: clean targets vs an
    // independently re-noised copy.
    Vector y2 = dataset.y;
    gradhess::RngStream tstream =
        gradhess::RngStream(seed).substream("target-dep");
    for (long i = 0; i < y2.size(); ++i) {
      y2[i] += std::sqrt(injected) * tstream.next_gaussian();
    }
    const auto dep =
        mlp::hessian_block_target_dependence(eval, dataset.X, dataset.y, y2);

    json blocks = json::array();
    for (std::size_t b = 0; b < fd.blocks.size(); ++b) {
      const double block_norm = linalg::operator_norm(
          linalg::SymMatrix(fd.diagonal_block(fd.blocks[b])));
      csv << base_seed << ',' << b << ',' << fd.blocks[b].layer << ','
          << serialize::format_double(rs_noisy[b]) << ','
          << serialize::format_double(rs_clean[b]) << ','
          << serialize::format_double(dep[b] / block_norm) << '\n';
      blocks.push_back({{"block", b},
                        {"layer", fd.blocks[b].layer},
                        {"op_norm", block_norm},
                        {"r_noisy", rs_noisy[b]},
                        {"r_clean", rs_clean[b]},
                        {"target_dependence_rel", dep[b] / block_norm}});
    }
    csv << base_seed << ",-1,-1,"
        << serialize::format_double(est_noisy.diagnostics->r) << ','
        << serialize::format_double(est_clean.diagnostics->r) << ",\n";
    summary.push_back({{"seed", base_seed},
                       {"params", eval.param_count()},
                       {"r_noisy_full", est_noisy.diagnostics->r},
                       {"r_clean_full", est_clean.diagnostics->r},
                       {"blocks", std::move(blocks)}});

    if (opts.save_hessian) {
      const std::string tag = std::to_string(base_seed);
      serialize::write_matrix_binary(
          join_path(global.out_dir, "hessian_fd_seed" + tag + ".bin"),
          fd.hessian.mat());
      serialize::write_matrix_binary(
          join_path(global.out_dir, "s_g_noisy_seed" + tag + ".bin"),
          est_noisy.s_g.mat());
    }
  }

  write_output(global, "mlp.csv", csv.str());
  write_output(global, "mlp.json", summary.dump(2) + "\n");
  write_output(global, "config.json", opts.to_json(global).dump(2) + "\n");
  return 0;
}

// ------------------------------------------------------------------ ingest

struct IngestOptions {
  DatasetOptions dataset;
  double holdout = 0.0;

  json to_json(const GlobalOptions& global) const {
    json j;
    j["command"] = "ingest";
    j["dataset"] = dataset.to_json();
    j["holdout"] = holdout;
    j["seed"] = global.seed;
    return j;
  }

  void from_json(const json& j, GlobalOptions& global) {
    dataset.from_json(j.at("dataset"));
    holdout = j.value("holdout", holdout);
    global.seed = j.value("seed", global.seed);
  }
};

int run_ingest(const GlobalOptions& global, const IngestOptions& opts) {
  if (!opts.dataset.is_file()) {
    throw gradhess::InvalidInputError("ingest requires --csv");
  }
  auto dataset = opts.dataset.build(global.seed);
  if (opts.dataset.center == "global") {
    dataset = data::center_dataset(dataset);
  }

  json summary;
  summary["n_samples"] = dataset.n_samples();
  summary["d"] = dataset.d();
  const auto& file = std::get<data::FileProvenance>(dataset.provenance);
  summary["columns"] = file.feature_columns;
  json stats = json::array();
  for (int j = 0; j < dataset.d(); ++j) {
    const auto col = dataset.X.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() /
                                std::max<long>(dataset.n_samples() - 1, 1));
    stats.push_back({{"column", file.feature_columns[j]},
                     {"mean", mean},
                     {"std", sd}});
  }
  summary["feature_stats"] = std::move(stats);
  const double y_mean = dataset.y.mean();
  summary["target_stats"] = {
      {"column", file.target_column},
      {"mean", y_mean},
      {"std", std::sqrt((dataset.y.array() - y_mean).square().sum() /
                        std::max<long>(dataset.n_samples() - 1, 1))}};
  if (opts.holdout > 0.0) {
    const auto [train, test] = data::split_holdout(
        dataset, opts.holdout, derive_seed(global.seed, "holdout"));
    summary["holdout"] = {{"fraction", opts.holdout},
                          {"train_samples", train.n_samples()},
                          {"test_samples", test.n_samples()}};
  }

  const Matrix cov =
      dataset.X.transpose() * dataset.X / double(dataset.n_samples());
  write_output(global, "summary.json", summary.dump(2) + "\n");
  write_output(global, "covariance.csv", serialize::matrix_csv(cov));
  write_output(global, "provenance.json",
               serialize::provenance_json(dataset.provenance));
  write_output(global, "config.json", opts.to_json(global).dump(2) + "\n");
  return 0;
}

}  // namespace ghcli

int main(int argc, char** argv) {
  using namespace ghcli;
  CLI::App app{"Hessian recovery from batch gradients with calibrated "
               "target noise"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Top-level seed")
      ->capture_default_str();
  app.add_option("--threads", global.threads, "Worker threads");
  app.add_option("--out-dir", global.out_dir, "Output directory")
      ->capture_default_str();

  EstimateOptions estimate_opts;
  auto* cmd_estimate = app.add_subcommand(
      "estimate", "Estimate the Hessian via the noisy gradient covariance");
  estimate_opts.dataset.add_options(cmd_estimate);
  cmd_estimate->add_option("--n", estimate_opts.n, "Batch size");
  cmd_estimate->add_option("--noise", estimate_opts.noise,
                           "auto|conservative|none|<variance>");
  cmd_estimate->add_option("--init", estimate_opts.init,
                           "random|zero|ls|w0|distort:<c>");
  cmd_estimate->add_option("--repeats", estimate_opts.repeats, "Seed count");
  cmd_estimate->add_option("--seeds", estimate_opts.seeds, "Explicit seeds")
      ->delimiter(',');
  cmd_estimate->add_flag("--save-matrices", estimate_opts.save_matrices,
                         "Write dense S_g and reference matrices");
  cmd_estimate->add_option(
      "--mc-check", estimate_opts.mc_check,
      "Cross-check the closed-form covariance against this many "
      "Monte-Carlo trials (synthetic data)");
  std::string estimate_config;
  cmd_estimate->add_option("--config", estimate_config,
                           "JSON config from a previous run");

  SweepOptions sweep_opts;
  auto* cmd_sweep =
      app.add_subcommand("sweep", "Sensitivity sweep over one axis");
  sweep_opts.dataset.add_options(cmd_sweep);
  cmd_sweep->add_option("--axis", sweep_opts.axis, "k|n|d|c|noise-std");
  cmd_sweep->add_option("--values", sweep_opts.values, "Axis values")
      ->delimiter(',');
  cmd_sweep->add_option("--n", sweep_opts.n, "Base batch size");
  cmd_sweep->add_option("--repeats", sweep_opts.repeats, "Seeds per point");
  cmd_sweep->add_option("--seeds", sweep_opts.seeds, "Explicit seeds")
      ->delimiter(',');
  cmd_sweep->add_option_function<double>(
      "--distortion",
      [&sweep_opts](const double& v) { sweep_opts.distortion = v; },
      "Distort w0 by this norm instead of random init");
  std::string sweep_config;
  cmd_sweep->add_option("--config", sweep_config, "JSON config");

  TrainOptions train_opts;
  auto* cmd_train = app.add_subcommand(
      "train", "Train with noisy gradients, optionally preconditioned");
  train_opts.dataset.add_options(cmd_train);
  cmd_train->add_option("--n", train_opts.n, "Batch size");
  cmd_train->add_option("--noise", train_opts.noise,
                        "auto|conservative|none|<variance>");
  cmd_train->add_option("--gradients", train_opts.gradients,
                        "noisy | clean (oracle)")
      ->check(CLI::IsMember({"noisy", "clean"}));
  cmd_train->add_option("--optimizer", train_opts.optimizer, "gd | adam")
      ->check(CLI::IsMember({"gd", "adam"}));
  cmd_train->add_flag("--precondition", train_opts.precondition,
                      "Precondition with S_g^{-1}");
  cmd_train->add_option("--ridge", train_opts.ridge,
                        "Ridge damping added to S_g");
  cmd_train->add_option("--epochs", train_opts.epochs, "Epoch count");
  cmd_train->add_option("--lr", train_opts.lr,
                        "Rate or schedule 1-50:0.01,51-100:0.001");
  cmd_train->add_option("--cadence", train_opts.cadence, "epoch | m:<count>");
  cmd_train->add_option("--warmup-epochs", train_opts.warmup_epochs,
                        "Warmup epochs (no preconditioning)");
  cmd_train->add_option("--warmup-lr", train_opts.warmup_lr, "Warmup rate");
  cmd_train->add_option("--warmup-m", train_opts.warmup_m,
                        "Warmup updates every m batches");
  cmd_train->add_option("--holdout", train_opts.holdout,
                        "Test fraction for the MSE column");
  cmd_train->add_option("--init", train_opts.init,
                        "random|zero|ls|w0|distort:<c>");
  std::string train_config;
  cmd_train->add_option("--config", train_config, "JSON config");

  RiskOptions risk_opts;
  auto* cmd_risk = app.add_subcommand(
      "risk", "Gradient-only adversarial risk at chosen distortions");
  risk_opts.dataset.add_options(cmd_risk);
  cmd_risk->add_option("--n", risk_opts.n, "Batch size");
  cmd_risk->add_option("--noise", risk_opts.noise,
                       "auto|conservative|none|<variance>");
  cmd_risk->add_option("--beta", risk_opts.beta, "Perturbation radius");
  cmd_risk->add_option("--ridge", risk_opts.ridge, "Ridge damping");
  cmd_risk->add_option("--c-values", risk_opts.c_values,
                       "Distortion norms (synthetic data)")
      ->delimiter(',');
  cmd_risk->add_option("--repeats", risk_opts.repeats, "Seed count");
  cmd_risk->add_option("--seeds", risk_opts.seeds, "Explicit seeds")
      ->delimiter(',');
  std::string risk_config;
  cmd_risk->add_option("--config", risk_config, "JSON config");

  MlpOptions mlp_opts;
  auto* cmd_mlp = app.add_subcommand(
      "mlp", "MLP Hessian estimates against a finite-difference oracle");
  cmd_mlp->add_option("--d", mlp_opts.d, "Input features");
  cmd_mlp->add_option("--hidden", mlp_opts.hidden,
                      "Hidden layer sizes (empty = linear)")
      ->delimiter(',');
  cmd_mlp->add_option("--x-std", mlp_opts.x_std, "Feature std");
  cmd_mlp->add_option("--n-samples", mlp_opts.n_samples, "Sample count");
  cmd_mlp->add_option("--noise-std", mlp_opts.noise_std,
                      "Inherent target-noise std");
  cmd_mlp->add_option("--n", mlp_opts.n, "Batch size");
  cmd_mlp->add_option("--noise", mlp_opts.noise,
                      "auto (variance = n - inherent) or explicit variance");
  cmd_mlp->add_option("--distortion", mlp_opts.distortion,
                      "Distortion norm of the evaluation weights");
  cmd_mlp->add_option("--train-epochs", mlp_opts.train_epochs,
                      "Per-batch Adam epochs before estimating");
  cmd_mlp->add_option("--train-lr", mlp_opts.train_lr, "Adam rate");
  cmd_mlp->add_flag("--save-hessian", mlp_opts.save_hessian,
                    "Write the FD Hessian and S_g as dense binary matrices");
  cmd_mlp->add_option("--repeats", mlp_opts.repeats, "Seed count");
  cmd_mlp->add_option("--seeds", mlp_opts.seeds, "Explicit seeds")
      ->delimiter(',');
  std::string mlp_config;
  cmd_mlp->add_option("--config", mlp_config, "JSON config");

  IngestOptions ingest_opts;
  auto* cmd_ingest =
      app.add_subcommand("ingest", "Parse and summarise a CSV dataset");
  ingest_opts.dataset.add_options(cmd_ingest);
  cmd_ingest->add_option("--holdout", ingest_opts.holdout, "Test fraction");
  std::string ingest_config;
  cmd_ingest->add_option("--config", ingest_config, "JSON config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_estimate->parsed()) {
      if (!estimate_config.empty()) {
        estimate_opts.from_json(load_config_file(estimate_config), global);
      }
      return run_estimate(global, estimate_opts);
    }
    if (cmd_sweep->parsed()) {
      if (!sweep_config.empty()) {
        sweep_opts.from_json(load_config_file(sweep_config), global);
      }
      return run_sweep(global, sweep_opts);
    }
    if (cmd_train->parsed()) {
      if (!train_config.empty()) {
        train_opts.from_json(load_config_file(train_config), global);
      }
      return run_train(global, train_opts);
    }
    if (cmd_risk->parsed()) {
      if (!risk_config.empty()) {
        risk_opts.from_json(load_config_file(risk_config), global);
      }
      return run_risk(global, risk_opts);
    }
    if (cmd_mlp->parsed()) {
      if (!mlp_config.empty()) {
        mlp_opts.from_json(load_config_file(mlp_config), global);
      }
      return run_mlp(global, mlp_opts);
    }
    if (cmd_ingest->parsed()) {
      if (!ingest_config.empty()) {
        ingest_opts.from_json(load_config_file(ingest_config), global);
      }
      return run_ingest(global, ingest_opts);
    }
  } catch (const gradhess::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const gradhess::NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const gradhess::IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
