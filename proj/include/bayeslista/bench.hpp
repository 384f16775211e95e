#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bayeslista/data.hpp"
#include "bayeslista/pbp.hpp"
#include "bayeslista/propagation.hpp"

namespace bayeslista {

enum class Algorithm { kIsta, kFista, kLista, kBayesLista };
enum class Experiment { kLayersSweep, kKSweep, kMnist, kActive };
enum class Strategy { kActive, kRandom };
enum class DataSource { kSynthetic, kMnist };

std::string_view to_string(Algorithm a);
std::string_view to_string(Experiment e);
std::string_view to_string(Strategy s);
Algorithm parse_algorithm(std::string_view s);
Experiment parse_experiment(std::string_view s);
Strategy parse_strategy(std::string_view s);

struct RunRecord {
  Experiment experiment = Experiment::kLayersSweep;
  Algorithm algorithm = Algorithm::kIsta;
  int layers = 0;
  int k = 0;
  std::uint64_t seed = 0;
  std::optional<int> round;  // training epoch (mnist) or acquisition round (active)
  std::optional<Strategy> strategy;
  double nmse = 0.0;
  double wall_ms = 0.0;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::kLayersSweep;
  std::vector<int> layers{1, 2, 4, 8, 16};
  std::vector<int> ks{50};
  int dim = 100;
  int n_train = 1000;
  int n_test = 100;
  int n_pool = 500;
  double noise_sd = 0.5;
  double spike_prob = 0.8;
  double trunc = 0.1;
  double lambda = 0.1;
  int epochs = 50;      // LISTA SGD epochs
  int pbp_epochs = 50;  // BayesLISTA ADF/EP sweeps
  double step = 1e-6;
  std::vector<Algorithm> algorithms{Algorithm::kIsta, Algorithm::kFista, Algorithm::kLista,
                                    Algorithm::kBayesLista};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::uint64_t seed_offset = 0;
  int rounds = 10;
  std::vector<Strategy> strategies{Strategy::kActive, Strategy::kRandom};
  DataSource source = DataSource::kSynthetic;
  std::filesystem::path images;
  PixelScale mnist_scale = PixelScale::kUnit;
  MomentMode mode = MomentMode::kPrinted;
  bool priors = true;
  bool warm_start = true;        // both networks start from the ISTA weights of X
  double init_var_scale = 0.01;  // BayesLISTA weight variances: scale / K and scale / D
  VarianceGuard guard = VarianceGuard::kRejectEntry;
  int threads = 1;
  bool nmse_db = false;
};

/// Defaults for one experiment, matching the published setup where it is
/// stated.
ExperimentConfig default_config(Experiment e);

/// Sets one option from its command-line spelling, e.g. ("layers", "1,2,4"),
/// ("seeds", "0..4"). Throws a config error on unknown keys or bad values.
void set_option(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Throws a config error describing the first invalid field.
void validate(const ExperimentConfig& cfg);

// sum_n ||pred_n - truth_n||^2 / sum_n ||truth_n||^2
double nmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

std::vector<RunRecord> run_layers_sweep(const ExperimentConfig& cfg);
std::vector<RunRecord> run_k_sweep(const ExperimentConfig& cfg);
std::vector<RunRecord> run_mnist(const ExperimentConfig& cfg);
std::vector<RunRecord> run_active_learning(const ExperimentConfig& cfg);
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

/// Index of the pool row with the largest total predictive variance under
/// the given posterior; ties go to the lowest index.
Eigen::Index select_most_uncertain(const PbpState& q, const Eigen::MatrixXd& pool_Y,
                                   MomentMode mode);

// Stable sort into (algorithm, K, L, seed, strategy, round) order.
void sort_records(std::vector<RunRecord>& records);

std::string csv_header(bool nmse_db = false);
std::string format_csv(const std::vector<RunRecord>& records, bool nmse_db = false);
void emit_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path,
              bool nmse_db = false);
std::vector<RunRecord> parse_csv(std::string_view text);

}  // namespace bayeslista
