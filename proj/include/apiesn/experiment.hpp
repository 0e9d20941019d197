#pragma once

// Experiment runner behind the command-line tool: configuration, data
// generation, the derivative-accuracy study, hidden-state reconstruction and
// Lyapunov calibration.

#include "apiesn/metrics.hpp"
#include "apiesn/ode.hpp"
#include "apiesn/reservoir.hpp"
#include "apiesn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace apiesn {

enum class DtMode { lyapunov_scaled, raw };
enum class Scheme { exact, forward_euler };

std::string to_string(Scheme s);
std::string to_string(DtMode m);

struct DataConfig {
  DtMode dt_mode = DtMode::lyapunov_scaled;
  /// Exponent used to convert the sampling step from Lyapunov times to model time.
  double lyapunov_exponent = 0.906;
  /// Step in Lyapunov times (lyapunov_scaled) or model time (raw).
  double step = 0.01;
  Eigen::Index n_train = 10000;
  Eigen::Index n_test = 10000;
  Eigen::Index n_washout = 100;
  Eigen::Index n_transient = 1000;
  int substeps = 10;
  State y0 = State(1.0, 1.0, 1.0);

  double dt() const;
};

struct ExperimentConfig {
  SystemParams system;
  DataConfig data;
  /// full, i, ii, iii or custom.
  std::string testcase = "i";
  /// Zero-based observed components, used when testcase is custom.
  std::vector<int> observed;
  std::vector<Eigen::Index> sizes{100, 200, 400, 600, 800, 1000};
  std::vector<std::uint64_t> seeds{0};
  std::vector<Scheme> schemes{Scheme::exact, Scheme::forward_euler};
  HyperParams reservoir;
  TrainConfig training;
  LyapunovOptions lyapunov;
  int histogram_bins = 50;
  std::filesystem::path output_dir = "out";

  StateSplit split() const;
  void validate() const;
  /// Stable text form of every setting; the basis of hash().
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Observed components for a named testcase: full {1,2,3}, i {1,3},
/// ii {1,2}, iii {1} (zero-based in the returned split).
StateSplit testcase_split(const std::string& name, const std::vector<int>& custom = {});

/// Reads an INI-style config ([section] then key = value). Missing keys keep
/// their defaults; unknown keys are rejected.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Sets one `section.key` the way the config file would. Does not validate
/// the config as a whole.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Washout, training and test samples of one trajectory, laid out as
/// [washout | train inputs | test inputs | final target].
struct Dataset {
  Trajectory trajectory;
  Eigen::Index n_washout = 0;
  Eigen::Index n_train = 0;
  Eigen::Index n_test = 0;

  Eigen::Index input_columns() const { return n_washout + n_train + n_test; }
  Eigen::Index train_begin() const { return n_washout; }
  Eigen::Index test_begin() const { return n_washout + n_train; }
};

Dataset make_dataset(const ExperimentConfig& cfg);

/// Builds a network for (size, seed) and drives it over every input column.
struct DrivenNetwork {
  EsnWeights weights;
  ReservoirRun run;  // n_train + n_test recorded columns
};

DrivenNetwork drive_network(const ExperimentConfig& cfg, const Dataset& data, const StateSplit& split,
                            Eigen::Index n_reservoir, std::uint64_t seed);

struct DerivativeAccuracyCell {
  Eigen::Index n_reservoir = 0;
  std::uint64_t seed = 0;
  double mean_fe = 0.0;  // time mean of |FE derivative - f(yhat)|^2
  double mean_ad = 0.0;  // time mean of |exact derivative - f(yhat)|^2
  double mean_y = 0.0;   // time mean of |yhat - y|^2
  Eigen::VectorXd series_fe;
  Eigen::VectorXd series_ad;
  Eigen::VectorXd series_y;
};

/// Full-state network fitted by ridge regression; output derivative errors
/// over the training set.
DerivativeAccuracyCell derivative_accuracy_cell(const ExperimentConfig& cfg, const Dataset& data,
                                                Eigen::Index n_reservoir, std::uint64_t seed);

struct SchemeResult {
  Scheme scheme = Scheme::exact;
  TrainResult training;
  Eigen::MatrixXd hidden_train;  // N_h x n_train
  Eigen::MatrixXd hidden_test;   // N_h x n_test
  std::vector<double> nrmse_train;
  std::vector<double> nrmse_test;
};

struct ReconstructionCell {
  Eigen::Index n_reservoir = 0;
  std::uint64_t seed = 0;
  StateSplit split;
  Eigen::MatrixXd truth_train;  // N_h x n_train, aligned with the outputs
  Eigen::MatrixXd truth_test;
  std::vector<SchemeResult> results;
};

/// Ridge initialisation followed by hidden-row training for each scheme.
/// Readout column j is compared with the true state one sample later.
ReconstructionCell reconstruction_cell(const ExperimentConfig& cfg, const Dataset& data, const StateSplit& split,
                                       Eigen::Index n_reservoir, std::uint64_t seed,
                                       const std::vector<Scheme>& schemes);

std::vector<MetricRecord> derivative_accuracy_metrics(const DerivativeAccuracyCell& cell);
MetricsReport reconstruction_report(const ReconstructionCell& cell, int histogram_bins);

std::string component_name(int k);

// Command entry points. Each writes its CSV artifacts under
// cfg.output_dir and returns the process exit code.
int cmd_generate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_derivative_accuracy(const ExperimentConfig& cfg, std::ostream& log);
int cmd_reconstruct(const ExperimentConfig& cfg, std::ostream& log);
int cmd_lyapunov(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace apiesn
