#include "apiesn/experiment.hpp"

#include "apiesn/csv.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace apiesn {

std::string to_string(Scheme s) { return s == Scheme::exact ? "exact" : "fe"; }
std::string to_string(DtMode m) { return m == DtMode::lyapunov_scaled ? "lt" : "raw"; }

std::string component_name(int k) { return "phi" + std::to_string(k + 1); }

double DataConfig::dt() const {
  return dt_mode == DtMode::lyapunov_scaled ? step / lyapunov_exponent : step;
}

StateSplit testcase_split(const std::string& name, const std::vector<int>& custom) {
  if (name == "full") return StateSplit::from_observed({0, 1, 2});
  if (name == "i") return StateSplit::from_observed({0, 2});
  if (name == "ii") return StateSplit::from_observed({0, 1});
  if (name == "iii") return StateSplit::from_observed({0});
  if (name == "custom") return StateSplit::from_observed(custom);
  throw std::invalid_argument("unknown testcase '" + name + "' (expected full, i, ii, iii or custom)");
}

StateSplit ExperimentConfig::split() const { return testcase_split(testcase, observed); }

void ExperimentConfig::validate() const {
  (void)split();
  if (!(data.step > 0.0) || !(data.lyapunov_exponent > 0.0)) throw std::invalid_argument("data: step and exponent must be positive");
  if (data.n_train < 2 || data.n_test < 2) throw std::invalid_argument("data: n_train and n_test must be >= 2");
  if (data.n_washout < 0 || data.n_transient < 0) throw std::invalid_argument("data: negative sample count");
  if (data.substeps < 1) throw std::invalid_argument("data: substeps must be >= 1");
  if (sizes.empty()) throw std::invalid_argument("experiment: sizes must not be empty");
  for (auto n : sizes) {
    if (n < 1) throw std::invalid_argument("experiment: reservoir sizes must be >= 1");
    HyperParams hp = reservoir;
    hp.n_reservoir = n;
    hp.validate();
  }
  if (seeds.empty()) throw std::invalid_argument("experiment: seeds must not be empty");
  if (schemes.empty()) throw std::invalid_argument("experiment: at least one scheme required");
  if (histogram_bins < 1) throw std::invalid_argument("output: histogram_bins must be >= 1");
  training.validate();
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: bad value '" + text + "' for " + key);
  return value;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::vector<Scheme> parse_schemes(const std::string& text) {
  std::vector<Scheme> out;
  for (const auto& s : split_list(text)) {
    if (s == "exact") {
      out.push_back(Scheme::exact);
    } else if (s == "fe") {
      out.push_back(Scheme::forward_euler);
    } else if (s == "both") {
      out.push_back(Scheme::exact);
      out.push_back(Scheme::forward_euler);
    } else {
      throw std::invalid_argument("config: unknown scheme '" + s + "' (expected exact, fe or both)");
    }
  }
  return out;
}

struct Field {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename T>
Field number_field(const std::string& key, T& ref) {
  return {[&ref] {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(ref);
            } else {
              return std::to_string(ref);
            }
          },
          [&ref, key](const std::string& s) { ref = parse_number<T>(key, s); }};
}

// Every configurable setting, keyed by section.key. The output directory is
// deliberately excluded from canonical(): it does not affect results.
std::map<std::string, Field> fields(ExperimentConfig& c) {
  std::map<std::string, Field> f;
  f["system.sigma"] = number_field("system.sigma", c.system.sigma);
  f["system.beta"] = number_field("system.beta", c.system.beta);
  f["system.rho"] = number_field("system.rho", c.system.rho);

  f["data.dt_mode"] = {[&c] { return to_string(c.data.dt_mode); },
                       [&c](const std::string& s) {
                         const auto v = trim(s);
                         if (v == "lt") {
                           c.data.dt_mode = DtMode::lyapunov_scaled;
                         } else if (v == "raw") {
                           c.data.dt_mode = DtMode::raw;
                         } else {
                           throw std::invalid_argument("config: data.dt_mode must be lt or raw");
                         }
                       }};
  f["data.lyapunov_exponent"] = number_field("data.lyapunov_exponent", c.data.lyapunov_exponent);
  f["data.step"] = number_field("data.step", c.data.step);
  f["data.n_train"] = number_field("data.n_train", c.data.n_train);
  f["data.n_test"] = number_field("data.n_test", c.data.n_test);
  f["data.n_washout"] = number_field("data.n_washout", c.data.n_washout);
  f["data.n_transient"] = number_field("data.n_transient", c.data.n_transient);
  f["data.substeps"] = number_field("data.substeps", c.data.substeps);
  f["data.y0"] = {[&c] { return join(std::vector<double>(c.data.y0.data(), c.data.y0.data() + 3)); },
                  [&c](const std::string& s) {
                    const auto items = split_list(s);
                    if (items.size() != 3) throw std::invalid_argument("config: data.y0 needs three values");
                    for (int k = 0; k < 3; ++k) c.data.y0(k) = parse_number<double>("data.y0", items[static_cast<std::size_t>(k)]);
                  }};

  f["experiment.testcase"] = {[&c] { return c.testcase; }, [&c](const std::string& s) { c.testcase = trim(s); }};
  f["experiment.observed"] = {[&c] {
                                std::vector<int> one_based;
                                for (int k : c.observed) one_based.push_back(k + 1);
                                return join(one_based);
                              },
                              [&c](const std::string& s) {
                                c.observed.clear();
                                for (const auto& item : split_list(s)) {
                                  c.observed.push_back(parse_number<int>("experiment.observed", item) - 1);
                                }
                              }};
  f["experiment.sizes"] = {[&c] { return join(c.sizes); },
                           [&c](const std::string& s) {
                             c.sizes.clear();
                             for (const auto& item : split_list(s)) {
                               c.sizes.push_back(parse_number<Eigen::Index>("experiment.sizes", item));
                             }
                           }};
  f["experiment.seeds"] = {[&c] { return join(c.seeds); },
                           [&c](const std::string& s) {
                             c.seeds.clear();
                             for (const auto& item : split_list(s)) {
                               c.seeds.push_back(parse_number<std::uint64_t>("experiment.seeds", item));
                             }
                           }};
  f["experiment.schemes"] = {[&c] {
                               std::string out;
                               for (std::size_t i = 0; i < c.schemes.size(); ++i) {
                                 if (i) out += ',';
                                 out += to_string(c.schemes[i]);
                               }
                               return out;
                             },
                             [&c](const std::string& s) { c.schemes = parse_schemes(s); }};

  f["reservoir.sigma_in"] = number_field("reservoir.sigma_in", c.reservoir.sigma_in);
  f["reservoir.b_in"] = number_field("reservoir.b_in", c.reservoir.b_in);
  f["reservoir.avg_degree"] = number_field("reservoir.avg_degree", c.reservoir.avg_degree);
  f["reservoir.spectral_radius"] = number_field("reservoir.spectral_radius", c.reservoir.spectral_radius);
  f["reservoir.tikhonov"] = number_field("reservoir.tikhonov", c.reservoir.tikhonov);

  f["training.initial_lr"] = number_field("training.initial_lr", c.training.initial_lr);
  f["training.lr_decay_factor"] = number_field("training.lr_decay_factor", c.training.lr_decay_factor);
  f["training.plateau_patience"] = number_field("training.plateau_patience", c.training.plateau_patience);
  f["training.plateau_tolerance"] = number_field("training.plateau_tolerance", c.training.plateau_tolerance);
  f["training.min_lr"] = number_field("training.min_lr", c.training.min_lr);
  f["training.max_steps"] = number_field("training.max_steps", c.training.max_steps);
  f["training.beta1"] = number_field("training.beta1", c.training.beta1);
  f["training.beta2"] = number_field("training.beta2", c.training.beta2);
  f["training.epsilon"] = number_field("training.epsilon", c.training.epsilon);
  f["training.hbar"] = number_field("training.hbar", c.training.hbar);

  f["lyapunov.separation"] = number_field("lyapunov.separation", c.lyapunov.separation);
  f["lyapunov.renorm_interval"] = number_field("lyapunov.renorm_interval", c.lyapunov.renorm_interval);
  f["lyapunov.total_time"] = number_field("lyapunov.total_time", c.lyapunov.total_time);
  f["lyapunov.discard_fraction"] = number_field("lyapunov.discard_fraction", c.lyapunov.discard_fraction);
  f["lyapunov.step"] = number_field("lyapunov.step", c.lyapunov.step);
  f["lyapunov.tolerance"] = number_field("lyapunov.tolerance", c.lyapunov.tolerance);

  f["output.histogram_bins"] = number_field("output.histogram_bins", c.histogram_bins);
  return f;
}

}  // namespace

std::string ExperimentConfig::canonical() const {
  ExperimentConfig copy = *this;
  std::string out;
  for (const auto& [key, field] : fields(copy)) out += key + "=" + field.get() + "\n";
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  auto table = fields(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (section == "output.dir" || section == "dir") {
        cfg.output_dir = trim(body.data());
        continue;
      }
      throw std::invalid_argument("config: key '" + section + "' must be inside a [section]");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (full == "output.dir") {
        cfg.output_dir = trim(value.data());
        continue;
      }
      const auto it = table.find(full);
      if (it == table.end()) throw std::invalid_argument("config: unknown key '" + full + "'");
      it->second.set(value.data());
    }
  }
  cfg.validate();
  return cfg;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "output.dir") {
    cfg.output_dir = trim(value);
    return;
  }
  auto table = fields(cfg);
  const auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(value);
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  return parse_config(in);
}

Dataset make_dataset(const ExperimentConfig& cfg) {
  Dataset data;
  data.n_washout = cfg.data.n_washout;
  data.n_train = cfg.data.n_train;
  data.n_test = cfg.data.n_test;
  const auto n_steps = static_cast<std::size_t>(data.input_columns());
  data.trajectory = integrate(Lorenz{cfg.system}, cfg.data.y0, cfg.data.dt(), n_steps,
                              static_cast<std::size_t>(cfg.data.substeps),
                              static_cast<std::size_t>(cfg.data.n_transient));
  return data;
}

DrivenNetwork drive_network(const ExperimentConfig& cfg, const Dataset& data, const StateSplit& split,
                            Eigen::Index n_reservoir, std::uint64_t seed) {
  HyperParams hp = cfg.reservoir;
  hp.n_reservoir = n_reservoir;
  hp.seed = seed;
  EsnWeights weights = EsnWeights::build(hp, split.n_observed());
  const Eigen::Index n_in = data.input_columns();
  const Eigen::MatrixXd x = observed_states(data.trajectory, split).leftCols(n_in);
  const Eigen::MatrixXd xdot = exact_input_derivative(data.trajectory, split).leftCols(n_in);
  ReservoirRun run = run_teacher_forced(weights, x, xdot, data.n_washout);
  return {std::move(weights), std::move(run)};
}

namespace {

Eigen::MatrixXd rhs_columns(const Eigen::Ref<const Eigen::MatrixXd>& y, const SystemParams& p) {
  Eigen::MatrixXd f(3, y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) f.col(j) = lorenz_rhs(y.col(j), p);
  return f;
}

std::vector<double> to_vector(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return std::vector<double>(row.data(), row.data() + row.size());
}

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

DerivativeAccuracyCell derivative_accuracy_cell(const ExperimentConfig& cfg, const Dataset& data,
                                                Eigen::Index n_reservoir, std::uint64_t seed) {
  const StateSplit split = testcase_split("full");
  const DrivenNetwork net = drive_network(cfg, data, split, n_reservoir, seed);
  const Eigen::Index n = data.n_train;
  const auto z = net.run.states.leftCols(n);
  const auto d = net.run.tangents.leftCols(n);
  const Eigen::MatrixXd targets = data.trajectory.states.middleCols(data.train_begin() + 1, n);

  const Eigen::MatrixXd w_out = ridge_solve(z, targets, cfg.reservoir.tikhonov);
  const Eigen::MatrixXd yhat = w_out * z;
  const Eigen::MatrixXd yhat_dot = w_out * d;
  const Eigen::MatrixXd f = rhs_columns(yhat, cfg.system);
  const Eigen::MatrixXd fe = fe_output_derivative(yhat, data.trajectory.dt);

  DerivativeAccuracyCell cell;
  cell.n_reservoir = n_reservoir;
  cell.seed = seed;
  cell.series_ad = squared_error_series(yhat_dot, f);
  cell.series_fe = squared_error_series(fe, f.leftCols(n - 1));
  cell.series_y = squared_error_series(yhat, targets);
  cell.mean_ad = cell.series_ad.mean();
  cell.mean_fe = cell.series_fe.mean();
  cell.mean_y = cell.series_y.mean();
  return cell;
}

ReconstructionCell reconstruction_cell(const ExperimentConfig& cfg, const Dataset& data, const StateSplit& split,
                                       Eigen::Index n_reservoir, std::uint64_t seed,
                                       const std::vector<Scheme>& schemes) {
  if (split.n_hidden() < 1) throw std::invalid_argument("reconstruction_cell: testcase has no hidden components");
  const DrivenNetwork net = drive_network(cfg, data, split, n_reservoir, seed);
  const Eigen::Index n_train = data.n_train;
  const Eigen::Index n_test = data.n_test;
  const auto z_train = net.run.states.leftCols(n_train);
  const auto d_train = net.run.tangents.leftCols(n_train);
  const auto z_test = net.run.states.rightCols(n_test);

  const Eigen::MatrixXd observed = observed_states(data.trajectory, split);
  const Eigen::MatrixXd hidden = select_rows(data.trajectory.states, split.hidden());
  const ReadoutPartition init =
      init_output_matrix(z_train, observed.middleCols(data.train_begin() + 1, n_train), split.n_hidden(),
                         cfg.reservoir.tikhonov, cfg.training.hbar);

  ReconstructionCell cell;
  cell.n_reservoir = n_reservoir;
  cell.seed = seed;
  cell.split = split;
  cell.truth_train = hidden.middleCols(data.train_begin() + 1, n_train);
  cell.truth_test = hidden.middleCols(data.test_begin() + 1, n_test);

  for (Scheme scheme : schemes) {
    SchemeResult r;
    r.scheme = scheme;
    if (scheme == Scheme::exact) {
      r.training = train_hidden_rows(init, z_train, d_train, split, cfg.system, cfg.training);
    } else {
      const Eigen::MatrixXd d_fe = fe_tangents(z_train, data.trajectory.dt);
      r.training = train_hidden_rows(init, z_train.leftCols(n_train - 1), d_fe, split, cfg.system, cfg.training);
    }
    const Eigen::MatrixXd& w_h = r.training.partition.hidden_rows;
    r.hidden_train = w_h * z_train;
    r.hidden_test = w_h * z_test;
    for (int k = 0; k < split.n_hidden(); ++k) {
      r.nrmse_train.push_back(nrmse(to_vector(r.hidden_train.row(k)), to_vector(cell.truth_train.row(k))));
      r.nrmse_test.push_back(nrmse(to_vector(r.hidden_test.row(k)), to_vector(cell.truth_test.row(k))));
    }
    cell.results.push_back(std::move(r));
  }
  return cell;
}

std::vector<MetricRecord> derivative_accuracy_metrics(const DerivativeAccuracyCell& cell) {
  const long n = static_cast<long>(cell.n_reservoir);
  return {
      {"mean_sq_derivative_error", "all", "train", n, "exact", cell.mean_ad},
      {"mean_sq_derivative_error", "all", "train", n, "fe", cell.mean_fe},
      {"mean_sq_output_error", "all", "train", n, "ridge", cell.mean_y},
  };
}

MetricsReport reconstruction_report(const ReconstructionCell& cell, int histogram_bins) {
  MetricsReport report;
  const long n = static_cast<long>(cell.n_reservoir);
  for (const auto& r : cell.results) {
    const std::string scheme = to_string(r.scheme);
    for (int k = 0; k < cell.split.n_hidden(); ++k) {
      const std::string var = component_name(cell.split.hidden()[static_cast<std::size_t>(k)]);
      report.metrics.push_back({"nrmse", var, "train", n, scheme, r.nrmse_train[static_cast<std::size_t>(k)]});
      report.metrics.push_back({"nrmse", var, "test", n, scheme, r.nrmse_test[static_cast<std::size_t>(k)]});
    }
    report.metrics.push_back({"physics_loss_initial", "all", "train", n, scheme, r.training.initial_loss});
    report.metrics.push_back({"physics_loss_best", "all", "train", n, scheme, r.training.best_loss});
    report.metrics.push_back(
        {"training_steps", "all", "train", n, scheme, static_cast<double>(r.training.history.size())});
    report.metrics.push_back({"stopped_on_min_lr", "all", "train", n, scheme,
                              r.training.reason == StopReason::min_lr ? 1.0 : 0.0});
  }

  for (int k = 0; k < cell.split.n_hidden(); ++k) {
    const std::string var = component_name(cell.split.hidden()[static_cast<std::size_t>(k)]);
    for (const std::string set : {"train", "test"}) {
      const bool train = set == "train";
      const auto truth = to_vector((train ? cell.truth_train : cell.truth_test).row(k));
      // Shared bins over the truth and every reconstruction of this variable.
      double lo = *std::min_element(truth.begin(), truth.end());
      double hi = *std::max_element(truth.begin(), truth.end());
      std::vector<std::vector<double>> recon;
      for (const auto& r : cell.results) {
        recon.push_back(to_vector((train ? r.hidden_train : r.hidden_test).row(k)));
        lo = std::min(lo, *std::min_element(recon.back().begin(), recon.back().end()));
        hi = std::max(hi, *std::max_element(recon.back().begin(), recon.back().end()));
      }
      const Histogram h_truth = pdf_histogram(truth, histogram_bins, lo, hi);
      report.histograms.push_back({var + "_truth", set, h_truth});
      for (std::size_t s = 0; s < cell.results.size(); ++s) {
        const std::string scheme = to_string(cell.results[s].scheme);
        Histogram h = pdf_histogram(recon[s], histogram_bins, lo, hi);
        report.metrics.push_back({"pdf_l1_distance", var, set, n, scheme, l1_distance(h_truth, h)});
        report.histograms.push_back({var + "_" + scheme, set, std::move(h)});
      }
    }
  }
  return report;
}

namespace {

std::string cell_tag(Eigen::Index n, std::uint64_t seed) {
  return "n" + std::to_string(n) + "_seed" + std::to_string(seed);
}

bool all_finite(const std::vector<MetricRecord>& records) {
  return std::all_of(records.begin(), records.end(), [](const MetricRecord& r) { return std::isfinite(r.value); });
}

void write_reconstruction_series(const ReconstructionCell& cell, const Dataset& data,
                                 const std::filesystem::path& file, const CsvStamp& stamp) {
  std::vector<std::string> header{"set", "t"};
  for (int k : cell.split.hidden()) {
    header.push_back(component_name(k) + "_truth");
    for (const auto& r : cell.results) header.push_back(component_name(k) + "_" + to_string(r.scheme));
  }
  CsvWriter csv(file, stamp, header);
  const double dt = data.trajectory.dt;
  auto emit = [&](const char* set, const Eigen::MatrixXd& truth, bool train, Eigen::Index first_target) {
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      csv.field(set);
      csv.field(static_cast<double>(first_target + j - data.n_washout) * dt);
      for (int k = 0; k < cell.split.n_hidden(); ++k) {
        csv.field(truth(k, j));
        for (const auto& r : cell.results) csv.field((train ? r.hidden_train : r.hidden_test)(k, j));
      }
      csv.end_row();
    }
  };
  emit("train", cell.truth_train, true, data.train_begin() + 1);
  emit("test", cell.truth_test, false, data.test_begin() + 1);
  csv.close();
}

}  // namespace

int cmd_generate(const ExperimentConfig& cfg, std::ostream& log) {
  const Dataset data = make_dataset(cfg);
  const auto file = cfg.output_dir / "trajectory.csv";
  write_trajectory_csv(data.trajectory, data.n_washout, file, {cfg.hash(), cfg.seeds.front()});
  log << "wrote " << data.trajectory.size() << " samples (dt = " << std::setprecision(17) << data.trajectory.dt
      << ") to " << file.string() << '\n';
  return data.trajectory.states.allFinite() ? 0 : 1;
}

int cmd_derivative_accuracy(const ExperimentConfig& cfg, std::ostream& log) {
  const Dataset data = make_dataset(cfg);
  bool ok = true;
  for (std::uint64_t seed : cfg.seeds) {
    std::vector<MetricRecord> records;
    for (Eigen::Index n : cfg.sizes) {
      const auto t0 = std::chrono::steady_clock::now();
      const DerivativeAccuracyCell cell = derivative_accuracy_cell(cfg, data, n, seed);
      const CsvStamp stamp{cfg.hash(), seed};
      CsvWriter series(cfg.output_dir / ("derivative_series_" + cell_tag(n, seed) + ".csv"), stamp,
                       {"step", "L_FE", "L_AD", "L_Y"});
      for (Eigen::Index j = 0; j < cell.series_ad.size(); ++j) {
        const double fe = j < cell.series_fe.size() ? cell.series_fe(j) : std::nan("");
        series.row(static_cast<long>(j), fe, cell.series_ad(j), cell.series_y(j));
      }
      series.close();
      const auto rows = derivative_accuracy_metrics(cell);
      ok = ok && all_finite(rows);
      records.insert(records.end(), rows.begin(), rows.end());
      log << "N_r=" << n << " seed=" << seed << std::scientific << std::setprecision(3) << "  L_FE=" << cell.mean_fe
          << "  L_AD=" << cell.mean_ad << "  L_Y=" << cell.mean_y << std::defaultfloat << "  ("
          << std::setprecision(3) << elapsed_seconds(t0) << " s)\n";
    }
    write_metrics_csv(records, cfg.output_dir / ("derivative_accuracy_seed" + std::to_string(seed) + ".csv"),
                      {cfg.hash(), seed});
  }
  return ok ? 0 : 1;
}

int cmd_reconstruct(const ExperimentConfig& cfg, std::ostream& log) {
  const StateSplit split = cfg.split();
  if (split.n_hidden() < 1) {
    log << "error: testcase '" << cfg.testcase << "' has no hidden components\n";
    return 2;
  }
  const Dataset data = make_dataset(cfg);
  bool ok = true;
  for (std::uint64_t seed : cfg.seeds) {
    for (Eigen::Index n : cfg.sizes) {
      const auto t0 = std::chrono::steady_clock::now();
      const CsvStamp stamp{cfg.hash(), seed};
      const auto dir = cfg.output_dir / ("reconstruct_" + cfg.testcase + "_" + cell_tag(n, seed));
      ReconstructionCell cell;
      try {
        cell = reconstruction_cell(cfg, data, split, n, seed, cfg.schemes);
      } catch (const TrainingDivergence& e) {
        write_loss_history_csv(e.history(), dir / "loss_diverged.csv", stamp);
        log << "N_r=" << n << " seed=" << seed << ": " << e.what() << '\n';
        ok = false;
        continue;
      }
      const MetricsReport report = reconstruction_report(cell, cfg.histogram_bins);
      write_metrics_csv(report.metrics, dir / "metrics.csv", stamp);
      write_histograms_csv(report.histograms, dir / "histograms.csv", stamp);
      write_reconstruction_series(cell, data, dir / "series.csv", stamp);
      for (const auto& r : cell.results) {
        write_loss_history_csv(r.training.history, dir / ("loss_" + to_string(r.scheme) + ".csv"), stamp);
        write_dense_csv(r.training.partition.combined(), dir / ("w_out_" + to_string(r.scheme) + ".csv"));
        log << "N_r=" << n << " seed=" << seed << " scheme=" << to_string(r.scheme);
        for (int k = 0; k < split.n_hidden(); ++k) {
          log << "  NRMSE(" << component_name(split.hidden()[static_cast<std::size_t>(k)]) << ") train="
              << std::setprecision(4) << r.nrmse_train[static_cast<std::size_t>(k)]
              << " test=" << r.nrmse_test[static_cast<std::size_t>(k)];
        }
        log << "  loss " << std::scientific << std::setprecision(3) << r.training.initial_loss << " -> "
            << r.training.best_loss << std::defaultfloat << " in " << r.training.history.size() << " steps";
        if (r.training.reason != StopReason::min_lr) log << " [not converged: hit max_steps]";
        log << '\n';
      }
      log << "  (" << std::setprecision(3) << elapsed_seconds(t0) << " s)\n";
      ok = ok && all_finite(report.metrics);
    }
  }
  return ok ? 0 : 1;
}

int cmd_lyapunov(const ExperimentConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const LyapunovEstimate est = estimate_lyapunov(Lorenz{cfg.system}, cfg.lyapunov);
  const double lt = est.lyapunov_time();
  const double dt = cfg.data.step * lt;
  log << std::setprecision(6) << "lyapunov_exponent = " << est.exponent << '\n'
      << "lyapunov_time = " << lt << '\n'
      << "dt (" << cfg.data.step << " LT) = " << dt << '\n'
      << "halves = " << est.first_half << ", " << est.second_half << (est.converged ? "" : "  [not converged]")
      << '\n'
      << "elapsed = " << std::setprecision(3) << elapsed_seconds(t0) << " s\n";
  if (!(est.exponent > 1e-6)) log << "note: exponent is not positive (above 1e-6), the system is not chaotic\n";
  write_metrics_csv({{"lyapunov_exponent", "all", "-", 0, "benettin", est.exponent},
                     {"lyapunov_time", "all", "-", 0, "benettin", lt},
                     {"dt_lt_scaled", "all", "-", 0, "benettin", dt},
                     {"converged", "all", "-", 0, "benettin", est.converged ? 1.0 : 0.0}},
                    cfg.output_dir / "lyapunov.csv", {cfg.hash(), cfg.seeds.front()});
  return std::isfinite(est.exponent) ? 0 : 1;
}

}  // namespace apiesn
