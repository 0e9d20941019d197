#pragma once

// CSV artifacts. Every file starts with a `#` comment line carrying the
// config hash and seed, followed by a header row. Reals are written with 17
// significant digits.

#include "apiesn/metrics.hpp"
#include "apiesn/ode.hpp"
#include "apiesn/training.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace apiesn {

/// Provenance written as the first line of every CSV.
struct CsvStamp {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& file, const CsvStamp& stamp, std::initializer_list<std::string_view> header);
  CsvWriter(const std::filesystem::path& file, const CsvStamp& stamp, const std::vector<std::string>& header);

  /// Writes one row; fields may be strings or arithmetic values.
  template <typename... Fields>
  void row(const Fields&... fields) {
    (field(fields), ...);
    end_row();
  }

  /// Field-at-a-time interface for rows whose width is only known at run time.
  void field(std::string_view s);
  void field(const char* s) { field(std::string_view(s)); }
  void field(const std::string& s) { field(std::string_view(s)); }
  void field(double v);
  template <typename I>
    requires std::is_integral_v<I>
  void field(I v) {
    separator();
    out_ << v;
  }
  void end_row();

  void close();

 private:
  void open(const CsvStamp& stamp);
  void separator();

  std::filesystem::path path_;
  std::ofstream out_;
  bool first_ = true;
};

/// Columns t,phi1,phi2,phi3,dphi1,dphi2,dphi3. Time is measured from sample
/// `t0_index`, so earlier samples get negative times.
void write_trajectory_csv(const Trajectory& traj, Eigen::Index t0_index, const std::filesystem::path& file,
                          const CsvStamp& stamp);

/// Columns metric,variable,set,reservoir_size,scheme,value.
void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& file,
                       const CsvStamp& stamp);

/// Columns variable,set,bin_left,bin_right,density.
void write_histograms_csv(const std::vector<HistogramRecord>& records, const std::filesystem::path& file,
                          const CsvStamp& stamp);

/// Columns step,lr,loss.
void write_loss_history_csv(const std::vector<LossRecord>& history, const std::filesystem::path& file,
                            const CsvStamp& stamp);

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace apiesn
