#include "apiesn/csv.hpp"

#include <iomanip>
#include <stdexcept>

namespace apiesn {

CsvWriter::CsvWriter(const std::filesystem::path& file, const CsvStamp& stamp,
                     std::initializer_list<std::string_view> header)
    : path_(file) {
  open(stamp);
  for (auto h : header) field(h);
  end_row();
}

CsvWriter::CsvWriter(const std::filesystem::path& file, const CsvStamp& stamp, const std::vector<std::string>& header)
    : path_(file) {
  open(stamp);
  for (const auto& h : header) field(h);
  end_row();
}

void CsvWriter::open(const CsvStamp& stamp) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::out | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path_.string() + " for writing");
  out_ << "# config_hash=" << std::hex << std::setw(16) << std::setfill('0') << stamp.config_hash << std::dec
       << std::setfill(' ') << " seed=" << stamp.seed << '\n';
  out_ << std::setprecision(17);
}

void CsvWriter::separator() {
  if (!first_) out_ << ',';
  first_ = false;
}

void CsvWriter::field(std::string_view s) {
  separator();
  out_ << s;
}

void CsvWriter::field(double v) {
  separator();
  out_ << v;
}

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("failed writing " + path_.string());
}

void write_trajectory_csv(const Trajectory& traj, Eigen::Index t0_index, const std::filesystem::path& file,
                          const CsvStamp& stamp) {
  CsvWriter csv(file, stamp, {"t", "phi1", "phi2", "phi3", "dphi1", "dphi2", "dphi3"});
  for (Eigen::Index j = 0; j < traj.size(); ++j) {
    const double t = static_cast<double>(j - t0_index) * traj.dt;
    csv.row(t, traj.states(0, j), traj.states(1, j), traj.states(2, j), traj.derivs(0, j), traj.derivs(1, j),
            traj.derivs(2, j));
  }
  csv.close();
}

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& file,
                       const CsvStamp& stamp) {
  CsvWriter csv(file, stamp, {"metric", "variable", "set", "reservoir_size", "scheme", "value"});
  for (const auto& r : records) csv.row(r.metric, r.variable, r.set, r.reservoir_size, r.scheme, r.value);
  csv.close();
}

void write_histograms_csv(const std::vector<HistogramRecord>& records, const std::filesystem::path& file,
                          const CsvStamp& stamp) {
  CsvWriter csv(file, stamp, {"variable", "set", "bin_left", "bin_right", "density"});
  for (const auto& r : records) {
    const auto& h = r.histogram;
    for (std::size_t i = 0; i < h.n_bins(); ++i) csv.row(r.variable, r.set, h.edges[i], h.edges[i + 1], h.densities[i]);
  }
  csv.close();
}

void write_loss_history_csv(const std::vector<LossRecord>& history, const std::filesystem::path& file,
                            const CsvStamp& stamp) {
  CsvWriter csv(file, stamp, {"step", "lr", "loss"});
  for (const auto& r : history) csv.row(r.step, r.lr, r.loss);
  csv.close();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace apiesn
