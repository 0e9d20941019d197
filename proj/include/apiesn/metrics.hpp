#pragma once

// Reconstruction and derivative-accuracy metrics.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace apiesn {

/// Root-mean-square error normalised by the range (max - min) of `truth`.
/// Throws std::invalid_argument for mismatched lengths, fewer than two
/// samples, or a constant truth series.
double nrmse(std::span<const double> estimate, std::span<const double> truth);

/// Per-column squared Euclidean distance between two equally shaped
/// matrices (one vector per column).
Eigen::VectorXd squared_error_series(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                     const Eigen::Ref<const Eigen::MatrixXd>& b);

struct Histogram {
  std::vector<double> edges;      // n_bins + 1 entries
  std::vector<double> densities;  // n_bins entries, integrating to one

  std::size_t n_bins() const { return densities.size(); }
  double integral() const;
};

/// Equal-width histogram density over [lo, hi]. Samples outside the range
/// are ignored; a sample equal to `hi` falls in the last bin.
Histogram pdf_histogram(std::span<const double> series, int n_bins, double lo, double hi);

/// Histogram over the range of the series itself. A constant series yields a
/// single unit-width bin centred on the value.
Histogram pdf_histogram(std::span<const double> series, int n_bins);

/// Histograms of two series on shared bins spanning the range of both.
std::pair<Histogram, Histogram> paired_histograms(std::span<const double> a, std::span<const double> b, int n_bins);

/// Integral of |p - q| over shared bins.
double l1_distance(const Histogram& p, const Histogram& q);

/// One row of the metrics CSV.
struct MetricRecord {
  std::string metric;
  std::string variable;
  std::string set;
  long reservoir_size = 0;
  std::string scheme;
  double value = 0.0;
};

/// One histogram for the histogram CSV.
struct HistogramRecord {
  std::string variable;
  std::string set;
  Histogram histogram;
};

struct MetricsReport {
  std::vector<MetricRecord> metrics;
  std::vector<HistogramRecord> histograms;
};

}  // namespace apiesn
