#include "apiesn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apiesn {

double nrmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("nrmse: length mismatch");
  if (truth.size() < 2) throw std::invalid_argument("nrmse: need at least two samples");
  const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw std::invalid_argument("nrmse: truth series has zero range");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size())) / range;
}

Eigen::VectorXd squared_error_series(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                     const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("squared_error_series: shape mismatch");
  }
  return (a - b).colwise().squaredNorm().transpose();
}

double Histogram::integral() const {
  double s = 0.0;
  for (std::size_t i = 0; i < densities.size(); ++i) s += densities[i] * (edges[i + 1] - edges[i]);
  return s;
}

Histogram pdf_histogram(std::span<const double> series, int n_bins, double lo, double hi) {
  if (n_bins < 1) throw std::invalid_argument("pdf_histogram: n_bins must be >= 1");
  if (series.empty()) throw std::invalid_argument("pdf_histogram: empty series");
  if (!(hi > lo)) throw std::invalid_argument("pdf_histogram: empty range");

  const auto n = static_cast<std::size_t>(n_bins);
  const double width = (hi - lo) / n_bins;
  Histogram h;
  h.edges.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges[n] = hi;

  std::vector<double> counts(n, 0.0);
  double total = 0.0;
  for (double v : series) {
    if (!(v >= lo && v <= hi)) continue;
    auto bin = static_cast<std::size_t>((v - lo) / width);
    bin = std::min(bin, n - 1);
    counts[bin] += 1.0;
    total += 1.0;
  }
  h.densities.assign(n, 0.0);
  if (total == 0.0) return h;
  // Normalise against the actual bin widths so the integral is exact even
  // when the last edge was snapped to `hi`.
  for (std::size_t i = 0; i < n; ++i) h.densities[i] = counts[i] / (total * (h.edges[i + 1] - h.edges[i]));
  return h;
}

Histogram pdf_histogram(std::span<const double> series, int n_bins) {
  if (series.empty()) throw std::invalid_argument("pdf_histogram: empty series");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*hi == *lo) return pdf_histogram(series, 1, *lo - 0.5, *lo + 0.5);
  return pdf_histogram(series, n_bins, *lo, *hi);
}

std::pair<Histogram, Histogram> paired_histograms(std::span<const double> a, std::span<const double> b, int n_bins) {
  if (a.empty() || b.empty()) throw std::invalid_argument("paired_histograms: empty series");
  const auto [alo, ahi] = std::minmax_element(a.begin(), a.end());
  const auto [blo, bhi] = std::minmax_element(b.begin(), b.end());
  double lo = std::min(*alo, *blo);
  double hi = std::max(*ahi, *bhi);
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
    n_bins = 1;
  }
  return {pdf_histogram(a, n_bins, lo, hi), pdf_histogram(b, n_bins, lo, hi)};
}

double l1_distance(const Histogram& p, const Histogram& q) {
  if (p.edges != q.edges) throw std::invalid_argument("l1_distance: histograms use different bins");
  double s = 0.0;
  for (std::size_t i = 0; i < p.densities.size(); ++i) {
    s += std::abs(p.densities[i] - q.densities[i]) * (p.edges[i + 1] - p.edges[i]);
  }
  return s;
}

}  // namespace apiesn
