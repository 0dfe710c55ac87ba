#include "sdesim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sdesim/rng.hpp"

namespace sdesim {

double w2_gaussian_diag(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim()) throw ConfigError("w2_gaussian_diag: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double dm = a.mean[i] - b.mean[i];
    const double ds = std::sqrt(a.var_diag[i]) - std::sqrt(b.var_diag[i]);
    acc += dm * dm + ds * ds;
  }
  return std::sqrt(acc);
}

GaussianSummary empirical_gaussian_summary(const Matrix& samples) {
  if (samples.rows < 2)
    throw ConfigError("empirical_gaussian_summary: need at least two samples");
  const size_t n = samples.rows;
  const size_t d = samples.cols;
  GaussianSummary s;
  s.mean.assign(d, 0.0);
  s.var_diag.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    const auto row = samples.row(i);
    for (size_t j = 0; j < d; ++j) s.mean[j] += row[j];
  }
  for (size_t j = 0; j < d; ++j) s.mean[j] /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const auto row = samples.row(i);
    for (size_t j = 0; j < d; ++j) {
      const double diff = row[j] - s.mean[j];
      s.var_diag[j] += diff * diff;
    }
  }
  for (size_t j = 0; j < d; ++j) s.var_diag[j] /= static_cast<double>(n - 1);
  return s;
}

double sliced_w2(const Matrix& a, const Matrix& b, int n_projections,
                 uint64_t seed, uint64_t stream_offset) {
  if (a.empty() || b.empty()) throw ConfigError("sliced_w2: empty sample set");
  if (a.cols != b.cols) throw ConfigError("sliced_w2: dimension mismatch");
  if (n_projections < 1) throw ConfigError("sliced_w2: need n_projections >= 1");
  const size_t d = a.cols;

  RngStream rng(seed, kAuxStreamBase + stream_offset);
  std::vector<double> dir(d);
  std::vector<double> pa(a.rows), pb(b.rows);
  double total = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    double norm2 = 0.0;
    do {
      for (size_t j = 0; j < d; ++j) {
        dir[j] = rng.normal();
        norm2 += dir[j] * dir[j];
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (size_t j = 0; j < d; ++j) dir[j] *= inv;

    for (size_t i = 0; i < a.rows; ++i) {
      const auto row = a.row(i);
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += dir[j] * row[j];
      pa[i] = dot;
    }
    for (size_t i = 0; i < b.rows; ++i) {
      const auto row = b.row(i);
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += dir[j] * row[j];
      pb[i] = dot;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());

    // Quantile-matched squared W2 between the 1-D empiricals. Sample counts
    // may differ; match quantile levels at the midpoints of the larger side.
    double w2sq = 0.0;
    if (pa.size() == pb.size()) {
      for (size_t i = 0; i < pa.size(); ++i) {
        const double diff = pa[i] - pb[i];
        w2sq += diff * diff;
      }
      w2sq /= static_cast<double>(pa.size());
    } else {
      const std::vector<double>& big = pa.size() > pb.size() ? pa : pb;
      const std::vector<double>& small = pa.size() > pb.size() ? pb : pa;
      for (size_t i = 0; i < big.size(); ++i) {
        const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(big.size());
        const size_t j = std::min(small.size() - 1,
                                  static_cast<size_t>(q * static_cast<double>(small.size())));
        const double diff = big[i] - small[j];
        w2sq += diff * diff;
      }
      w2sq /= static_cast<double>(big.size());
    }
    total += w2sq;
  }
  return std::sqrt(total / n_projections);
}

}  // namespace sdesim
