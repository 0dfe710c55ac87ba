#ifndef SDESIM_METRICS_HPP
#define SDESIM_METRICS_HPP

#include <vector>

#include "sdesim/core.hpp"

namespace sdesim {

// Diagonal Gaussian summary (mean and per-component variance).
struct GaussianSummary {
  std::vector<double> mean;
  std::vector<double> var_diag;
  int dim() const { return static_cast<int>(mean.size()); }
};

// Exact Wasserstein-2 between diagonal Gaussians:
// sqrt(|mu_a - mu_b|^2 + sum_i (sqrt(v_a_i) - sqrt(v_b_i))^2).
double w2_gaussian_diag(const GaussianSummary& a, const GaussianSummary& b);

// Per-component sample mean and unbiased variance. Needs n >= 2.
GaussianSummary empirical_gaussian_summary(const Matrix& samples);

// Sliced Wasserstein-2: root-mean of squared 1-D quantile-matched W2 over
// random unit projections. Projections come from an auxiliary stream of
// (seed, kAuxStreamBase + stream_offset), so results are reproducible.
double sliced_w2(const Matrix& a, const Matrix& b, int n_projections,
                 uint64_t seed, uint64_t stream_offset = 0);

}  // namespace sdesim

#endif  // SDESIM_METRICS_HPP
