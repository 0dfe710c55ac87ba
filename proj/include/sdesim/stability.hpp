#ifndef SDESIM_STABILITY_HPP
#define SDESIM_STABILITY_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sdesim/core.hpp"

namespace sdesim {

// Linear test SDE dx = lambda x dt + sigma dw discretized with step h.
// The scheme y_{n+1} = (1 + h lambda) y_n + z_n is mean-stable exactly when
// |1 + lambda h| < 1.
struct LinearTestSpec {
  double lambda = -1.0;
  double sigma = 1.0;
  double h = 0.1;

  double factor() const { return 1.0 + lambda * h; }
  bool mean_stable() const { return std::abs(factor()) < 1.0; }
  void validate() const {
    if (!(sigma >= 0.0)) throw ConfigError("linear test: sigma must be >= 0");
    if (!(h > 0.0)) throw ConfigError("linear test: h must be > 0");
  }
};

// One step (1 + h lambda) y + z, with Var(z) = sigma^2 h.
inline double em_scheme_step(double y, const LinearTestSpec& spec, double z) {
  return spec.factor() * y + z;
}

struct MomentPair {
  double mean = 0.0;
  double second_moment = 0.0;
};

// Stationary limits of the scheme: mean 0 and second moment
// -sigma^2 / (2 lambda + lambda^2 h), the fixed point of
// v = (1 + lambda h)^2 v + sigma^2 h. Throws std::domain_error outside the
// stability region.
MomentPair stationary_moments_analytic(const LinearTestSpec& spec);

// Second moment after exactly n steps from deterministic y0.
double analytic_second_moment_after(const LinearTestSpec& spec, double y0, uint64_t n);

struct EmpiricalMoments {
  double mean = 0.0;
  double second_moment = 0.0;
  double mean_ci = 0.0;           // 3-sigma half-width
  double second_moment_ci = 0.0;  // 3-sigma half-width
};

// Monte-Carlo moments after n_steps from y0 = 0 over independent paths on
// streams (seed, stream_offset + path). tail_average_steps > 0 additionally
// averages the estimators over that many final steps of each path, which
// tightens the confidence interval once the chain is stationary.
EmpiricalMoments empirical_moments(const LinearTestSpec& spec, size_t n_paths,
                                   size_t n_steps, uint64_t seed,
                                   uint64_t stream_offset = 0,
                                   size_t tail_average_steps = 0);

// Same estimate for the time-reversed recursion
// y_{n+1} = (1 + lambda (t - h)) y_n + z_n evaluated at t = 2h, the
// consecutive forward/backward stepping case, whose factor reduces to the
// plain scheme's 1 + lambda h.
EmpiricalMoments forward_backward_scheme_moments(const LinearTestSpec& spec,
                                                 size_t n_paths, size_t n_steps,
                                                 uint64_t seed,
                                                 uint64_t stream_offset = 0,
                                                 size_t tail_average_steps = 0);

// Least-squares line through (h, m2) points; returns the h = 0 intercept.
// Needs at least two points.
double h_limit_extrapolation(std::span<const double> h_values,
                             std::span<const double> m2_values);

// One cell of the (lambda, h) stability grid. Divergence is declared when
// the running batch mean exceeds 10x the initial spread max(|y0|, sigma
// sqrt(h)); paths start at y0 so unstable factors amplify the mean
// geometrically while stable ones contract it to zero.
struct StabilityCell {
  double lambda = 0.0;
  double h = 0.0;
  bool analytic_stable = false;
  double analytic_m2 = 0.0;  // NaN when unstable
  double empirical_mean = 0.0;
  double empirical_m2 = 0.0;
  double ci = 0.0;
  bool diverged = false;
};

StabilityCell probe_stability_cell(const LinearTestSpec& spec, double y0,
                                   size_t n_paths, size_t n_steps, uint64_t seed,
                                   uint64_t stream_offset = 0);

// Monte-Carlo weak-error probe on the linear test SDE. For each step size the
// fixed-h EM and extrapolated one-step maps are driven by the same Gaussian
// draws as an exactly-distributed reference path (the closed-form transition
// with matched step noise), whose second moment is exact for every h. The
// pathwise difference of squares then estimates the scheme bias in E[X_T^2]
// with the common Monte-Carlo noise cancelled.
struct WeakErrorPoint {
  double h = 0.0;
  double em_bias = 0.0;
  double heun_bias = 0.0;
};

struct WeakOrderResult {
  std::vector<WeakErrorPoint> points;
  double em_slope = 0.0;
  double heun_slope = 0.0;
};

WeakOrderResult weak_error_sweep(double lambda, double sigma, double x0,
                                 double t_final, std::span<const double> h_values,
                                 size_t n_paths, uint64_t seed,
                                 uint64_t stream_offset = 0);

}  // namespace sdesim

#endif  // SDESIM_STABILITY_HPP
