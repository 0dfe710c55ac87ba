#include "sdesim/stability.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "sdesim/adaptive.hpp"
#include "sdesim/rng.hpp"

namespace sdesim {

MomentPair stationary_moments_analytic(const LinearTestSpec& spec) {
  spec.validate();
  if (!spec.mean_stable())
    throw std::domain_error("stationary_moments_analytic: outside stability region");
  const double denom = 2.0 * spec.lambda + spec.lambda * spec.lambda * spec.h;
  return {0.0, -spec.sigma * spec.sigma / denom};
}

double analytic_second_moment_after(const LinearTestSpec& spec, double y0, uint64_t n) {
  const double a = spec.factor();
  const double a2 = a * a;
  const double q = spec.sigma * spec.sigma * spec.h;
  double a2n = 1.0;
  for (uint64_t i = 0; i < n; ++i) a2n *= a2;
  if (a2 == 1.0) return a2n * y0 * y0 + q * static_cast<double>(n);
  return a2n * y0 * y0 + q * (a2n - 1.0) / (a2 - 1.0);
}

namespace {

struct PathAverages {
  double mean_of_y = 0.0;
  double mean_of_y2 = 0.0;
};

// Shared driver for the plain and reversed recursions; `factor` is the
// per-step multiplier and the draws follow streams (seed, offset + path).
EmpiricalMoments run_moment_estimate(double factor, double noise_sd, size_t n_paths,
                                     size_t n_steps, uint64_t seed,
                                     uint64_t stream_offset,
                                     size_t tail_average_steps) {
  const size_t tail = std::min(tail_average_steps, n_steps);
  const size_t tail_begin = n_steps - std::max<size_t>(tail, 1);

  std::vector<PathAverages> per_path(n_paths);
  for (size_t p = 0; p < n_paths; ++p) {
    RngStream rng(seed, stream_offset + p);
    double y = 0.0;
    double sum_y = 0.0, sum_y2 = 0.0;
    size_t kept = 0;
    for (size_t s = 0; s < n_steps; ++s) {
      y = factor * y + noise_sd * rng.normal();
      if (s >= tail_begin) {
        sum_y += y;
        sum_y2 += y * y;
        ++kept;
      }
    }
    per_path[p] = {sum_y / static_cast<double>(kept),
                   sum_y2 / static_cast<double>(kept)};
  }

  EmpiricalMoments out;
  for (const auto& pa : per_path) {
    out.mean += pa.mean_of_y;
    out.second_moment += pa.mean_of_y2;
  }
  out.mean /= static_cast<double>(n_paths);
  out.second_moment /= static_cast<double>(n_paths);

  double var_mean = 0.0, var_m2 = 0.0;
  for (const auto& pa : per_path) {
    var_mean += (pa.mean_of_y - out.mean) * (pa.mean_of_y - out.mean);
    var_m2 += (pa.mean_of_y2 - out.second_moment) * (pa.mean_of_y2 - out.second_moment);
  }
  const double denom = static_cast<double>(n_paths) * static_cast<double>(n_paths - 1);
  out.mean_ci = 3.0 * std::sqrt(var_mean / denom);
  out.second_moment_ci = 3.0 * std::sqrt(var_m2 / denom);
  return out;
}

}  // namespace

EmpiricalMoments empirical_moments(const LinearTestSpec& spec, size_t n_paths,
                                   size_t n_steps, uint64_t seed,
                                   uint64_t stream_offset,
                                   size_t tail_average_steps) {
  spec.validate();
  return run_moment_estimate(spec.factor(), spec.sigma * std::sqrt(spec.h), n_paths,
                             n_steps, seed, stream_offset, tail_average_steps);
}

EmpiricalMoments forward_backward_scheme_moments(const LinearTestSpec& spec,
                                                 size_t n_paths, size_t n_steps,
                                                 uint64_t seed,
                                                 uint64_t stream_offset,
                                                 size_t tail_average_steps) {
  spec.validate();
  // Consecutive forward/backward stepping pins t = 2h in the reversed
  // recursion factor 1 + lambda (t - h).
  const double t_composed = 2.0 * spec.h;
  const double factor = 1.0 + spec.lambda * (t_composed - spec.h);
  return run_moment_estimate(factor, spec.sigma * std::sqrt(spec.h), n_paths, n_steps,
                             seed, stream_offset, tail_average_steps);
}

double h_limit_extrapolation(std::span<const double> h_values,
                             std::span<const double> m2_values) {
  if (h_values.size() != m2_values.size())
    throw ConfigError("h_limit_extrapolation: length mismatch");
  if (h_values.size() < 2)
    throw ConfigError("h_limit_extrapolation: need at least two step sizes");
  const double n = static_cast<double>(h_values.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < h_values.size(); ++i) {
    mx += h_values[i];
    my += m2_values[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < h_values.size(); ++i) {
    sxx += (h_values[i] - mx) * (h_values[i] - mx);
    sxy += (h_values[i] - mx) * (m2_values[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("h_limit_extrapolation: degenerate h values");
  const double slope = sxy / sxx;
  return my - slope * mx;
}

StabilityCell probe_stability_cell(const LinearTestSpec& spec, double y0,
                                   size_t n_paths, size_t n_steps, uint64_t seed,
                                   uint64_t stream_offset) {
  spec.validate();
  StabilityCell cell;
  cell.lambda = spec.lambda;
  cell.h = spec.h;
  cell.analytic_stable = spec.mean_stable();
  cell.analytic_m2 = cell.analytic_stable
                         ? stationary_moments_analytic(spec).second_moment
                         : std::numeric_limits<double>::quiet_NaN();

  const double threshold =
      10.0 * std::max(std::abs(y0), spec.sigma * std::sqrt(spec.h));
  const double noise_sd = spec.sigma * std::sqrt(spec.h);

  std::vector<double> y(n_paths, y0);
  std::vector<RngStream> rngs;
  rngs.reserve(n_paths);
  for (size_t p = 0; p < n_paths; ++p) rngs.emplace_back(seed, stream_offset + p);

  for (size_t s = 0; s < n_steps; ++s) {
    double mean = 0.0;
    for (size_t p = 0; p < n_paths; ++p) {
      y[p] = em_scheme_step(y[p], spec, noise_sd * rngs[p].normal());
      mean += y[p];
    }
    mean /= static_cast<double>(n_paths);
    if (!std::isfinite(mean) || std::abs(mean) > threshold) {
      cell.diverged = true;
      cell.empirical_mean = mean;
      cell.empirical_m2 = std::numeric_limits<double>::quiet_NaN();
      return cell;
    }
  }

  double mean = 0.0, m2 = 0.0;
  for (double v : y) {
    mean += v;
    m2 += v * v;
  }
  mean /= static_cast<double>(n_paths);
  m2 /= static_cast<double>(n_paths);
  double var_m2 = 0.0;
  for (double v : y) var_m2 += (v * v - m2) * (v * v - m2);
  cell.empirical_mean = mean;
  cell.empirical_m2 = m2;
  cell.ci = 3.0 * std::sqrt(var_m2 / (static_cast<double>(n_paths) *
                                      static_cast<double>(n_paths - 1)));
  return cell;
}

WeakOrderResult weak_error_sweep(double lambda, double sigma, double x0,
                                 double t_final, std::span<const double> h_values,
                                 size_t n_paths, uint64_t seed,
                                 uint64_t stream_offset) {
  if (h_values.size() < 2)
    throw ConfigError("weak_error_sweep: need at least two step sizes");

  DiffusionSpec lin;
  lin.dim = 1;
  lin.direction = TimeDirection::ForwardTime;
  lin.noise_type = NoiseType::Ito;
  lin.diffusion_state_dependent = false;
  lin.drift = [lambda](std::span<const double> x, double, std::span<double> out) {
    out[0] = lambda * x[0];
  };
  lin.diffusion = [sigma](std::span<const double>, double) { return sigma; };

  WeakOrderResult result;
  for (double h : h_values) {
    const auto n_steps = static_cast<size_t>(std::llround(t_final / h));
    if (n_steps == 0 || std::abs(n_steps * h - t_final) > 1e-9)
      throw ConfigError("weak_error_sweep: t_final must be a multiple of each h");

    const double exact_factor = std::exp(lambda * h);
    // Step-exact noise scale: Var = sigma^2 (e^{2 lambda h} - 1) / (2 lambda).
    const double exact_sd =
        lambda == 0.0 ? sigma * std::sqrt(h)
                      : sigma * std::sqrt((std::exp(2.0 * lambda * h) - 1.0) /
                                          (2.0 * lambda));

    double em_diff = 0.0, heun_diff = 0.0;
    double x_cur[1], z[1], x_em[1], x_tilde[1], x_heun[1];
    for (size_t p = 0; p < n_paths; ++p) {
      RngStream rng(seed, stream_offset + p);
      double y_em = x0, y_heun = x0, y_exact = x0;
      double t = 0.0;
      for (size_t s = 0; s < n_steps; ++s) {
        z[0] = rng.normal();
        x_cur[0] = y_em;
        forward_step_pair(x_cur, t, h, 0.0, z, lin, x_em, x_tilde, x_heun);
        y_em = x_em[0];
        x_cur[0] = y_heun;
        forward_step_pair(x_cur, t, h, 0.0, z, lin, x_em, x_tilde, x_heun);
        y_heun = x_heun[0];
        y_exact = exact_factor * y_exact + exact_sd * z[0];
        t += h;
      }
      em_diff += y_em * y_em - y_exact * y_exact;
      heun_diff += y_heun * y_heun - y_exact * y_exact;
    }
    result.points.push_back({h, em_diff / static_cast<double>(n_paths),
                             heun_diff / static_cast<double>(n_paths)});
  }

  std::vector<double> log_h, log_em, log_heun;
  for (const auto& pt : result.points) {
    log_h.push_back(std::log(pt.h));
    log_em.push_back(std::log(std::abs(pt.em_bias)));
    log_heun.push_back(std::log(std::abs(pt.heun_bias)));
  }
  auto fit_slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    return sxy / sxx;
  };
  result.em_slope = fit_slope(log_h, log_em);
  result.heun_slope = fit_slope(log_h, log_heun);
  return result;
}

}  // namespace sdesim
