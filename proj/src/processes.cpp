#include "sdesim/processes.hpp"

#include <algorithm>
#include <cmath>

namespace sdesim {

namespace {
// Guards against floating-point drift at the interval ends.
double clamp_time(double t) { return std::clamp(t, 0.0, 1.0); }
}  // namespace

double ve_sigma(double t, const VeParams& p) {
  return p.sigma_min * std::pow(p.sigma_max / p.sigma_min, clamp_time(t));
}

double ve_diffusion(double t, const VeParams& p) {
  // g(t) = sqrt(d[sigma^2]/dt) = sigma(t) sqrt(2 ln(sigma_max/sigma_min)).
  return ve_sigma(t, p) * std::sqrt(2.0 * std::log(p.sigma_max / p.sigma_min));
}

double vp_beta(double t, const VpParams& p) {
  return p.beta_min + clamp_time(t) * (p.beta_max - p.beta_min);
}

double vp_beta_integral(double t, const VpParams& p) {
  const double tc = clamp_time(t);
  return tc * p.beta_min + 0.5 * tc * tc * (p.beta_max - p.beta_min);
}

double vp_mean_factor(double t, const VpParams& p) {
  return std::exp(-0.5 * vp_beta_integral(t, p));
}

VeProcess::VeProcess(VeParams p, int dim, bool exact_kernel)
    : params_(p), dim_(dim), exact_kernel_(exact_kernel) {
  params_.validate();
  if (dim <= 0) throw ConfigError("process dim must be positive");
}

void VeProcess::drift(std::span<const double>, double, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

double VeProcess::diffusion(double t) const { return ve_diffusion(t, params_); }

TransitionKernel VeProcess::kernel(double t) const {
  const double s2 = ve_sigma(t, params_) * ve_sigma(t, params_);
  const double s2_0 = params_.sigma_min * params_.sigma_min;
  return {1.0, exact_kernel_ ? s2 - s2_0 : s2};
}

void VeProcess::ancestral_coeffs(double t_hi, double t_lo, double& drift_scale,
                                 double& noise_var) const {
  const double hi = ve_sigma(t_hi, params_);
  const double lo = ve_sigma(t_lo, params_);
  drift_scale = 0.0;
  noise_var = hi * hi - lo * lo;
}

VpProcess::VpProcess(VpParams p, int dim) : params_(p), dim_(dim) {
  params_.validate();
  if (dim <= 0) throw ConfigError("process dim must be positive");
}

void VpProcess::drift(std::span<const double> x, double t, std::span<double> out) const {
  const double c = -0.5 * vp_beta(t, params_);
  for (size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
}

double VpProcess::diffusion(double t) const { return std::sqrt(vp_beta(t, params_)); }

TransitionKernel VpProcess::kernel(double t) const {
  const double m = vp_mean_factor(t, params_);
  return {m, 1.0 - m * m};
}

void VpProcess::ancestral_coeffs(double t_hi, double t_lo, double& drift_scale,
                                 double& noise_var) const {
  const double beta_step = vp_beta(t_hi, params_) * (t_hi - t_lo);
  drift_scale = 0.5 * beta_step;
  noise_var = beta_step;
}

double VpProcess::corrector_alpha(double t, double grid_h) const {
  return 1.0 - vp_beta(t, params_) * grid_h;
}

DiffusionSpec reverse_spec(const Process& process, const ScoreField& score) {
  if (score.dim() != process.dim())
    throw ConfigError("reverse_spec: score dim does not match process dim");
  DiffusionSpec spec;
  spec.dim = process.dim();
  spec.direction = TimeDirection::ReverseTime;
  spec.noise_type = NoiseType::Ito;
  spec.diffusion_state_dependent = false;
  spec.diffusion = [&process](std::span<const double>, double t) {
    return process.diffusion(t);
  };
  spec.drift = [&process, &score](std::span<const double> x, double t,
                                  std::span<double> out) {
    process.drift(x, t, out);
    std::vector<double> s(x.size());
    score.eval(x, t, s);
    const double g = process.diffusion(t);
    const double g2 = g * g;
    for (size_t i = 0; i < x.size(); ++i) out[i] -= g2 * s[i];
  };
  return spec;
}

Matrix sample_terminal_prior(const Process& process, size_t n, uint64_t seed,
                             uint64_t stream_base) {
  const size_t d = static_cast<size_t>(process.dim());
  Matrix x(n, d);
  const double sd = process.prior_std();
  for (size_t i = 0; i < n; ++i) {
    RngStream rng(seed, stream_base + i);
    auto row = x.row(i);
    for (size_t j = 0; j < d; ++j) row[j] = sd * rng.normal();
  }
  return x;
}

std::vector<double> baseline_time_grid(int n_steps, double eps) {
  if (n_steps < 1) throw ConfigError("baseline_time_grid: need at least one step");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("baseline_time_grid: eps in (0,1)");
  std::vector<double> grid(static_cast<size_t>(n_steps) + 1);
  const double span = 1.0 - eps;
  for (int i = 0; i <= n_steps; ++i)
    grid[static_cast<size_t>(i)] = 1.0 - span * static_cast<double>(i) / n_steps;
  grid.back() = eps;  // never lets the final step cross below eps
  return grid;
}

void denoise_tweedie(std::span<double> x, double t, const ScoreField& score,
                     const Process& process) {
  const double v = process.tweedie_variance();
  std::vector<double> s(x.size());
  score.eval(x, t, s);
  for (size_t i = 0; i < x.size(); ++i) x[i] += v * s[i];
}

double max_pairwise_distance(const Matrix& points) {
  double best = 0.0;
  for (size_t i = 0; i < points.rows; ++i) {
    for (size_t j = i + 1; j < points.rows; ++j) {
      double d2 = 0.0;
      const auto a = points.row(i);
      const auto b = points.row(j);
      for (size_t k = 0; k < points.cols; ++k) {
        const double diff = a[k] - b[k];
        d2 += diff * diff;
      }
      best = std::max(best, d2);
    }
  }
  return std::sqrt(best);
}

}  // namespace sdesim
