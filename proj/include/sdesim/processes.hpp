#ifndef SDESIM_PROCESSES_HPP
#define SDESIM_PROCESSES_HPP

#include <memory>
#include <span>
#include <vector>

#include "sdesim/core.hpp"

namespace sdesim {

// Geometric noise schedule sigma(t) = sigma_min * (sigma_max/sigma_min)^t.
struct VeParams {
  double sigma_min = 0.01;
  double sigma_max = 50.0;
  void validate() const {
    if (!(sigma_min > 0.0)) throw ConfigError("ve: sigma_min must be > 0");
    if (!(sigma_max > sigma_min)) throw ConfigError("ve: need sigma_max > sigma_min");
  }
};

// Linear noise schedule beta(t) = beta_min + t (beta_max - beta_min).
struct VpParams {
  double beta_min = 0.1;
  double beta_max = 20.0;
  void validate() const {
    if (!(beta_min >= 0.0)) throw ConfigError("vp: beta_min must be >= 0");
    if (!(beta_max > beta_min)) throw ConfigError("vp: need beta_max > beta_min");
  }
};

// Closed-form transition kernel x(t)|x(0) ~ N(m(t) x(0), v(t) I).
struct TransitionKernel {
  double mean_factor = 1.0;
  double added_variance = 0.0;
};

double ve_sigma(double t, const VeParams& p);
double ve_diffusion(double t, const VeParams& p);
double vp_beta(double t, const VpParams& p);
double vp_beta_integral(double t, const VpParams& p);
double vp_mean_factor(double t, const VpParams& p);

// A concrete forward diffusion with closed-form kernel and terminal prior.
class Process {
 public:
  virtual ~Process() = default;
  virtual int dim() const = 0;
  // Forward drift f(x,t); the reverse solvers flip the sign convention.
  virtual void drift(std::span<const double> x, double t, std::span<double> out) const = 0;
  virtual double diffusion(double t) const = 0;
  virtual TransitionKernel kernel(double t) const = 0;
  // Component standard deviation of the terminal prior x(1).
  virtual double prior_std() const = 0;
  // Variance plugged into the terminal denoising step (fixed convention,
  // not the kernel variance at t; see denoise_tweedie).
  virtual double tweedie_variance() const = 0;
  // Coefficients of the discrete ancestral reverse step from t_hi to t_lo:
  // x <- x (1 + drift_scale) + noise_var s(x, t_hi) + sqrt(noise_var) z.
  virtual void ancestral_coeffs(double t_hi, double t_lo, double& drift_scale,
                                double& noise_var) const = 0;
  // Langevin corrector damping (1 for VE, 1 - beta_step for VP).
  virtual double corrector_alpha(double t, double grid_h) const = 0;
  virtual const char* name() const = 0;
};

class VeProcess final : public Process {
 public:
  // exact_kernel subtracts sigma^2(0) from the kernel variance; the default
  // drops it, matching the convention used with pretrained models.
  VeProcess(VeParams p, int dim, bool exact_kernel = false);
  int dim() const override { return dim_; }
  void drift(std::span<const double> x, double t, std::span<double> out) const override;
  double diffusion(double t) const override;
  TransitionKernel kernel(double t) const override;
  double prior_std() const override { return params_.sigma_max; }
  double tweedie_variance() const override {
    return params_.sigma_min * params_.sigma_min;
  }
  void ancestral_coeffs(double t_hi, double t_lo, double& drift_scale,
                        double& noise_var) const override;
  double corrector_alpha(double, double) const override { return 1.0; }
  const char* name() const override { return "ve"; }
  const VeParams& params() const { return params_; }

 private:
  VeParams params_;
  int dim_;
  bool exact_kernel_;
};

class VpProcess final : public Process {
 public:
  VpProcess(VpParams p, int dim);
  int dim() const override { return dim_; }
  void drift(std::span<const double> x, double t, std::span<double> out) const override;
  double diffusion(double t) const override;
  TransitionKernel kernel(double t) const override;
  double prior_std() const override { return 1.0; }
  double tweedie_variance() const override { return 1.0; }
  void ancestral_coeffs(double t_hi, double t_lo, double& drift_scale,
                        double& noise_var) const override;
  double corrector_alpha(double t, double grid_h) const override;
  const char* name() const override { return "vp"; }
  const VpParams& params() const { return params_; }

 private:
  VpParams params_;
  int dim_;
};

// Reverse-time spec with drift f(x,t) - g(t)^2 s(x,t) and diffusion g(t).
// The process and score must stay alive for the lifetime of the spec.
DiffusionSpec reverse_spec(const Process& process, const ScoreField& score);

// n i.i.d. terminal-prior draws; sample i consumes the first dim draws of
// stream (seed, stream_base + i), so every solver started from the same seed
// sees the same initial states.
Matrix sample_terminal_prior(const Process& process, size_t n, uint64_t seed,
                             uint64_t stream_base = 0);

// Uniform reverse grid t_0 = 1, t_i = t_{i-1} - (1-eps)/N; N+1 points ending
// exactly at eps.
std::vector<double> baseline_time_grid(int n_steps, double eps);

// Terminal correction x <- x + v s(x, t) with the fixed per-process variance
// convention (VE: sigma_min^2, VP: 1).
void denoise_tweedie(std::span<double> x, double t, const ScoreField& score,
                     const Process& process);

// Maximum pairwise Euclidean distance; the usual estimator for sigma_max.
double max_pairwise_distance(const Matrix& points);

}  // namespace sdesim

#endif  // SDESIM_PROCESSES_HPP
