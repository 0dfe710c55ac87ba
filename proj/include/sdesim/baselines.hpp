#ifndef SDESIM_BASELINES_HPP
#define SDESIM_BASELINES_HPP

#include "sdesim/adaptive.hpp"
#include "sdesim/core.hpp"
#include "sdesim/processes.hpp"
#include "sdesim/score.hpp"

namespace sdesim {

// Reverse-diffusion predictor with Langevin corrector settings.
struct PCConfig {
  int n_predictor_steps = 1000;
  int corrector_steps_per_predictor = 1;
  // Signal-to-noise knob of the corrector step size
  // eta = 2 alpha (scale * |z| / |s|)^2.
  double corrector_step_scale = 0.16;

  void validate() const {
    if (n_predictor_steps < 1) throw ConfigError("pc: need n_predictor_steps >= 1");
    if (corrector_steps_per_predictor < 0)
      throw ConfigError("pc: corrector steps must be >= 0");
    if (!(corrector_step_scale > 0.0))
      throw ConfigError("pc: corrector_step_scale must be > 0");
  }
};

struct BaselineOptions {
  bool denoise = true;
  bool record_log = false;
  unsigned threads = 1;
  // Step-update exponent of the embedded 5(4) pair (1/(p+1) for order p=4).
  double ode_r = 0.2;
};

// Fixed-step Euler-Maruyama down the uniform grid from 1 to eps (one score
// evaluation per step), then terminal denoising.
RunReport em_solve(BatchState& batch, const Process& process, const ScoreField& score,
                   int n_steps, double eps, const BaselineOptions& opts = {});

// Predictor-corrector sampling: discrete reverse-diffusion predictor per grid
// step, then Langevin corrector updates x <- x + eta s + sqrt(2 eta) z at the
// arrival time. The corrector is skipped at the terminal grid point, so
// NFE = N + (N-1) * corrector_steps.
RunReport pc_solve(BatchState& batch, const Process& process, const ScoreField& score,
                   const PCConfig& pc, double eps, const BaselineOptions& opts = {});

// Probability-flow ODE dx/dt = f(x,t) - g(t)^2 s(x,t) / 2 integrated from 1
// to cfg.t_end with an embedded Dormand-Prince 5(4) pair, re-using the mixed
// tolerance and scaled error norm of the adaptive SDE solver so NFE budgets
// are comparable. Deterministic given the prior draw. NFE is 6 per attempted
// step plus 1 for the initial stage (FSAL).
RunReport ode_probability_flow(BatchState& batch, const Process& process,
                               const ScoreField& score, const SolverConfig& cfg,
                               const BaselineOptions& opts = {});

}  // namespace sdesim

#endif  // SDESIM_BASELINES_HPP
