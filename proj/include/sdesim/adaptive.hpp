#ifndef SDESIM_ADAPTIVE_HPP
#define SDESIM_ADAPTIVE_HPP

#include <span>
#include <vector>

#include "sdesim/core.hpp"
#include "sdesim/processes.hpp"
#include "sdesim/score.hpp"

namespace sdesim {

// Times closer to the terminal than this are snapped onto it.
inline constexpr double kTimeSnap = 1e-12;

// Reverse-time Euler-Maruyama proposal (one score evaluation):
//   x' = x - h f(x,t) + h g(t)^2 s(x,t) + sqrt(h) g(t) z.
void em_proposal(std::span<const double> x, double t, double h,
                 std::span<const double> z, const Process& process,
                 const ScoreField& score, std::span<double> x_em);

// Second stage of the stochastic improved-Euler pair, re-using the same
// Gaussian draw z (one more score evaluation at (x', t-h)):
//   x~ = x - h f(x',t-h) + h g(t-h)^2 s(x',t-h) + sqrt(h) g(t-h) z,
//   x'' = (x' + x~)/2.
void heun_proposal(std::span<const double> x, std::span<const double> x_em,
                   double t, double h, std::span<const double> z,
                   const Process& process, const ScoreField& score,
                   std::span<double> x_tilde, std::span<double> x_heun);

// Deterministic improved-Euler pairing: only the drift is re-evaluated at
// (x', t-h); the noise term keeps the first-stage coefficient, so the error
// estimate carries no stochastic part. Kept for the ablation harness.
void lamba_proposal(std::span<const double> x, std::span<const double> x_em,
                    double t, double h, std::span<const double> z,
                    const Process& process, const ScoreField& score,
                    std::span<double> x_tilde, std::span<double> x_heun);

// Element-wise mixed tolerance. CurrentAndPrevious:
//   delta = max(eps_abs, eps_rel * max(|x'|, |x'_prev|));
// CurrentOnly drops the previous proposal.
void mixed_tolerance(std::span<const double> x_em, std::span<const double> x_prev,
                     const SolverConfig& cfg, std::span<double> delta);

// Scaled error norm of (x' - x'')/delta: RMS over the sample's components
// for L2Scaled, max-abs for LInf.
double scaled_error(std::span<const double> x_em, std::span<const double> x_heun,
                    std::span<const double> delta, NormOrder norm);

// Next step size min(t_remaining, theta h E^-r); exact agreement (E = 0)
// yields the cap t_remaining.
double step_update(double h, double err, double t_remaining, const SolverConfig& cfg);

// Batch initialized at t = 1 from the terminal prior, sample i on stream
// (seed, stream_base + i) with the first dim draws consumed by the prior.
BatchState init_reverse_batch(const Process& process, size_t n,
                              const SolverConfig& cfg, uint64_t seed,
                              uint64_t stream_base = 0);

// Dynamic-step-size extrapolating solver for reverse diffusion processes.
// Each sample carries its own clock, step size and noise stream, so batch
// composition and thread count never change an individual trajectory.
RunReport solve_reverse(BatchState& batch, const Process& process,
                        const ScoreField& score, const SolverConfig& cfg,
                        unsigned threads = 1);

// One forward-time proposal pair sharing the draw z. s_term implements the
// +/-1 correction for Ito SDEs with state-dependent diffusion:
//   x'  = x + h f(x,t)      + sqrt(h) g(x,t)      (z - s),
//   x~  = x + h f(x',t+h)   + sqrt(h) g(x',t+h)   (z + s),
//   x'' = (x' + x~)/2.
void forward_step_pair(std::span<const double> x, double t, double h, double s_term,
                       std::span<const double> z, const DiffusionSpec& spec,
                       std::span<double> x_em, std::span<double> x_tilde,
                       std::span<double> x_heun);

// Full path retained by the forward-time solver.
struct ForwardTrajectory {
  std::vector<double> times;
  Matrix states;  // row k is the state at times[k]
  uint64_t attempts = 0;
  uint64_t accepted = 0;
  uint64_t rejected = 0;
  std::vector<StepLogEntry> log;

  std::span<const double> terminal() const { return states.row(states.rows - 1); }
};

// Dynamic-step-size extrapolating solver for an arbitrary forward-time
// diffusion. The Gaussian draw is retained after a rejection so rejections
// introduce no bias; a fresh draw happens only after an acceptance.
ForwardTrajectory solve_forward_general(std::span<const double> x0, double t_begin,
                                        double t_end, const DiffusionSpec& spec,
                                        const SolverConfig& cfg, RngStream& rng);

}  // namespace sdesim

#endif  // SDESIM_ADAPTIVE_HPP
