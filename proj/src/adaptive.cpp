#include "sdesim/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace sdesim {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

[[noreturn]] void abort_non_finite(size_t sample, double t, double h) {
  throw NumericError("non-finite state (instability) at sample " +
                     std::to_string(sample) + ", t=" + std::to_string(t) +
                     ", h=" + std::to_string(h));
}

}  // namespace

void em_proposal(std::span<const double> x, double t, double h,
                 std::span<const double> z, const Process& process,
                 const ScoreField& score, std::span<double> x_em) {
  const size_t d = x.size();
  std::vector<double> f(d), s(d);
  process.drift(x, t, f);
  score.eval(x, t, s);
  const double g = process.diffusion(t);
  const double g2h = g * g * h;
  const double noise = std::sqrt(h) * g;
  for (size_t i = 0; i < d; ++i)
    x_em[i] = x[i] - h * f[i] + g2h * s[i] + noise * z[i];
}

void heun_proposal(std::span<const double> x, std::span<const double> x_em,
                   double t, double h, std::span<const double> z,
                   const Process& process, const ScoreField& score,
                   std::span<double> x_tilde, std::span<double> x_heun) {
  const size_t d = x.size();
  const double t2 = t - h;
  std::vector<double> f(d), s(d);
  process.drift(x_em, t2, f);
  score.eval(x_em, t2, s);
  const double g = process.diffusion(t2);
  const double g2h = g * g * h;
  const double noise = std::sqrt(h) * g;
  for (size_t i = 0; i < d; ++i) {
    x_tilde[i] = x[i] - h * f[i] + g2h * s[i] + noise * z[i];
    x_heun[i] = 0.5 * (x_em[i] + x_tilde[i]);
  }
}

void lamba_proposal(std::span<const double> x, std::span<const double> x_em,
                    double t, double h, std::span<const double> z,
                    const Process& process, const ScoreField& score,
                    std::span<double> x_tilde, std::span<double> x_heun) {
  const size_t d = x.size();
  const double t2 = t - h;
  std::vector<double> f(d), s(d);
  process.drift(x_em, t2, f);
  score.eval(x_em, t2, s);
  const double g2 = process.diffusion(t2);
  const double g2h = g2 * g2 * h;
  // Noise coefficient frozen at the first stage; the x' - x'' difference is
  // then the deterministic drift mismatch only.
  const double noise = std::sqrt(h) * process.diffusion(t);
  for (size_t i = 0; i < d; ++i) {
    x_tilde[i] = x[i] - h * f[i] + g2h * s[i] + noise * z[i];
    x_heun[i] = 0.5 * (x_em[i] + x_tilde[i]);
  }
}

void mixed_tolerance(std::span<const double> x_em, std::span<const double> x_prev,
                     const SolverConfig& cfg, std::span<double> delta) {
  if (cfg.tolerance_variant == ToleranceVariant::CurrentOnly) {
    for (size_t i = 0; i < x_em.size(); ++i)
      delta[i] = std::max(cfg.eps_abs, cfg.eps_rel * std::abs(x_em[i]));
    return;
  }
  for (size_t i = 0; i < x_em.size(); ++i) {
    const double scale = std::max(std::abs(x_em[i]), std::abs(x_prev[i]));
    delta[i] = std::max(cfg.eps_abs, cfg.eps_rel * scale);
  }
}

double scaled_error(std::span<const double> x_em, std::span<const double> x_heun,
                    std::span<const double> delta, NormOrder norm) {
  const size_t d = x_em.size();
  if (norm == NormOrder::LInf) {
    double worst = 0.0;
    for (size_t i = 0; i < d; ++i)
      worst = std::max(worst, std::abs((x_em[i] - x_heun[i]) / delta[i]));
    return worst;
  }
  double acc = 0.0;
  for (size_t i = 0; i < d; ++i) {
    const double r = (x_em[i] - x_heun[i]) / delta[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(d));
}

double step_update(double h, double err, double t_remaining, const SolverConfig& cfg) {
  if (!(err > 0.0)) return t_remaining;
  return std::min(t_remaining, cfg.theta * h * std::pow(err, -cfg.r));
}

BatchState init_reverse_batch(const Process& process, size_t n,
                              const SolverConfig& cfg, uint64_t seed,
                              uint64_t stream_base) {
  cfg.validate();
  BatchState batch;
  batch.x = sample_terminal_prior(process, n, seed, stream_base);
  batch.x_prev_proposal = batch.x;
  batch.t.assign(n, 1.0);
  batch.h.assign(n, cfg.h_init);
  batch.active.assign(n, 1);
  batch.noise_cache = Matrix(n, static_cast<size_t>(process.dim()));
  batch.has_cached_noise.assign(n, 0);
  batch.seed = seed;
  batch.stream_base = stream_base;
  return batch;
}

namespace {

struct SampleOutcome {
  uint64_t nfe = 0;
  uint64_t accepted = 0;
  uint64_t rejected = 0;
  std::vector<StepLogEntry> log;
};

void advance_sample_reverse(size_t i, BatchState& batch, const Process& process,
                            const ScoreField& score, const SolverConfig& cfg,
                            SampleOutcome& out) {
  const size_t d = batch.dim();
  RngStream rng(batch.seed, batch.stream_base + i);
  rng.set_counter(d);  // the prior draw consumed [0, d)

  auto x = batch.x.row(i);
  auto x_prev = batch.x_prev_proposal.row(i);
  auto cache = batch.noise_cache.row(i);
  double t = batch.t[i];
  double h = batch.h[i];

  std::vector<double> z(d), x_em(d), x_tilde(d), x_heun(d), delta(d);
  uint64_t attempts = 0;

  while (t > cfg.t_end + kTimeSnap) {
    h = std::min(h, t - cfg.t_end);
    if (++attempts > cfg.max_attempts_per_sample)
      throw NumericError("step-size collapse: sample " + std::to_string(i) +
                         " exceeded " + std::to_string(cfg.max_attempts_per_sample) +
                         " attempts at t=" + std::to_string(t));

    if (cfg.retain_noise_on_reject && batch.has_cached_noise[i]) {
      std::copy(cache.begin(), cache.end(), z.begin());
    } else {
      rng.fill_normal(z);
    }

    em_proposal(x, t, h, z, process, score, x_em);
    if (cfg.step_method == StepMethod::LambaHeun)
      lamba_proposal(x, x_em, t, h, z, process, score, x_tilde, x_heun);
    else
      heun_proposal(x, x_em, t, h, z, process, score, x_tilde, x_heun);
    out.nfe += 2;

    if (!all_finite(x_em) || !all_finite(x_heun)) abort_non_finite(i, t, h);

    mixed_tolerance(x_em, x_prev, cfg, delta);
    const double err = scaled_error(x_em, x_heun, delta, cfg.norm_order);
    const bool accepted = err <= 1.0;

    if (cfg.record_log)
      out.log.push_back({static_cast<uint32_t>(i), t, h, err, accepted, z[0]});

    if (accepted) {
      const auto& proposal = cfg.extrapolate ? x_heun : x_em;
      std::copy(proposal.begin(), proposal.end(), x.begin());
      std::copy(x_em.begin(), x_em.end(), x_prev.begin());
      t -= h;
      if (t - cfg.t_end < kTimeSnap) t = cfg.t_end;
      batch.has_cached_noise[i] = 0;
      ++out.accepted;
    } else {
      if (cfg.retain_noise_on_reject) {
        std::copy(z.begin(), z.end(), cache.begin());
        batch.has_cached_noise[i] = 1;
      }
      ++out.rejected;
    }

    h = step_update(h, err, t - cfg.t_end, cfg);
  }

  batch.t[i] = cfg.t_end;
  batch.h[i] = h;
  batch.active[i] = 0;
}

}  // namespace

RunReport solve_reverse(BatchState& batch, const Process& process,
                        const ScoreField& score, const SolverConfig& cfg,
                        unsigned threads) {
  cfg.validate();
  if (score.dim() != process.dim())
    throw ConfigError("solve_reverse: score dim does not match process dim");
  const auto start = std::chrono::steady_clock::now();

  const size_t n = batch.n_samples();
  std::vector<SampleOutcome> outcomes(n);
  parallel_for(n, threads, [&](size_t i) {
    advance_sample_reverse(i, batch, process, score, cfg, outcomes[i]);
  });

  RunReport report;
  report.terminal_raw = batch.x;
  report.nfe_per_sample.resize(n);
  for (size_t i = 0; i < n; ++i) {
    report.nfe_per_sample[i] = outcomes[i].nfe;
    report.nfe_total += outcomes[i].nfe;
    report.steps_accepted += outcomes[i].accepted;
    report.steps_rejected += outcomes[i].rejected;
  }
  if (cfg.record_log) {
    for (auto& o : outcomes)
      report.log.insert(report.log.end(), o.log.begin(), o.log.end());
  }

  if (cfg.denoise) {
    parallel_for(n, threads, [&](size_t i) {
      denoise_tweedie(batch.x.row(i), cfg.t_end, score, process);
    });
    report.denoise_evals = n;
  }
  report.terminal = batch.x;

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void forward_step_pair(std::span<const double> x, double t, double h, double s_term,
                       std::span<const double> z, const DiffusionSpec& spec,
                       std::span<double> x_em, std::span<double> x_tilde,
                       std::span<double> x_heun) {
  const size_t d = x.size();
  const double sqrt_h = std::sqrt(h);
  std::vector<double> f(d);

  spec.drift(x, t, f);
  const double g1 = sqrt_h * spec.diffusion(x, t);
  for (size_t i = 0; i < d; ++i)
    x_em[i] = x[i] + h * f[i] + g1 * (z[i] - s_term);

  spec.drift(x_em, t + h, f);
  const double g2 = sqrt_h * spec.diffusion(x_em, t + h);
  for (size_t i = 0; i < d; ++i) {
    x_tilde[i] = x[i] + h * f[i] + g2 * (z[i] + s_term);
    x_heun[i] = 0.5 * (x_em[i] + x_tilde[i]);
  }
}

ForwardTrajectory solve_forward_general(std::span<const double> x0, double t_begin,
                                        double t_end, const DiffusionSpec& spec,
                                        const SolverConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (!(t_begin < t_end))
    throw ConfigError("solve_forward_general: need t_begin < t_end");
  const size_t d = x0.size();

  ForwardTrajectory traj;
  traj.states = Matrix(0, d);
  auto record = [&](double t, std::span<const double> state) {
    traj.times.push_back(t);
    traj.states.data.insert(traj.states.data.end(), state.begin(), state.end());
    ++traj.states.rows;
  };

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> x_prev(x0.begin(), x0.end());
  std::vector<double> z(d), x_em(d), x_tilde(d), x_heun(d), delta(d);

  double t = t_begin;
  double h = std::min(cfg.h_init, t_end - t_begin);
  record(t, x);
  rng.fill_normal(z);
  bool need_fresh_noise = false;

  const bool use_s_term = spec.noise_type == NoiseType::Ito &&
                          spec.diffusion_state_dependent;

  while (t < t_end - kTimeSnap) {
    h = std::min(h, t_end - t);
    if (++traj.attempts > cfg.max_attempts_per_sample)
      throw NumericError("step-size collapse in forward solve at t=" +
                         std::to_string(t));

    if (need_fresh_noise) {
      rng.fill_normal(z);
      need_fresh_noise = false;
    }
    const double s_term = use_s_term ? rng.sign() : 0.0;

    forward_step_pair(x, t, h, s_term, z, spec, x_em, x_tilde, x_heun);
    if (!all_finite(x_em) || !all_finite(x_heun)) abort_non_finite(0, t, h);

    mixed_tolerance(x_em, x_prev, cfg, delta);
    const double err = scaled_error(x_em, x_heun, delta, cfg.norm_order);
    const bool accepted = err <= 1.0;
    if (cfg.record_log) traj.log.push_back({0, t, h, err, accepted, z[0]});

    if (accepted) {
      t += h;
      if (t_end - t < kTimeSnap) t = t_end;
      const auto& proposal = cfg.extrapolate ? x_heun : x_em;
      std::copy(proposal.begin(), proposal.end(), x.begin());
      std::copy(x_em.begin(), x_em.end(), x_prev.begin());
      record(t, x);
      need_fresh_noise = true;  // the retained draw dies with the acceptance
      ++traj.accepted;
    } else {
      ++traj.rejected;
    }

    h = step_update(h, err, t_end - t, cfg);
  }
  return traj;
}

}  // namespace sdesim
