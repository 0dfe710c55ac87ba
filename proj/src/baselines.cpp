#include "sdesim/baselines.hpp"

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

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

RunReport finish_report(BatchState& batch, const Process& process,
                        const ScoreField& score, double eps,
                        const BaselineOptions& opts, RunReport report,
                        std::chrono::steady_clock::time_point start) {
  report.terminal_raw = batch.x;
  if (opts.denoise) {
    parallel_for(batch.n_samples(), opts.threads, [&](size_t i) {
      denoise_tweedie(batch.x.row(i), eps, score, process);
    });
    report.denoise_evals = batch.n_samples();
  }
  report.terminal = batch.x;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

RunReport em_solve(BatchState& batch, const Process& process, const ScoreField& score,
                   int n_steps, double eps, const BaselineOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> grid = baseline_time_grid(n_steps, eps);
  const size_t n = batch.n_samples();
  const size_t d = batch.dim();

  RunReport report;
  report.nfe_per_sample.assign(n, 0);
  std::vector<std::vector<StepLogEntry>> logs(opts.record_log ? n : 0);

  parallel_for(n, opts.threads, [&](size_t i) {
    RngStream rng(batch.seed, batch.stream_base + i);
    rng.set_counter(d);  // prior draw consumed [0, d)
    auto x = batch.x.row(i);
    std::vector<double> z(d), x_next(d);
    for (int k = 0; k < n_steps; ++k) {
      const double t = grid[static_cast<size_t>(k)];
      const double h = t - grid[static_cast<size_t>(k) + 1];
      rng.fill_normal(z);
      em_proposal(x, t, h, z, process, score, x_next);
      report.nfe_per_sample[i] += 1;
      if (!all_finite(x_next))
        throw NumericError("em_solve: non-finite state at sample " +
                           std::to_string(i) + ", t=" + std::to_string(t));
      std::copy(x_next.begin(), x_next.end(), x.begin());
      if (opts.record_log)
        logs[i].push_back({static_cast<uint32_t>(i), t, h, 0.0, true, z[0]});
    }
    batch.t[i] = eps;
    batch.active[i] = 0;
  });

  for (size_t i = 0; i < n; ++i) report.nfe_total += report.nfe_per_sample[i];
  report.steps_accepted = static_cast<uint64_t>(n_steps) * n;
  for (auto& l : logs) report.log.insert(report.log.end(), l.begin(), l.end());
  return finish_report(batch, process, score, eps, opts, std::move(report), start);
}

RunReport pc_solve(BatchState& batch, const Process& process, const ScoreField& score,
                   const PCConfig& pc, double eps, const BaselineOptions& opts) {
  pc.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> grid = baseline_time_grid(pc.n_predictor_steps, eps);
  const size_t n = batch.n_samples();
  const size_t d = batch.dim();
  const double grid_h = (1.0 - eps) / pc.n_predictor_steps;

  RunReport report;
  report.nfe_per_sample.assign(n, 0);

  parallel_for(n, opts.threads, [&](size_t i) {
    RngStream rng(batch.seed, batch.stream_base + i);
    rng.set_counter(d);
    auto x = batch.x.row(i);
    std::vector<double> z(d), s(d);
    for (int k = 0; k < pc.n_predictor_steps; ++k) {
      const double t_hi = grid[static_cast<size_t>(k)];
      const double t_lo = grid[static_cast<size_t>(k) + 1];

      double drift_scale = 0.0, noise_var = 0.0;
      process.ancestral_coeffs(t_hi, t_lo, drift_scale, noise_var);
      score.eval(x, t_hi, s);
      report.nfe_per_sample[i] += 1;
      rng.fill_normal(z);
      const double noise_sd = std::sqrt(std::max(0.0, noise_var));
      for (size_t j = 0; j < d; ++j)
        x[j] = x[j] * (1.0 + drift_scale) + noise_var * s[j] + noise_sd * z[j];

      // Corrector at the arrival time; the terminal point is left to the
      // denoising step.
      if (k + 1 < pc.n_predictor_steps) {
        for (int c = 0; c < pc.corrector_steps_per_predictor; ++c) {
          score.eval(x, t_lo, s);
          report.nfe_per_sample[i] += 1;
          rng.fill_normal(z);
          const double s_norm = l2_norm(s);
          if (s_norm == 0.0) continue;
          const double alpha = std::max(0.0, process.corrector_alpha(t_lo, grid_h));
          const double ratio = pc.corrector_step_scale * l2_norm(z) / s_norm;
          const double eta = 2.0 * alpha * ratio * ratio;
          const double noise = std::sqrt(2.0 * eta);
          for (size_t j = 0; j < d; ++j) x[j] += eta * s[j] + noise * z[j];
        }
      }
      if (!all_finite(x))
        throw NumericError("pc_solve: non-finite state at sample " +
                           std::to_string(i) + ", t=" + std::to_string(t_lo));
    }
    batch.t[i] = eps;
    batch.active[i] = 0;
  });

  for (size_t i = 0; i < n; ++i) report.nfe_total += report.nfe_per_sample[i];
  report.steps_accepted = static_cast<uint64_t>(pc.n_predictor_steps) * n;
  return finish_report(batch, process, score, eps, opts, std::move(report), start);
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double kB5[7] = {35.0 / 384,    0.0,        500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kB4[7] = {5179.0 / 57600,    0.0,          7571.0 / 16695,
                           393.0 / 640,       -92097.0 / 339200,
                           187.0 / 2100,      1.0 / 40};

}  // namespace

RunReport ode_probability_flow(BatchState& batch, const Process& process,
                               const ScoreField& score, const SolverConfig& cfg,
                               const BaselineOptions& opts) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const size_t n = batch.n_samples();
  const size_t d = batch.dim();

  RunReport report;
  report.nfe_per_sample.assign(n, 0);
  std::vector<uint64_t> accepted(n, 0), rejected(n, 0);
  std::vector<std::vector<StepLogEntry>> logs(opts.record_log ? n : 0);

  parallel_for(n, opts.threads, [&](size_t i) {
    auto x = batch.x.row(i);
    std::vector<double> k[7];
    for (auto& stage : k) stage.resize(d);
    std::vector<double> y(d), y5(d), y4(d), delta(d), x_prev(x.begin(), x.end());
    std::vector<double> f(d), s(d);

    auto ode_rhs = [&](std::span<const double> state, double t, std::span<double> out) {
      process.drift(state, t, f);
      score.eval(state, t, s);
      report.nfe_per_sample[i] += 1;
      const double g = process.diffusion(t);
      const double half_g2 = 0.5 * g * g;
      for (size_t j = 0; j < d; ++j) out[j] = f[j] - half_g2 * s[j];
    };

    double t = batch.t[i];
    double h = std::min(cfg.h_init, t - cfg.t_end);
    ode_rhs(x, t, k[0]);  // initial stage; later steps re-use FSAL
    uint64_t attempts = 0;

    while (t > cfg.t_end + kTimeSnap) {
      h = std::min(h, t - cfg.t_end);
      if (++attempts > cfg.max_attempts_per_sample)
        throw NumericError("ode: step-size collapse at sample " + std::to_string(i));
      const double dt = -h;  // integrating toward smaller t

      for (int st = 1; st < 7; ++st) {
        for (size_t j = 0; j < d; ++j) {
          double acc = 0.0;
          for (int p = 0; p < st; ++p) acc += kA[st][p] * k[p][j];
          y[j] = x[j] + dt * acc;
        }
        ode_rhs(y, t + kC[st] * dt, k[st]);
      }
      for (size_t j = 0; j < d; ++j) {
        double acc5 = 0.0, acc4 = 0.0;
        for (int st = 0; st < 7; ++st) {
          acc5 += kB5[st] * k[st][j];
          acc4 += kB4[st] * k[st][j];
        }
        y5[j] = x[j] + dt * acc5;
        y4[j] = x[j] + dt * acc4;
      }
      if (!all_finite(y5))
        throw NumericError("ode: non-finite state at sample " + std::to_string(i) +
                           ", t=" + std::to_string(t));

      mixed_tolerance(y5, x_prev, cfg, delta);
      const double err = scaled_error(y5, y4, delta, cfg.norm_order);
      const bool ok = err <= 1.0;
      if (opts.record_log)
        logs[i].push_back({static_cast<uint32_t>(i), t, h, err, ok, 0.0});

      if (ok) {
        std::copy(y5.begin(), y5.end(), x.begin());
        std::copy(y5.begin(), y5.end(), x_prev.begin());
        t -= h;
        if (t - cfg.t_end < kTimeSnap) t = cfg.t_end;
        k[0] = k[6];  // FSAL
        ++accepted[i];
      } else {
        ++rejected[i];
      }

      const double remaining = t - cfg.t_end;
      h = (err > 0.0) ? std::min(remaining, cfg.theta * h * std::pow(err, -opts.ode_r))
                      : remaining;
    }
    batch.t[i] = cfg.t_end;
    batch.active[i] = 0;
  });

  for (size_t i = 0; i < n; ++i) {
    report.nfe_total += report.nfe_per_sample[i];
    report.steps_accepted += accepted[i];
    report.steps_rejected += rejected[i];
  }
  for (auto& l : logs) report.log.insert(report.log.end(), l.begin(), l.end());
  return finish_report(batch, process, score, cfg.t_end, opts, std::move(report),
                       start);
}

}  // namespace sdesim
