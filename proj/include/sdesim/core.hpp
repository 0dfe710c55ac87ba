#ifndef SDESIM_CORE_HPP
#define SDESIM_CORE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdesim/rng.hpp"

namespace sdesim {

// Invalid configuration or input file. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during a solve (non-finite state, step-size collapse).
// CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles; row i is sample i's state.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t n, size_t d) : rows(n), cols(d), data(n * d, 0.0) {}

  std::span<double> row(size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(size_t i) const {
    return {data.data() + i * cols, cols};
  }
  bool empty() const { return rows == 0; }
};

enum class TimeDirection { ReverseTime, ForwardTime };
enum class NoiseType { Ito, Stratonovich };
enum class NormOrder { L2Scaled, LInf };
enum class ToleranceVariant { CurrentOnly, CurrentAndPrevious };

// Stepping rule used for the error-estimate pair. StochasticHeun is the
// default two-evaluation scheme; LambaHeun replaces the second stage with a
// deterministic improved-Euler drift re-evaluation (experimental, kept for
// the ablation harness).
enum class StepMethod { StochasticHeun, LambaHeun };

// Drift/diffusion pair defining a diffusion process on [t_end, 1].
// The diffusion coefficient is scalar (isotropic); it may depend on the
// state only when diffusion_state_dependent is set (forward-time solver).
struct DiffusionSpec {
  using DriftFn =
      std::function<void(std::span<const double> x, double t, std::span<double> out)>;
  using DiffusionFn = std::function<double(std::span<const double> x, double t)>;

  DriftFn drift;
  DiffusionFn diffusion;
  TimeDirection direction = TimeDirection::ReverseTime;
  NoiseType noise_type = NoiseType::Ito;
  bool diffusion_state_dependent = false;
  int dim = 0;
};

// All tunables of the dynamic-step solvers.
struct SolverConfig {
  double eps_abs = 0.0078125;  // absolute tolerance, state units
  double eps_rel = 0.01;       // relative tolerance, dimensionless
  double r = 0.9;              // exponent-scaling term of the step update
  double theta = 0.9;          // safety parameter in (0,1]
  double h_init = 0.01;
  NormOrder norm_order = NormOrder::L2Scaled;
  ToleranceVariant tolerance_variant = ToleranceVariant::CurrentAndPrevious;
  bool extrapolate = true;
  double t_end = 1e-3;  // integration stops here, then denoises

  StepMethod step_method = StepMethod::StochasticHeun;
  // Reverse-time runs draw fresh noise on every attempt; this flag switches
  // to the forward-time convention of re-using the draw after a rejection.
  bool retain_noise_on_reject = false;
  bool denoise = true;
  bool record_log = true;
  uint64_t max_attempts_per_sample = 1'000'000;

  void validate() const {
    if (!(eps_abs > 0.0)) throw ConfigError("eps_abs must be > 0");
    if (!(eps_rel >= 0.0)) throw ConfigError("eps_rel must be >= 0");
    if (!(r > 0.0)) throw ConfigError("r must be > 0");
    if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("theta must be in (0,1]");
    if (!(h_init > 0.0 && h_init <= 1.0)) throw ConfigError("h_init must be in (0,1]");
    if (!(t_end > 0.0 && t_end < 1.0)) throw ConfigError("t_end must be in (0,1)");
    if (max_attempts_per_sample == 0)
      throw ConfigError("max_attempts_per_sample must be positive");
  }
};

// Per-sample solver state for one batch run.
struct BatchState {
  Matrix x;                 // current states, n x d
  Matrix x_prev_proposal;   // last accepted lower-order proposal x'
  std::vector<double> t;    // per-sample clock
  std::vector<double> h;    // per-sample step size
  std::vector<uint8_t> active;
  Matrix noise_cache;       // retained draw after a rejection (forward solver)
  std::vector<uint8_t> has_cached_noise;
  uint64_t seed = 0;
  uint64_t stream_base = 0;

  size_t n_samples() const { return x.rows; }
  size_t dim() const { return x.cols; }
};

struct StepLogEntry {
  uint32_t sample = 0;
  double t = 0.0;
  double h = 0.0;
  double err = 0.0;
  bool accepted = false;
  double z0 = 0.0;  // first component of the Gaussian draw (noise-reuse checks)
};

// Outcome of one solver run over a batch.
struct RunReport {
  Matrix terminal;      // states after terminal denoising
  Matrix terminal_raw;  // states at t_end before denoising
  std::vector<uint64_t> nfe_per_sample;  // score evaluations during integration
  uint64_t nfe_total = 0;                // sum of nfe_per_sample
  uint64_t denoise_evals = 0;            // terminal-denoise evaluations, kept separate
  uint64_t steps_accepted = 0;
  uint64_t steps_rejected = 0;
  std::vector<StepLogEntry> log;  // ordered by sample, then attempt
  double wall_seconds = 0.0;      // exempt from byte-reproducibility

  double nfe_per_sample_mean() const {
    if (nfe_per_sample.empty()) return 0.0;
    return static_cast<double>(nfe_total) / static_cast<double>(nfe_per_sample.size());
  }
  uint64_t nfe_per_sample_max() const {
    uint64_t m = 0;
    for (uint64_t v : nfe_per_sample) m = std::max(m, v);
    return m;
  }
};

// Evaluatable score function s(x, t). Implementations must be immutable and
// safe to share across threads; any bookkeeping (evaluation counters) lives
// in decorators.
class ScoreField {
 public:
  virtual ~ScoreField() = default;
  virtual int dim() const = 0;
  virtual void eval(std::span<const double> x, double t, std::span<double> out) const = 0;
};

// Adapter wrapping a callable as a ScoreField.
class FunctionScore : public ScoreField {
 public:
  using Fn = std::function<void(std::span<const double>, double, std::span<double>)>;
  FunctionScore(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int dim() const override { return dim_; }
  void eval(std::span<const double> x, double t, std::span<double> out) const override {
    fn_(x, t, out);
  }

 private:
  int dim_;
  Fn fn_;
};

// Absolute tolerance matching one 8-bit color increment for data scaled to
// [y_min, y_max].
inline double image_abs_tolerance(double y_min, double y_max) {
  if (!(y_max > y_min)) throw ConfigError("image_abs_tolerance: need y_max > y_min");
  return (y_max - y_min) / 256.0;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Work items must write to disjoint slots.
void parallel_for(size_t n, unsigned threads, const std::function<void(size_t)>& fn);

}  // namespace sdesim

#endif  // SDESIM_CORE_HPP
