#ifndef SDESIM_CONFIG_HPP
#define SDESIM_CONFIG_HPP

#include <memory>
#include <string>
#include <vector>

#include "sdesim/baselines.hpp"
#include "sdesim/core.hpp"
#include "sdesim/metrics.hpp"
#include "sdesim/processes.hpp"
#include "sdesim/score.hpp"

namespace sdesim {

// Declarative vector: a fill value, an explicit array, a linspace, or a
// seed-deterministic uniform draw resolved at build time.
struct VectorSpec {
  enum class Kind { Fill, Explicit, Linspace, Uniform };
  Kind kind = Kind::Fill;
  double fill = 0.0;
  std::vector<double> values;
  double lo = 0.0;
  double hi = 1.0;

  std::vector<double> resolve(int dim, uint64_t seed, uint64_t aux_stream) const;
};

struct ProcessConfig {
  std::string type = "vp";  // "vp" | "ve"
  VpParams vp;
  VeParams ve;
  bool ve_exact_kernel = false;
};

struct DataConfig {
  std::string type = "gaussian";  // "gaussian" | "mixture"
  VectorSpec mu0;                 // defaults: fill 0
  VectorSpec var0;                // defaults: fill 1
  struct ComponentSpec {
    double weight = 1.0;
    VectorSpec mu;
    VectorSpec var;
  };
  std::vector<ComponentSpec> components;
};

struct MethodConfig {
  std::string name = "adaptive";  // "adaptive" | "em" | "pc" | "ode"
  SolverConfig solver;
  int em_steps = 1000;
  PCConfig pc;
  double ode_r = 0.2;
};

struct RunSettings {
  size_t n_samples = 1024;
  int dim = 16;
  uint64_t seed = 0;
  unsigned threads = 1;
  std::string out_dir = "out";
  bool trace = false;
  std::vector<double> eps_rel_list = {0.01, 0.02, 0.05, 0.10, 0.50};
  int sliced_projections = 64;
};

struct StabilityConfig {
  std::vector<double> lambdas = {-1, -2, -3, -5, -7, -12, -16, -19, -25, -30};
  std::vector<double> hs = {0.3, 0.25, 0.2, 0.15, 0.1, 0.075, 0.05, 0.04, 0.03, 0.025};
  double sigma = 1.0;
  double y0 = 1.0;
  size_t n_paths = 2000;
  size_t n_steps = 1000;
  // h -> 0 extrapolation settings (run per lambda over the stable h values).
  std::vector<double> limit_lambdas = {-1.0};
  std::vector<double> limit_hs = {0.2, 0.1, 0.05, 0.025};
  size_t limit_paths = 10000;
  size_t limit_steps = 1500;
  size_t limit_tail = 500;
};

struct ExperimentConfig {
  ProcessConfig process;
  DataConfig data;
  MethodConfig method;
  RunSettings run;
  StabilityConfig stability;

  void validate() const;
};

// JSON round trip. parse(serialize(parse(text))) is byte-stable: objects are
// emitted with sorted keys and doubles in shortest round-trip form.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

// Fully constructed experiment: the process, the closed-form score oracle,
// and the resolved data model (the oracle references the process, so both
// live here together).
struct Experiment {
  ExperimentConfig cfg;
  std::unique_ptr<Process> process;
  std::unique_ptr<ScoreField> oracle;
  GaussianDataModel gaussian;  // resolved when data.type == "gaussian"
  MixtureDataModel mixture;    // resolved when data.type == "mixture"

  bool is_gaussian() const { return cfg.data.type == "gaussian"; }
};

Experiment build_experiment(const ExperimentConfig& cfg);

// Analytic summary of the diffused data distribution at time t (exact for
// the Gaussian model; moment-matched for mixtures).
GaussianSummary target_summary(const Experiment& ex, double t);

// Exact draws from the diffused data distribution at time t, on auxiliary
// stream (seed, kAuxStreamBase + stream_offset).
Matrix draw_target_samples(const Experiment& ex, double t, size_t n, uint64_t seed,
                           uint64_t stream_offset);

}  // namespace sdesim

#endif  // SDESIM_CONFIG_HPP
