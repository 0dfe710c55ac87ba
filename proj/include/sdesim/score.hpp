#ifndef SDESIM_SCORE_HPP
#define SDESIM_SCORE_HPP

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "sdesim/core.hpp"
#include "sdesim/processes.hpp"

namespace sdesim {

// Diagonal Gaussian data distribution N(mu0, diag(var0)).
struct GaussianDataModel {
  std::vector<double> mu0;
  std::vector<double> var0;
  void validate() const;
  int dim() const { return static_cast<int>(mu0.size()); }
};

// Weighted mixture of diagonal Gaussians.
struct MixtureDataModel {
  struct Component {
    double weight = 1.0;
    std::vector<double> mu;
    std::vector<double> var;
  };
  std::vector<Component> components;
  void validate() const;
  int dim() const {
    return components.empty() ? 0 : static_cast<int>(components[0].mu.size());
  }
};

// Closed-form score of the diffused Gaussian model:
//   p_t = N(m(t) mu0, m(t)^2 var0 + v(t)),
// with (m, v) the process transition kernel. Stands in for a trained score
// network.
class GaussianOracle final : public ScoreField {
 public:
  GaussianOracle(GaussianDataModel model, const Process& process);
  int dim() const override { return model_.dim(); }
  void eval(std::span<const double> x, double t, std::span<double> out) const override;
  // log p_t(x); used by the finite-difference checks.
  double log_density(std::span<const double> x, double t) const;
  const GaussianDataModel& model() const { return model_; }

 private:
  GaussianDataModel model_;
  const Process& process_;
};

// Closed-form score of the diffused mixture, evaluated with log-sum-exp
// responsibilities.
class MixtureOracle final : public ScoreField {
 public:
  MixtureOracle(MixtureDataModel model, const Process& process);
  int dim() const override { return model_.dim(); }
  void eval(std::span<const double> x, double t, std::span<double> out) const override;
  double log_density(std::span<const double> x, double t) const;
  const MixtureDataModel& model() const { return model_; }
  // Exact draw from the diffused mixture at time t.
  void sample(double t, RngStream& rng, std::span<double> out) const;

 private:
  MixtureDataModel model_;
  const Process& process_;
};

// Decorator counting evaluations; the unit is one call per sample slice, the
// per-sample NFE convention used in all reports. The counter is the only
// shared mutable state in the library. Also tracks the smallest time ever
// evaluated, which the terminal-hygiene tests assert never drops below t_end.
class CountingScore final : public ScoreField {
 public:
  explicit CountingScore(const ScoreField& inner) : inner_(inner) {}
  int dim() const override { return inner_.dim(); }
  void eval(std::span<const double> x, double t, std::span<double> out) const override;
  uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }
  double min_eval_time() const;
  void reset();

 private:
  const ScoreField& inner_;
  mutable std::atomic<uint64_t> calls_{0};
  mutable std::atomic<uint64_t> min_time_bits_{0x7FF0000000000000ull};  // +inf
};

}  // namespace sdesim

#endif  // SDESIM_SCORE_HPP
