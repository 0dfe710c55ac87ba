#include "sdesim/score.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

namespace sdesim {

void GaussianDataModel::validate() const {
  if (mu0.empty() || mu0.size() != var0.size())
    throw ConfigError("gaussian model: mu0/var0 must be non-empty and equal length");
  for (double v : var0)
    if (!(v > 0.0)) throw ConfigError("gaussian model: variances must be positive");
}

void MixtureDataModel::validate() const {
  if (components.empty()) throw ConfigError("mixture model: no components");
  const size_t d = components[0].mu.size();
  double wsum = 0.0;
  for (const auto& c : components) {
    if (c.mu.size() != d || c.var.size() != d)
      throw ConfigError("mixture model: inconsistent component dimensions");
    if (!(c.weight > 0.0)) throw ConfigError("mixture model: weights must be positive");
    for (double v : c.var)
      if (!(v > 0.0)) throw ConfigError("mixture model: variances must be positive");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ConfigError("mixture model: weights must sum to 1");
}

GaussianOracle::GaussianOracle(GaussianDataModel model, const Process& process)
    : model_(std::move(model)), process_(process) {
  model_.validate();
  if (model_.dim() != process.dim())
    throw ConfigError("gaussian oracle: model dim does not match process dim");
}

void GaussianOracle::eval(std::span<const double> x, double t,
                          std::span<double> out) const {
  const TransitionKernel k = process_.kernel(t);
  const double m = k.mean_factor;
  for (size_t i = 0; i < x.size(); ++i) {
    const double var = m * m * model_.var0[i] + k.added_variance;
    out[i] = -(x[i] - m * model_.mu0[i]) / var;
  }
}

double GaussianOracle::log_density(std::span<const double> x, double t) const {
  const TransitionKernel k = process_.kernel(t);
  const double m = k.mean_factor;
  double lp = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double var = m * m * model_.var0[i] + k.added_variance;
    const double diff = x[i] - m * model_.mu0[i];
    lp += -0.5 * (diff * diff / var + std::log(2.0 * std::numbers::pi * var));
  }
  return lp;
}

MixtureOracle::MixtureOracle(MixtureDataModel model, const Process& process)
    : model_(std::move(model)), process_(process) {
  model_.validate();
  if (model_.dim() != process.dim())
    throw ConfigError("mixture oracle: model dim does not match process dim");
}

namespace {

// Per-component diffused log density and its score contribution.
double component_log_density(std::span<const double> x,
                             const MixtureDataModel::Component& c, double m,
                             double v) {
  double lp = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double var = m * m * c.var[i] + v;
    const double diff = x[i] - m * c.mu[i];
    lp += -0.5 * (diff * diff / var + std::log(2.0 * std::numbers::pi * var));
  }
  return lp;
}

}  // namespace

void MixtureOracle::eval(std::span<const double> x, double t,
                         std::span<double> out) const {
  const TransitionKernel k = process_.kernel(t);
  const double m = k.mean_factor;
  const size_t n_comp = model_.components.size();

  std::vector<double> log_post(n_comp);
  double max_lp = -std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < n_comp; ++c) {
    const auto& comp = model_.components[c];
    log_post[c] = std::log(comp.weight) +
                  component_log_density(x, comp, m, k.added_variance);
    max_lp = std::max(max_lp, log_post[c]);
  }
  double denom = 0.0;
  for (size_t c = 0; c < n_comp; ++c) denom += std::exp(log_post[c] - max_lp);

  std::fill(out.begin(), out.end(), 0.0);
  for (size_t c = 0; c < n_comp; ++c) {
    const double resp = std::exp(log_post[c] - max_lp) / denom;
    const auto& comp = model_.components[c];
    for (size_t i = 0; i < x.size(); ++i) {
      const double var = m * m * comp.var[i] + k.added_variance;
      out[i] += resp * (-(x[i] - m * comp.mu[i]) / var);
    }
  }
}

double MixtureOracle::log_density(std::span<const double> x, double t) const {
  const TransitionKernel k = process_.kernel(t);
  const double m = k.mean_factor;
  double max_lp = -std::numeric_limits<double>::infinity();
  std::vector<double> lps(model_.components.size());
  for (size_t c = 0; c < model_.components.size(); ++c) {
    lps[c] = std::log(model_.components[c].weight) +
             component_log_density(x, model_.components[c], m, k.added_variance);
    max_lp = std::max(max_lp, lps[c]);
  }
  double sum = 0.0;
  for (double lp : lps) sum += std::exp(lp - max_lp);
  return max_lp + std::log(sum);
}

void MixtureOracle::sample(double t, RngStream& rng, std::span<double> out) const {
  const TransitionKernel k = process_.kernel(t);
  const double m = k.mean_factor;
  const double u = rng.uniform();
  size_t pick = model_.components.size() - 1;
  double acc = 0.0;
  for (size_t c = 0; c < model_.components.size(); ++c) {
    acc += model_.components[c].weight;
    if (u < acc) {
      pick = c;
      break;
    }
  }
  const auto& comp = model_.components[pick];
  for (size_t i = 0; i < out.size(); ++i) {
    const double sd = std::sqrt(m * m * comp.var[i] + k.added_variance);
    out[i] = m * comp.mu[i] + sd * rng.normal();
  }
}

void CountingScore::eval(std::span<const double> x, double t,
                         std::span<double> out) const {
  calls_.fetch_add(1, std::memory_order_relaxed);
  uint64_t observed = min_time_bits_.load(std::memory_order_relaxed);
  const uint64_t bits = std::bit_cast<uint64_t>(t);
  while (t < std::bit_cast<double>(observed) &&
         !min_time_bits_.compare_exchange_weak(observed, bits,
                                               std::memory_order_relaxed)) {
  }
  inner_.eval(x, t, out);
}

double CountingScore::min_eval_time() const {
  return std::bit_cast<double>(min_time_bits_.load(std::memory_order_relaxed));
}

void CountingScore::reset() {
  calls_.store(0, std::memory_order_relaxed);
  min_time_bits_.store(0x7FF0000000000000ull, std::memory_order_relaxed);
}

}  // namespace sdesim
