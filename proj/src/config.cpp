#include "sdesim/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sdesim {

using nlohmann::json;

std::vector<double> VectorSpec::resolve(int dim, uint64_t seed,
                                        uint64_t aux_stream) const {
  if (dim <= 0) throw ConfigError("vector spec: dim must be positive");
  const auto n = static_cast<size_t>(dim);
  switch (kind) {
    case Kind::Fill:
      return std::vector<double>(n, fill);
    case Kind::Explicit:
      if (values.size() != n)
        throw ConfigError("vector spec: explicit array length does not match dim");
      return values;
    case Kind::Linspace: {
      std::vector<double> out(n);
      if (n == 1) {
        out[0] = lo;
      } else {
        for (size_t i = 0; i < n; ++i)
          out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      }
      return out;
    }
    case Kind::Uniform: {
      RngStream rng(seed, kAuxStreamBase + aux_stream);
      std::vector<double> out(n);
      for (size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * rng.uniform();
      return out;
    }
  }
  throw ConfigError("vector spec: unknown kind");
}

namespace {

VectorSpec parse_vector_spec(const json& j, const char* what) {
  VectorSpec spec;
  if (j.is_number()) {
    spec.kind = VectorSpec::Kind::Fill;
    spec.fill = j.get<double>();
    return spec;
  }
  if (j.is_array()) {
    spec.kind = VectorSpec::Kind::Explicit;
    spec.values = j.get<std::vector<double>>();
    return spec;
  }
  if (j.is_object()) {
    if (j.contains("fill")) {
      spec.kind = VectorSpec::Kind::Fill;
      spec.fill = j.at("fill").get<double>();
      return spec;
    }
    if (j.contains("linspace")) {
      const auto& ls = j.at("linspace");
      if (!ls.is_array() || ls.size() != 2)
        throw ConfigError(std::string(what) + ": linspace wants [lo, hi]");
      spec.kind = VectorSpec::Kind::Linspace;
      spec.lo = ls[0].get<double>();
      spec.hi = ls[1].get<double>();
      return spec;
    }
    if (j.contains("uniform")) {
      const auto& u = j.at("uniform");
      spec.kind = VectorSpec::Kind::Uniform;
      spec.lo = u.at("low").get<double>();
      spec.hi = u.at("high").get<double>();
      return spec;
    }
  }
  throw ConfigError(std::string(what) +
                    ": expected number, array, {fill}, {linspace} or {uniform}");
}

json vector_spec_to_json(const VectorSpec& spec) {
  switch (spec.kind) {
    case VectorSpec::Kind::Fill:
      return json{{"fill", spec.fill}};
    case VectorSpec::Kind::Explicit:
      return json(spec.values);
    case VectorSpec::Kind::Linspace:
      return json{{"linspace", {spec.lo, spec.hi}}};
    case VectorSpec::Kind::Uniform:
      return json{{"uniform", {{"low", spec.lo}, {"high", spec.hi}}}};
  }
  throw ConfigError("vector spec: unknown kind");
}

NormOrder parse_norm(const std::string& s) {
  if (s == "l2") return NormOrder::L2Scaled;
  if (s == "linf") return NormOrder::LInf;
  throw ConfigError("solver.norm must be 'l2' or 'linf'");
}

ToleranceVariant parse_tolerance_variant(const std::string& s) {
  if (s == "current-only") return ToleranceVariant::CurrentOnly;
  if (s == "current-and-previous") return ToleranceVariant::CurrentAndPrevious;
  throw ConfigError("solver.tolerance must be 'current-only' or 'current-and-previous'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (process.type != "vp" && process.type != "ve")
    throw ConfigError("process.type must be 'vp' or 've'");
  if (process.type == "vp") process.vp.validate();
  if (process.type == "ve") process.ve.validate();
  if (data.type != "gaussian" && data.type != "mixture")
    throw ConfigError("data.type must be 'gaussian' or 'mixture'");
  if (data.type == "mixture" && data.components.empty())
    throw ConfigError("data.components must be non-empty for mixtures");
  if (method.name != "adaptive" && method.name != "em" && method.name != "pc" &&
      method.name != "ode")
    throw ConfigError("unknown method '" + method.name +
                      "'; valid methods: adaptive, em, pc, ode");
  method.solver.validate();
  if (method.em_steps < 1) throw ConfigError("method.em_steps must be >= 1");
  method.pc.validate();
  if (!(method.ode_r > 0.0)) throw ConfigError("method.ode_r must be > 0");
  if (run.n_samples == 0) throw ConfigError("run.n_samples must be positive");
  if (run.dim <= 0) throw ConfigError("run.dim must be positive");
  if (run.sliced_projections < 1)
    throw ConfigError("run.sliced_projections must be >= 1");
  for (double e : run.eps_rel_list)
    if (!(e >= 0.0)) throw ConfigError("run.eps_rel_list entries must be >= 0");
  if (stability.lambdas.empty() || stability.hs.empty())
    throw ConfigError("stability grid must be non-empty");
  if (stability.n_paths < 2 || stability.limit_paths < 2)
    throw ConfigError("stability path counts must be >= 2");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig cfg;
  try {
    if (j.contains("process")) {
      const auto& p = j.at("process");
      maybe(p, "type", cfg.process.type);
      maybe(p, "beta_min", cfg.process.vp.beta_min);
      maybe(p, "beta_max", cfg.process.vp.beta_max);
      maybe(p, "sigma_min", cfg.process.ve.sigma_min);
      maybe(p, "sigma_max", cfg.process.ve.sigma_max);
      maybe(p, "ve_exact_kernel", cfg.process.ve_exact_kernel);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      maybe(d, "type", cfg.data.type);
      if (d.contains("mu0")) cfg.data.mu0 = parse_vector_spec(d.at("mu0"), "data.mu0");
      if (d.contains("var0")) {
        cfg.data.var0 = parse_vector_spec(d.at("var0"), "data.var0");
      } else {
        cfg.data.var0.fill = 1.0;
      }
      if (d.contains("components")) {
        for (const auto& c : d.at("components")) {
          DataConfig::ComponentSpec comp;
          comp.weight = c.at("weight").get<double>();
          comp.mu = parse_vector_spec(c.at("mu"), "component.mu");
          comp.var = parse_vector_spec(c.at("var"), "component.var");
          cfg.data.components.push_back(std::move(comp));
        }
      }
    } else {
      cfg.data.var0.fill = 1.0;
    }
    if (j.contains("method")) {
      const auto& m = j.at("method");
      maybe(m, "name", cfg.method.name);
      auto& s = cfg.method.solver;
      maybe(m, "eps_abs", s.eps_abs);
      maybe(m, "eps_rel", s.eps_rel);
      maybe(m, "r", s.r);
      maybe(m, "theta", s.theta);
      maybe(m, "h_init", s.h_init);
      maybe(m, "t_end", s.t_end);
      maybe(m, "extrapolate", s.extrapolate);
      maybe(m, "denoise", s.denoise);
      maybe(m, "retain_noise_on_reject", s.retain_noise_on_reject);
      if (m.contains("norm")) s.norm_order = parse_norm(m.at("norm").get<std::string>());
      if (m.contains("tolerance"))
        s.tolerance_variant =
            parse_tolerance_variant(m.at("tolerance").get<std::string>());
      maybe(m, "em_steps", cfg.method.em_steps);
      maybe(m, "ode_r", cfg.method.ode_r);
      if (m.contains("pc")) {
        const auto& p = m.at("pc");
        maybe(p, "steps", cfg.method.pc.n_predictor_steps);
        maybe(p, "corrector_steps", cfg.method.pc.corrector_steps_per_predictor);
        maybe(p, "corrector_scale", cfg.method.pc.corrector_step_scale);
      }
    }
    if (j.contains("run")) {
      const auto& r = j.at("run");
      maybe(r, "n_samples", cfg.run.n_samples);
      maybe(r, "dim", cfg.run.dim);
      maybe(r, "seed", cfg.run.seed);
      maybe(r, "threads", cfg.run.threads);
      maybe(r, "out", cfg.run.out_dir);
      maybe(r, "trace", cfg.run.trace);
      maybe(r, "eps_rel_list", cfg.run.eps_rel_list);
      maybe(r, "sliced_projections", cfg.run.sliced_projections);
    }
    if (j.contains("stability")) {
      const auto& s = j.at("stability");
      maybe(s, "lambdas", cfg.stability.lambdas);
      maybe(s, "hs", cfg.stability.hs);
      maybe(s, "sigma", cfg.stability.sigma);
      maybe(s, "y0", cfg.stability.y0);
      maybe(s, "n_paths", cfg.stability.n_paths);
      maybe(s, "n_steps", cfg.stability.n_steps);
      maybe(s, "limit_lambdas", cfg.stability.limit_lambdas);
      maybe(s, "limit_hs", cfg.stability.limit_hs);
      maybe(s, "limit_paths", cfg.stability.limit_paths);
      maybe(s, "limit_steps", cfg.stability.limit_steps);
      maybe(s, "limit_tail", cfg.stability.limit_tail);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["process"] = {{"type", cfg.process.type},
                  {"beta_min", cfg.process.vp.beta_min},
                  {"beta_max", cfg.process.vp.beta_max},
                  {"sigma_min", cfg.process.ve.sigma_min},
                  {"sigma_max", cfg.process.ve.sigma_max},
                  {"ve_exact_kernel", cfg.process.ve_exact_kernel}};
  json data = {{"type", cfg.data.type},
               {"mu0", vector_spec_to_json(cfg.data.mu0)},
               {"var0", vector_spec_to_json(cfg.data.var0)}};
  if (!cfg.data.components.empty()) {
    json comps = json::array();
    for (const auto& c : cfg.data.components)
      comps.push_back({{"weight", c.weight},
                       {"mu", vector_spec_to_json(c.mu)},
                       {"var", vector_spec_to_json(c.var)}});
    data["components"] = comps;
  }
  j["data"] = data;
  const auto& s = cfg.method.solver;
  j["method"] = {
      {"name", cfg.method.name},
      {"eps_abs", s.eps_abs},
      {"eps_rel", s.eps_rel},
      {"r", s.r},
      {"theta", s.theta},
      {"h_init", s.h_init},
      {"t_end", s.t_end},
      {"extrapolate", s.extrapolate},
      {"denoise", s.denoise},
      {"retain_noise_on_reject", s.retain_noise_on_reject},
      {"norm", s.norm_order == NormOrder::L2Scaled ? "l2" : "linf"},
      {"tolerance", s.tolerance_variant == ToleranceVariant::CurrentOnly
                        ? "current-only"
                        : "current-and-previous"},
      {"em_steps", cfg.method.em_steps},
      {"ode_r", cfg.method.ode_r},
      {"pc",
       {{"steps", cfg.method.pc.n_predictor_steps},
        {"corrector_steps", cfg.method.pc.corrector_steps_per_predictor},
        {"corrector_scale", cfg.method.pc.corrector_step_scale}}}};
  j["run"] = {{"n_samples", cfg.run.n_samples},
              {"dim", cfg.run.dim},
              {"seed", cfg.run.seed},
              {"threads", cfg.run.threads},
              {"out", cfg.run.out_dir},
              {"trace", cfg.run.trace},
              {"eps_rel_list", cfg.run.eps_rel_list},
              {"sliced_projections", cfg.run.sliced_projections}};
  j["stability"] = {{"lambdas", cfg.stability.lambdas},
                    {"hs", cfg.stability.hs},
                    {"sigma", cfg.stability.sigma},
                    {"y0", cfg.stability.y0},
                    {"n_paths", cfg.stability.n_paths},
                    {"n_steps", cfg.stability.n_steps},
                    {"limit_lambdas", cfg.stability.limit_lambdas},
                    {"limit_hs", cfg.stability.limit_hs},
                    {"limit_paths", cfg.stability.limit_paths},
                    {"limit_steps", cfg.stability.limit_steps},
                    {"limit_tail", cfg.stability.limit_tail}};
  return j.dump(2) + "\n";
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Experiment ex;
  ex.cfg = cfg;

  if (cfg.process.type == "vp") {
    ex.process = std::make_unique<VpProcess>(cfg.process.vp, cfg.run.dim);
  } else {
    ex.process = std::make_unique<VeProcess>(cfg.process.ve, cfg.run.dim,
                                             cfg.process.ve_exact_kernel);
  }

  if (cfg.data.type == "gaussian") {
    ex.gaussian.mu0 = cfg.data.mu0.resolve(cfg.run.dim, cfg.run.seed, 1);
    ex.gaussian.var0 = cfg.data.var0.resolve(cfg.run.dim, cfg.run.seed, 2);
    ex.gaussian.validate();
    ex.oracle = std::make_unique<GaussianOracle>(ex.gaussian, *ex.process);
  } else {
    uint64_t aux = 1;
    for (const auto& c : cfg.data.components) {
      MixtureDataModel::Component comp;
      comp.weight = c.weight;
      comp.mu = c.mu.resolve(cfg.run.dim, cfg.run.seed, aux++);
      comp.var = c.var.resolve(cfg.run.dim, cfg.run.seed, aux++);
      ex.mixture.components.push_back(std::move(comp));
    }
    ex.mixture.validate();
    ex.oracle = std::make_unique<MixtureOracle>(ex.mixture, *ex.process);
  }
  return ex;
}

GaussianSummary target_summary(const Experiment& ex, double t) {
  const TransitionKernel k = ex.process->kernel(t);
  const double m = k.mean_factor;
  const auto d = static_cast<size_t>(ex.cfg.run.dim);
  GaussianSummary out;
  out.mean.assign(d, 0.0);
  out.var_diag.assign(d, 0.0);
  if (ex.is_gaussian()) {
    for (size_t i = 0; i < d; ++i) {
      out.mean[i] = m * ex.gaussian.mu0[i];
      out.var_diag[i] = m * m * ex.gaussian.var0[i] + k.added_variance;
    }
    return out;
  }
  // Mixture moments: blend component means, then total variance.
  std::vector<double> second(d, 0.0);
  for (const auto& c : ex.mixture.components) {
    for (size_t i = 0; i < d; ++i) {
      const double mean_i = m * c.mu[i];
      const double var_i = m * m * c.var[i] + k.added_variance;
      out.mean[i] += c.weight * mean_i;
      second[i] += c.weight * (var_i + mean_i * mean_i);
    }
  }
  for (size_t i = 0; i < d; ++i) out.var_diag[i] = second[i] - out.mean[i] * out.mean[i];
  return out;
}

Matrix draw_target_samples(const Experiment& ex, double t, size_t n, uint64_t seed,
                           uint64_t stream_offset) {
  const auto d = static_cast<size_t>(ex.cfg.run.dim);
  Matrix out(n, d);
  RngStream rng(seed, kAuxStreamBase + stream_offset);
  if (ex.is_gaussian()) {
    const TransitionKernel k = ex.process->kernel(t);
    const double m = k.mean_factor;
    for (size_t i = 0; i < n; ++i) {
      auto row = out.row(i);
      for (size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(m * m * ex.gaussian.var0[j] + k.added_variance);
        row[j] = m * ex.gaussian.mu0[j] + sd * rng.normal();
      }
    }
    return out;
  }
  const auto* oracle = dynamic_cast<const MixtureOracle*>(ex.oracle.get());
  for (size_t i = 0; i < n; ++i) oracle->sample(t, rng, out.row(i));
  return out;
}

}  // namespace sdesim
