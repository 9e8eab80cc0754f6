#include "mslab/experiment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "mslab/freeness_sim.hpp"
#include "mslab/gibbs_flow.hpp"
#include "mslab/io.hpp"
#include "mslab/microstates.hpp"
#include "mslab/transport.hpp"

#ifndef MSLAB_VERSION
#define MSLAB_VERSION "0.0.0"
#endif

namespace mslab {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version() { return MSLAB_VERSION; }

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"entropy",    "freeness", "convolve",         "gibbs",      "hopf-lax",
                                              "wasserstein", "specht",  "independent-join", "example-5-3"};
  return kinds;
}

json json_number(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  return x;
}

std::string render(const json& j) { return j.dump(2) + "\n"; }

namespace {

// Strict reader over one JSON object: every key must be consumed.
class Params {
 public:
  Params(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) fail(key, "is required");
    used_.insert(key);
    return j_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const json* v = fallback ? optional(key) : &raw(key);
    if (!v) return *fallback;
    if (!v->is_number()) fail(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt,
                       std::int64_t lo = std::numeric_limits<std::int64_t>::min(),
                       std::int64_t hi = std::numeric_limits<std::int64_t>::max()) {
    const json* v = fallback ? optional(key) : &raw(key);
    std::int64_t x = 0;
    if (!v) {
      x = *fallback;
    } else {
      if (!v->is_number()) fail(key, "expected an integer");
      const double d = v->get<double>();
      if (d != std::floor(d) || std::abs(d) > 9e15) fail(key, "expected an integer");
      x = static_cast<std::int64_t>(d);
    }
    if (x < lo || x > hi) {
      fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return x;
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!used_.count(key)) fail(key, "is not a recognized parameter");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError(ctx_ + (key.empty() ? "" : "." + key) + ": " + what);
  }

  const std::string& context() const { return ctx_; }

 private:
  const json& j_;
  std::string ctx_;
  std::set<std::string> used_;
};

struct Plan {
  std::function<json(std::string& csv)> run;
  std::function<void(Diagnostics&)> smoke;
};

json load_json_file(const fs::path& path, const std::string& ctx) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ctx + ": cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(ctx + ": '" + path.string() + "' is not valid JSON (" + e.what() + ")");
  }
}

// Inline object, or a path (relative to the config) to a JSON file.
json resolve(const json& j, const ExperimentConfig& cfg, const std::string& ctx) {
  if (j.is_string()) return load_json_file(cfg.base_dir / j.get<std::string>(), ctx);
  return j;
}

template <typename F>
auto wrap(const std::string& ctx, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError&) {
    throw;
  } catch (const ParseError& e) {
    throw ValidationError(ctx + ": " + e.what() + " at position " + std::to_string(e.position));
  } catch (const json::exception& e) {
    throw ValidationError(ctx + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
}

NeighborhoodSpec read_spec(Params& p, const std::string& key, const ExperimentConfig& cfg) {
  const std::string ctx = p.context() + "." + key;
  const json j = resolve(p.raw(key), cfg, ctx);
  return wrap(ctx, [&] { return spec_from_json(j); });
}

std::vector<Constraint> read_constraints(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw ValidationError(ctx + ": expected a list of constraints");
  std::vector<Constraint> out;
  int k = 0;
  for (const auto& c : j) {
    const std::string here = ctx + "[" + std::to_string(k++) + "]";
    Params cp(c, here);
    Constraint con;
    con.phi = wrap(here + ".formula", [&] { return parse_formula(cp.raw("formula").get<std::string>()); });
    con.target = cp.number("target");
    con.tol = cp.positive("tol");
    cp.finish();
    out.push_back(con);
  }
  return out;
}

Potential read_potential(Params& p, const ExperimentConfig& cfg) {
  const std::string ctx = p.context() + ".potential";
  const json j = resolve(p.raw("potential"), cfg, ctx);
  return wrap(ctx, [&] { return potential_from_json(j); });
}

LawSpec read_law(const json& j, const ExperimentConfig& cfg, const std::string& ctx) {
  if (j.is_string() && j.get<std::string>() != "semicircle") {
    const fs::path path = cfg.base_dir / j.get<std::string>();
    if (path.extension() == ".csv") {
      std::ifstream in(path);
      if (!in) throw ValidationError(ctx + ": cannot open '" + path.string() + "'");
      LawSpec law;
      law.kind = LawSpec::Kind::Atoms;
      law.atoms = wrap(ctx, [&] { return read_spectral_csv(in); });
      return law;
    }
    return wrap(ctx, [&] { return law_from_json(load_json_file(path, ctx)); });
  }
  return wrap(ctx, [&] { return law_from_json(j); });
}

std::vector<LawSpec> read_laws(const json& j, const ExperimentConfig& cfg, const std::string& ctx) {
  std::vector<LawSpec> out;
  if (!j.is_array()) return {read_law(j, cfg, ctx)};
  int k = 0;
  for (const auto& e : j) out.push_back(read_law(e, cfg, ctx + "[" + std::to_string(k++) + "]"));
  if (out.empty()) throw ValidationError(ctx + ": needs at least one law");
  return out;
}

MatrixTuple read_tuple(const json& j, const ExperimentConfig& cfg, const std::string& ctx) {
  const json r = resolve(j, cfg, ctx);
  return wrap(ctx, [&] { return tuple_from_json(r); });
}

std::vector<int> read_n_list(Params& p, const std::string& key, std::optional<std::vector<int>> fallback = std::nullopt) {
  const json* v = fallback ? p.optional(key) : &p.raw(key);
  if (!v) return *fallback;
  return wrap(p.context() + "." + key, [&] { return parse_n_list(*v); });
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + "\n";
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string fmt(std::int64_t x) { return std::to_string(x); }

json estimate_json(const VolumeEstimate& e) {
  return {{"n", e.n},
          {"h", json_number(e.h)},
          {"h_ci", json_number(e.h_ci)},
          {"log_volume", json_number(e.log_volume)},
          {"log_volume_ci", json_number(e.ci)},
          {"hits", e.hits},
          {"samples", e.samples},
          {"boundary", e.boundary}};
}

json moments_json(const MomentVector& mv) { return to_json(mv); }

// Membership hit count over 100 proposal draws.
std::int64_t smoke_hits(const NeighborhoodSpec& spec, int n, std::uint64_t seed) {
  SamplingConfig sc;
  sc.seed = seed;
  std::int64_t hits = 0;
  double lw = 0.0;
  for (std::int64_t i = 0; i < 100; ++i) {
    const auto y = draw_proposal(n, spec.d, spec.field, sc, i, &lw);
    hits += is_microstate(y, spec) == Membership::In;
  }
  return hits;
}

SamplingConfig read_sampling(Params& p, std::uint64_t seed) {
  SamplingConfig sc;
  sc.seed = seed;
  sc.samples = p.integer("samples", 100'000, 1000, kMaxSamples);
  sc.proposal_scale = p.positive("proposal_scale", 1.0);
  sc.max_n = static_cast<int>(p.integer("max_n", kDefaultMaxN, 1, 64));
  sc.stream = static_cast<std::uint64_t>(p.integer("stream", 0, 0));
  return sc;
}

Plan plan_entropy(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const auto spec = read_spec(p, "spec", cfg);
  const auto n_list = read_n_list(p, "n");
  const auto sc = read_sampling(p, cfg.seed);
  const bool require_hits = p.boolean("require_hits", true);
  p.finish();
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1 || n_list[i] > sc.max_n) p.fail("n", "values must lie in [1, max_n]");
    if (i > 0 && n_list[i] <= n_list[i - 1]) p.fail("n", "must be strictly increasing");
  }
  Plan plan;
  plan.run = [=](std::string& csv) {
    const auto est = estimate_entropy(spec, n_list, sc);
    bool any = false;
    json rows = json::array();
    csv = csv_line({"n", "h", "h_ci", "log_volume", "log_volume_ci", "hits", "samples", "boundary"});
    for (const auto& e : est.per_n) {
      any = any || e.hits > 0;
      rows.push_back(estimate_json(e));
      csv += csv_line({fmt(std::int64_t{e.n}), fmt(e.h), fmt(e.h_ci), fmt(e.log_volume), fmt(e.ci), fmt(e.hits),
                       fmt(e.samples), fmt(e.boundary)});
    }
    if (require_hits && !any) {
      throw NumericalFailure("entropy: no proposal draw landed in the microstate space at any n; "
                             "increase samples or loosen the tolerances (or set require_hits to false)");
    }
    json trend = {{"value_at_largest_n", json_number(est.trend.value_at_largest_n)},
                  {"intercept", est.trend.intercept ? json_number(*est.trend.intercept) : json(nullptr)},
                  {"slope", est.trend.slope ? json_number(*est.trend.slope) : json(nullptr)}};
    return json{{"per_n", rows}, {"trend", trend}};
  };
  plan.smoke = [=](Diagnostics& d) {
    const auto hits = smoke_hits(spec, n_list.front(), cfg.seed);
    d.notes.push_back("smoke test: " + std::to_string(hits) + "/100 proposal draws inside the spec at n = " +
                      std::to_string(n_list.front()));
  };
  return plan;
}

Plan plan_freeness(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const auto x = read_laws(p.raw("x"), cfg, "params.x");
  const auto y = read_laws(p.raw("y"), cfg, "params.y");
  FreenessConfig fc;
  fc.seed = cfg.seed;
  fc.n_list = read_n_list(p, "n", std::vector<int>{64, 512});
  fc.max_len = static_cast<int>(p.integer("max_len", 4, 1, 8));
  fc.trials = static_cast<int>(p.integer("trials", 10, 1, 10'000));
  fc.epsilon = p.positive("epsilon", 0.05);
  p.finish();
  wrap("params", [&] {
    fc.validate();
    return 0;
  });
  Plan plan;
  plan.run = [=](std::string& csv) {
    const auto rows = asymptotic_freeness_experiment(x, y, fc);
    json out = json::array();
    csv = csv_line({"n", "mean_deviation", "max_deviation", "exceed_frequency", "self_invariance"});
    for (const auto& r : rows) {
      json per = json::array();
      for (double v : r.per_trial) per.push_back(json_number(v));
      out.push_back({{"n", r.n},
                     {"mean_deviation", json_number(r.mean_deviation)},
                     {"max_deviation", json_number(r.max_deviation)},
                     {"exceed_frequency", json_number(r.exceed_frequency)},
                     {"self_invariance", json_number(r.self_invariance)},
                     {"per_trial", per}});
      csv += csv_line({fmt(std::int64_t{r.n}), fmt(r.mean_deviation), fmt(r.max_deviation), fmt(r.exceed_frequency),
                       fmt(r.self_invariance)});
    }
    return json{{"epsilon", fc.epsilon}, {"rows", out}};
  };
  plan.smoke = [=](Diagnostics&) {
    for (const auto& law : x) law.quantiles(fc.n_list.front());
    for (const auto& law : y) law.quantiles(fc.n_list.front());
  };
  return plan;
}

Plan plan_convolve(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const auto mu = read_law(p.raw("mu"), cfg, "params.mu");
  const auto nu = read_law(p.raw("nu"), cfg, "params.nu");
  ConvolutionConfig cc;
  cc.seed = cfg.seed;
  cc.n = static_cast<int>(p.integer("n", 1024, 1, 4096));
  cc.trials = static_cast<int>(p.integer("trials", 4, 1, 10'000));
  cc.max_len = static_cast<int>(p.integer("max_len", 6, 1, kMaxLenCap));
  p.finish();
  Plan plan;
  plan.run = [=](std::string& csv) {
    const auto rows = free_convolution_experiment(mu, nu, cc);
    json out = json::array();
    csv = csv_line({"k", "empirical", "spread", "oracle", "limit", "deviation"});
    for (const auto& r : rows) {
      out.push_back({{"k", r.k},
                     {"empirical", json_number(r.empirical)},
                     {"spread", json_number(r.spread)},
                     {"oracle", json_number(r.oracle)},
                     {"limit", json_number(r.limit)},
                     {"deviation", json_number(r.deviation)}});
      csv += csv_line({fmt(std::int64_t{r.k}), fmt(r.empirical), fmt(r.spread), fmt(r.oracle), fmt(r.limit),
                       fmt(r.deviation)});
    }
    return json{{"n", cc.n}, {"trials", cc.trials}, {"rows", out}};
  };
  plan.smoke = [](Diagnostics&) {};
  return plan;
}

Plan plan_gibbs(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const auto v = read_potential(p, cfg);
  GibbsConfig gc;
  gc.seed = cfg.seed;
  gc.n = static_cast<int>(p.integer("n", 64, 1, 2048));
  gc.burn_in = p.integer("burn_in", 500, 0);
  gc.samples = p.integer("samples", 2000, 10);
  gc.thin = static_cast<int>(p.integer("thin", 5, 1));
  gc.max_len = static_cast<int>(p.integer("max_len", 4, 1, kMaxLenCap));
  gc.chains = static_cast<int>(p.integer("chains", 2, 1, 64));
  gc.step = p.number("step", 0.0);
  const json* dsg = p.optional("dyson_schwinger_g");
  p.finish();
  std::optional<double> g;
  if (dsg) {
    if (!dsg->is_number()) p.fail("dyson_schwinger_g", "expected a number");
    g = dsg->get<double>();
    if (*g < 0.0 || *g > 0.5) p.fail("dyson_schwinger_g", "must lie in [0, 0.5]");
    if (v.d != 1) p.fail("dyson_schwinger_g", "the quartic oracle is single-variable");
  }
  if (gc.step < 0.0 || gc.step > max_step(v)) p.fail("step", "must lie in [0, 1/B]");
  Plan plan;
  plan.run = [=](std::string& csv) {
    GibbsResult res;
    try {
      res = sample_gibbs_moments(v, gc);
    } catch (const DivergenceError& e) {
      throw NumericalFailure(e.what());
    }
    std::optional<MomentVector> oracle;
    if (g) oracle = dyson_schwinger_quartic(*g, gc.max_len);
    csv = csv_line({"word", "re", "im", "ci", "oracle"});
    json ci = json::array();
    for (std::size_t i = 1; i < res.moments.size(); ++i) {
      const auto w = res.moments.word_at(i);
      ci.push_back(json_number(res.ci[i]));
      double o = std::numeric_limits<double>::quiet_NaN();
      if (oracle) o = oracle->at(w).real();
      csv += csv_line({"\"" + w.to_string() + "\"", fmt(res.moments[i].real()), fmt(res.moments[i].imag()),
                       fmt(res.ci[i]), fmt(o)});
    }
    json out{{"moments", moments_json(res.moments)},
             {"ci", ci},
             {"tau_m2", json_number(res.tau_m2)},
             {"step", json_number(res.step)},
             {"gradient_error", json_number(res.gradient_error)},
             {"recorded", res.recorded},
             {"rejected", res.rejected}};
    if (oracle) {
      out["dyson_schwinger"] = moments_json(*oracle);
      const double m2 = oracle->power_moment(2).real();
      out["m2_relative_error"] = json_number(std::abs(res.moments.power_moment(2).real() / m2 - 1.0));
    }
    return out;
  };
  plan.smoke = [=](Diagnostics& d) {
    RngStream rng(cfg.seed, 0xB10);
    LangevinState st{MatrixTuple::zeros(std::min(gc.n, 16), v.d), gc.step > 0 ? gc.step : default_step(v), 0.0, 0};
    try {
      for (int k = 0; k < 100; ++k) langevin_step(st, v, rng);
      d.notes.push_back("smoke test: 100 Langevin steps at n = " + std::to_string(st.x.n()) + " stayed finite");
    } catch (const DivergenceError& e) {
      d.errors.push_back(e.what());
    }
    const double ge = gradient_check(v, std::min(gc.n, 8));
    if (ge > gc.gradient_tolerance) d.errors.push_back("gradient check failed: relative error " + fmt(ge));
  };
  return plan;
}

MatrixTuple hopf_lax_point(const json& j, const Potential& v, const ExperimentConfig& cfg, const std::string& ctx) {
  if (j.is_object() && j.contains("random")) {
    Params rp(j, ctx);
    const int n = static_cast<int>(rp.integer("random", std::nullopt, 1, 1024));
    rp.finish();
    RngStream rng(cfg.seed, 0xB00);
    if (v.field == Field::Complex) return sample_ginibre(n, v.d, rng);
    std::vector<Matrix> mats;
    for (int j2 = 0; j2 < v.d; ++j2) mats.push_back(sample_gue(n, rng));
    return MatrixTuple(std::move(mats));
  }
  auto x = read_tuple(j, cfg, ctx);
  if (x.d() != v.d) throw ValidationError(ctx + ": tuple has " + std::to_string(x.d()) + " matrices, potential has d = " + std::to_string(v.d));
  return x;
}

Plan plan_hopf_lax(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const auto v = read_potential(p, cfg);
  const double t = p.positive("t");
  const auto x = hopf_lax_point(p.raw("x"), v, cfg, "params.x");
  const int k_max = static_cast<int>(p.integer("k_max", 1, 1, 64));
  HopfLaxConfig hc;
  hc.seed = cfg.seed;
  hc.z_samples = static_cast<int>(p.integer("z_samples", 1000, 1, 1'000'000));
  hc.antithetic = p.boolean("antithetic", true);
  hc.per_sample = p.boolean("per_sample", false);
  hc.opt.starts = static_cast<int>(p.integer("starts", 1, 1, 64));
  hc.opt.max_iters = static_cast<int>(p.integer("max_iters", 300, 1, 100'000));
  hc.opt.seed = cfg.seed;
  p.finish();
  if (hc.per_sample && k_max > 1) p.fail("per_sample", "the per-sample variant is single-step only (k_max = 1)");
  Plan plan;
  plan.run = [=](std::string& csv) {
    const auto seq = hopf_lax_sequence(v, t, k_max, x, hc);
    json rows = json::array();
    csv = csv_line({"k", "value", "mc_error", "converged"});
    for (const auto& [k, r] : seq) {
      rows.push_back({{"k", k},
                      {"value", json_number(r.value)},
                      {"mc_error", json_number(r.mc_error)},
                      {"converged", r.converged},
                      {"witness_norm", json_number(hs_norm(r.witness))}});
      csv += csv_line({fmt(std::int64_t{k}), fmt(r.value), fmt(r.mc_error), r.converged ? "1" : "0"});
    }
    return json{{"t", t},
                {"n", x.n()},
                {"v_at_x", json_number(v.value(x))},
                {"variant", hc.per_sample ? "per_sample" : "expectation"},
                {"sequence", rows}};
  };
  plan.smoke = [=](Diagnostics& d) {
    const double val = v.value(x);
    if (!std::isfinite(val)) d.errors.push_back("potential is not finite at x");
  };
  return plan;
}

Plan plan_wasserstein(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  OptConfig oc;
  oc.seed = cfg.seed;
  Plan plan;
  if (p.has("x") || p.has("y")) {
    const auto x = read_tuple(p.raw("x"), cfg, "params.x");
    const auto y = read_tuple(p.raw("y"), cfg, "params.y");
    oc.starts = static_cast<int>(p.integer("starts", 8, 1, 64));
    p.finish();
    if (x.d() != 1 || y.d() != 1) p.fail("x", "wasserstein expects single matrices (d = 1)");
    if (x.n() != y.n()) p.fail("y", "x and y must have the same size");
    if (!is_self_adjoint(x[0]) || !is_self_adjoint(y[0])) p.fail("x", "matrices must be self-adjoint");
    plan.run = [=](std::string& csv) {
      const double wm = wasserstein_matrix(x[0], y[0], oc);
      const double ws = wasserstein_spectral(SpectralMeasure::of_matrix(x[0]), SpectralMeasure::of_matrix(y[0]));
      csv = csv_line({"quantity", "value"}) + csv_line({"matrix", fmt(wm)}) + csv_line({"spectral", fmt(ws)});
      return json{{"matrix", json_number(wm)}, {"spectral", json_number(ws)}, {"gap", json_number(std::abs(wm - ws))}};
    };
  } else {
    const auto mu = read_law(p.raw("mu"), cfg, "params.mu");
    const auto nu = read_law(p.raw("nu"), cfg, "params.nu");
    p.finish();
    if (mu.kind != LawSpec::Kind::Atoms || nu.kind != LawSpec::Kind::Atoms) {
      p.fail("mu", "spectral distances need atomic measures");
    }
    plan.run = [=](std::string& csv) {
      const double ws = wasserstein_spectral(mu.atoms, nu.atoms);
      csv = csv_line({"quantity", "value"}) + csv_line({"spectral", fmt(ws)});
      return json{{"spectral", json_number(ws)}};
    };
  }
  plan.smoke = [](Diagnostics&) {};
  return plan;
}

Plan plan_specht(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  MatrixTuple x, y;
  if (p.has("fixture")) {
    const json f = resolve(p.raw("fixture"), cfg, "params.fixture");
    x = read_tuple(f.at("x"), cfg, "params.fixture.x");
    y = read_tuple(f.at("y"), cfg, "params.fixture.y");
  } else {
    x = read_tuple(p.raw("x"), cfg, "params.x");
    y = read_tuple(p.raw("y"), cfg, "params.y");
  }
  if (x.n() != y.n() || x.d() != y.d()) p.fail("y", "x and y must have the same shape");
  const int max_len = static_cast<int>(p.integer("max_len", std::int64_t{x.n()} * x.n(), 1, 64));
  const auto cap = p.integer("word_cap", kSpechtWordCap, 1, 1'000'000'000);
  p.finish();
  Plan plan;
  plan.run = [=](std::string& csv) {
    const auto r = specht_equivalent(x, y, max_len, cap);
    csv = csv_line({"verdict", "checked_len", "sufficiency_bound", "mismatch_len", "max_deviation", "words_checked"}) +
          csv_line({to_string(r.verdict), fmt(std::int64_t{r.checked_len}), fmt(std::int64_t{r.sufficiency_bound}),
                    fmt(std::int64_t{r.mismatch_len}), fmt(r.max_deviation), fmt(r.words_checked)});
    return json{{"verdict", to_string(r.verdict)},
                {"checked_len", r.checked_len},
                {"sufficiency_bound", r.sufficiency_bound},
                {"mismatch_len", r.mismatch_len},
                {"max_deviation", json_number(r.max_deviation)},
                {"words_checked", r.words_checked},
                {"capped", r.capped}};
  };
  plan.smoke = [](Diagnostics&) {};
  return plan;
}

Plan plan_independent_join(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const auto s1 = read_spec(p, "spec1", cfg);
  const auto s2 = read_spec(p, "spec2", cfg);
  std::vector<Constraint> cross;
  if (const json* c = p.optional("cross")) cross = read_constraints(*c, "params.cross");
  McmcConfig mc;
  mc.seed = cfg.seed;
  mc.n = static_cast<int>(p.integer("n", 8, 1, 64));
  mc.burn_in = p.integer("burn_in", 2000, 0);
  mc.samples = p.integer("samples", 20'000, 100);
  mc.thin = static_cast<int>(p.integer("thin", 1, 1));
  mc.initial_step = p.positive("initial_step", 0.05);
  mc.init_tries = static_cast<int>(p.integer("init_tries", 100'000, 1));
  const json* add = p.optional("additivity");
  p.finish();
  const auto joint = wrap("params.cross", [&] { return join_specs(s1, s2, cross); });
  std::optional<std::vector<int>> add_n;
  SamplingConfig add_cfg;
  if (add) {
    Params ap(*add, "params.additivity");
    add_n = read_n_list(ap, "n");
    add_cfg = read_sampling(ap, cfg.seed);
    ap.finish();
  }
  Plan plan;
  plan.run = [=](std::string& csv) {
    JoinRatio r;
    try {
      r = independent_join_ratio(s1, s2, joint, mc);
    } catch (const ChainFailure& e) {
      throw NumericalFailure(e.what());
    }
    json out{{"ratio", json_number(r.ratio)},
             {"ci", json_number(r.ci)},
             {"acceptance", {json_number(r.acceptance[0]), json_number(r.acceptance[1])}},
             {"ess", json_number(r.ess)},
             {"samples", r.samples},
             {"n", mc.n}};
    csv = csv_line({"n", "ratio", "ci", "ess"}) + csv_line({fmt(std::int64_t{mc.n}), fmt(r.ratio), fmt(r.ci), fmt(r.ess)});
    if (add_n) {
      json rows = json::array();
      for (const auto& a : entropy_additivity_experiment(s1, s2, cross, *add_n, add_cfg)) {
        rows.push_back({{"n", a.n},
                        {"h1", json_number(a.first.h)},
                        {"h2", json_number(a.second.h)},
                        {"h_joint", json_number(a.h_joint)},
                        {"ratio", json_number(a.ratio)},
                        {"ratio_ci", json_number(a.ratio_ci)},
                        {"deficit", json_number(a.deficit)},
                        {"pairs", a.pairs}});
      }
      out["additivity"] = rows;
    }
    return out;
  };
  plan.smoke = [=](Diagnostics& d) {
    d.notes.push_back("smoke test: spec1 " + std::to_string(smoke_hits(s1, mc.n, cfg.seed)) + "/100, spec2 " +
                      std::to_string(smoke_hits(s2, mc.n, cfg.seed)) + "/100 proposal draws inside at n = " +
                      std::to_string(mc.n));
  };
  return plan;
}

Plan plan_example_5_3(const ExperimentConfig& cfg) {
  Params p(cfg.params, "params");
  const json f = resolve(p.raw("fixture"), cfg, "params.fixture");
  const auto fixture = wrap("params.fixture", [&] { return orbit_fixture_from_json(f); });
  Example53Config ec;
  ec.seed = cfg.seed;
  ec.trials = static_cast<int>(p.integer("trials", 20, 1, 10'000));
  ec.moment_len = static_cast<int>(p.integer("moment_len", 4, 1, kMaxLenCap));
  ec.psi.starts = static_cast<int>(p.integer("starts", 8, 1, 64));
  ec.psi.seed = cfg.seed;
  p.finish();
  Plan plan;
  plan.run = [=](std::string& csv) {
    Example53Report r;
    try {
      r = example_5_3_runner(fixture, ec);
    } catch (const FixtureError& e) {
      throw ValidationError(std::string("params.fixture: ") + e.what());
    }
    json same = json::array(), other = json::array();
    csv = csv_line({"trial", "psi_same", "psi_other"});
    for (std::size_t t = 0; t < r.psi_same.size(); ++t) {
      same.push_back(json_number(r.psi_same[t]));
      other.push_back(json_number(r.psi_other[t]));
      csv += csv_line({fmt(static_cast<std::int64_t>(t)), fmt(r.psi_same[t]), fmt(r.psi_other[t])});
    }
    return json{{"psi_fixture", json_number(r.psi_fixture)},
                {"psi_same", same},
                {"psi_other", other},
                {"mean_same", json_number(r.mean_same)},
                {"mean_other", json_number(r.mean_other)},
                {"matched_degree", fixture.matched_degree},
                {"matched_deviation", json_number(r.matched_deviation)},
                {"moments_x", moments_json(r.moments_x)},
                {"moments_y", moments_json(r.moments_y)}};
  };
  plan.smoke = [](Diagnostics&) {};
  return plan;
}

Plan make_plan(const ExperimentConfig& cfg) {
  if (cfg.kind == "entropy") return plan_entropy(cfg);
  if (cfg.kind == "freeness") return plan_freeness(cfg);
  if (cfg.kind == "convolve") return plan_convolve(cfg);
  if (cfg.kind == "gibbs") return plan_gibbs(cfg);
  if (cfg.kind == "hopf-lax") return plan_hopf_lax(cfg);
  if (cfg.kind == "wasserstein") return plan_wasserstein(cfg);
  if (cfg.kind == "specht") return plan_specht(cfg);
  if (cfg.kind == "independent-join") return plan_independent_join(cfg);
  if (cfg.kind == "example-5-3") return plan_example_5_3(cfg);
  throw ValidationError("kind: unknown experiment '" + cfg.kind + "'");
}

}  // namespace

std::vector<int> parse_n_list(const json& j) {
  std::vector<int> out;
  auto check = [](long long v) {
    if (v < 1 || v > 1'000'000) throw std::invalid_argument("n values must be positive");
    return static_cast<int>(v);
  };
  if (j.is_number_integer()) return {check(j.get<long long>())};
  if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_number_integer()) throw std::invalid_argument("n list entries must be integers");
      out.push_back(check(e.get<long long>()));
    }
    if (out.empty()) throw std::invalid_argument("n list is empty");
    return out;
  }
  if (!j.is_string()) throw std::invalid_argument("n must be an integer, a list or \"lo..hi[:step]\"");
  const auto s = j.get<std::string>();
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) return {check(std::stoll(s))};
    const auto colon = s.find(':', dots);
    const long long lo = std::stoll(s.substr(0, dots));
    const long long hi = std::stoll(s.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2));
    const long long step = colon == std::string::npos ? 1 : std::stoll(s.substr(colon + 1));
    if (step < 1 || hi < lo) throw std::invalid_argument("");
    for (long long v = lo; v <= hi; v += step) out.push_back(check(v));
  } catch (const std::logic_error&) {
    throw std::invalid_argument("cannot read n range '" + s + "'");
  }
  return out;
}

ExperimentConfig config_from_json(const json& j, const std::string& kind_override, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  Params p(j, "config");
  if (const json* k = p.optional("kind")) {
    if (!k->is_string()) p.fail("kind", "expected a string");
    cfg.kind = k->get<std::string>();
  }
  if (!kind_override.empty()) {
    if (!cfg.kind.empty() && cfg.kind != kind_override) {
      throw ValidationError("config.kind: file declares '" + cfg.kind + "' but the command asks for '" + kind_override + "'");
    }
    cfg.kind = kind_override;
  }
  if (cfg.kind.empty()) throw ValidationError("config.kind: is required");
  bool known = false;
  for (const auto& k : experiment_kinds()) known = known || k == cfg.kind;
  if (!known) throw ValidationError("config.kind: unknown experiment '" + cfg.kind + "'");
  if (const json* params = p.optional("params")) cfg.params = *params;
  cfg.seed = static_cast<std::uint64_t>(p.integer("seed", 0, 0));
  if (const json* out = p.optional("output_path")) {
    if (!out->is_string()) p.fail("output_path", "expected a string");
    cfg.output_path = out->get<std::string>();
  }
  p.finish();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  return {{"kind", cfg.kind}, {"params", cfg.params}, {"seed", cfg.seed}};
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Report run_experiment(const ExperimentConfig& cfg) {
  const Plan plan = make_plan(cfg);
  Report rep;
  json results;
  try {
    results = plan.run(rep.csv);
  } catch (const ValidationError&) {
    throw;
  } catch (const NumericalFailure&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  } catch (const std::exception& e) {
    throw NumericalFailure(e.what());
  }
  rep.json = {{"mslab_version", version()},
              {"kind", cfg.kind},
              {"seed", cfg.seed},
              {"config_hash", config_hash(cfg)},
              {"config", to_json(cfg)},
              {"results", results}};
  return rep;
}

Diagnostics validate_experiment(const ExperimentConfig& cfg) {
  Diagnostics d;
  try {
    const Plan plan = make_plan(cfg);
    plan.smoke(d);
  } catch (const std::exception& e) {
    d.errors.push_back(e.what());
  }
  return d;
}

}  // namespace mslab
