#include "mslab/microstates.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

namespace mslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SpecKind parse_kind(const std::string& s) {
  if (s == "quantifier_free") return SpecKind::QuantifierFree;
  if (s == "full") return SpecKind::Full;
  if (s == "existential") return SpecKind::Existential;
  throw SpecError("unknown spec kind '" + s + "'");
}

Field parse_field(const std::string& s) {
  if (s == "complex") return Field::Complex;
  if (s == "self_adjoint") return Field::SelfAdjoint;
  throw SpecError("unknown field '" + s + "'");
}

int field_factor(Field field) { return field == Field::Complex ? 2 : 1; }

bool within_domain(const MatrixTuple& y, double r) {
  for (const auto& m : y) {
    if (operator_norm(m) > r * (1.0 + 1e-12)) return false;
  }
  return true;
}

// Membership of a tuple carrying every spec variable (free + existential).
Membership check_constraints(const MatrixTuple& y, const NeighborhoodSpec& spec, const FormulaConfig& cfg) {
  bool boundary = false;
  for (const auto& c : spec.constraints) {
    const auto ev = eval_formula(*c.phi, y, cfg);
    const double gap = c.tol - std::abs(ev.value - c.target);
    if (!(gap > 0.0)) return Membership::Out;
    if (!is_quantifier_free(*c.phi) && (ev.diagnostics.budget_exhausted || gap < kBoundaryBand)) boundary = true;
  }
  return boundary ? Membership::Boundary : Membership::In;
}

}  // namespace

std::string to_string(SpecKind kind) {
  switch (kind) {
    case SpecKind::QuantifierFree:
      return "quantifier_free";
    case SpecKind::Full:
      return "full";
    case SpecKind::Existential:
      return "existential";
  }
  return "?";
}

void NeighborhoodSpec::validate() const {
  if (d < 1) throw SpecError("spec: d must be >= 1");
  if (!(r > 0.0) || !std::isfinite(r)) throw SpecError("spec: r must be positive and finite");
  if (existential_vars < 0) throw SpecError("spec: existential_vars must be >= 0");
  if (existential_vars > 0 && kind != SpecKind::Existential) {
    throw SpecError("spec: existential_vars requires kind 'existential'");
  }
  if (constraints.empty()) throw SpecError("spec: constraint list is empty");
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const auto& c = constraints[k];
    const std::string where = "constraint " + std::to_string(k) + ": ";
    if (!c.phi) throw SpecError(where + "missing formula");
    if (!(c.tol > 0.0) || !std::isfinite(c.tol)) throw SpecError(where + "tol must be positive");
    if (!std::isfinite(c.target)) throw SpecError(where + "target must be finite");
    try {
      validate_formula(*c.phi);
    } catch (const FormulaError& e) {
      throw SpecError(where + e.what());
    }
    const int top = max_free_index(*c.phi);
    if (top > total_vars()) {
      throw SpecError(where + "formula uses variable x" + std::to_string(top) + " but the spec has " +
                      std::to_string(total_vars()) + " variable(s)");
    }
    if (kind == SpecKind::QuantifierFree && !is_quantifier_free(*c.phi)) {
      throw SpecError(where + "quantifier in a quantifier_free spec");
    }
  }
}

NeighborhoodSpec spec_from_json(const nlohmann::json& j) {
  NeighborhoodSpec spec;
  try {
    spec.d = j.at("d").get<int>();
    spec.r = j.at("r").get<double>();
    spec.kind = parse_kind(j.value("kind", std::string("quantifier_free")));
    spec.field = parse_field(j.value("field", std::string("complex")));
    spec.existential_vars = j.value("existential_vars", 0);
    const auto& list = j.at("constraints");
    if (!list.is_array()) throw SpecError("spec: constraints must be an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const auto& cj = list[k];
      Constraint c;
      const std::string text = cj.at("formula").get<std::string>();
      try {
        c.phi = parse_formula(text);
      } catch (const ParseError& e) {
        throw SpecError("constraint " + std::to_string(k) + ": " + e.what());
      }
      c.target = cj.at("target").get<double>();
      c.tol = cj.at("tol").get<double>();
      spec.constraints.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const NeighborhoodSpec& spec) {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : spec.constraints) {
    cs.push_back({{"formula", to_string(*c.phi)}, {"target", c.target}, {"tol", c.tol}});
  }
  return {{"d", spec.d},
          {"r", spec.r},
          {"kind", to_string(spec.kind)},
          {"field", spec.field == Field::Complex ? "complex" : "self_adjoint"},
          {"existential_vars", spec.existential_vars},
          {"constraints", cs}};
}

NeighborhoodSpec join_specs(const NeighborhoodSpec& a, const NeighborhoodSpec& b, const std::vector<Constraint>& cross) {
  if (a.field != b.field) throw SpecError("join_specs: both factors must use the same field");
  if (a.existential_vars != 0 || b.existential_vars != 0) throw SpecError("join_specs: existential factors unsupported");
  if (a.r != b.r) throw SpecError("join_specs: factors must share the ambient radius");
  NeighborhoodSpec out;
  out.d = a.d + b.d;
  out.r = a.r;
  out.field = a.field;
  out.kind = (a.kind == SpecKind::QuantifierFree && b.kind == SpecKind::QuantifierFree) ? SpecKind::QuantifierFree
                                                                                          : SpecKind::Full;
  out.constraints = a.constraints;
  for (const auto& c : b.constraints) out.constraints.push_back({shift_free_vars(c.phi, a.d), c.target, c.tol});
  for (const auto& c : cross) {
    if (!is_quantifier_free(*c.phi)) out.kind = SpecKind::Full;
    out.constraints.push_back(c);
  }
  out.validate();
  return out;
}

Membership is_microstate(const MatrixTuple& y, const NeighborhoodSpec& spec, const FormulaConfig& cfg) {
  if (y.d() != spec.d) {
    throw std::invalid_argument("is_microstate: tuple has " + std::to_string(y.d()) + " matrices, spec expects " +
                                std::to_string(spec.d));
  }
  if (!within_domain(y, spec.r)) return Membership::Out;
  if (spec.kind == SpecKind::Existential && spec.existential_vars > 0) {
    return existential_membership(y, spec, cfg).verdict;
  }
  return check_constraints(y, spec, cfg);
}

ExistentialResult existential_membership(const MatrixTuple& x, const NeighborhoodSpec& spec, const FormulaConfig& cfg) {
  ExistentialResult res;
  if (x.d() != spec.d) throw std::invalid_argument("existential_membership: tuple size does not match spec.d");
  const int m = spec.existential_vars;
  if (!within_domain(x, spec.r)) {
    res.heuristic = false;
    return res;
  }
  if (m == 0) {
    res.verdict = check_constraints(x, spec, cfg);
    res.heuristic = false;
    return res;
  }
  const int n = x.n();
  const int d = spec.d;
  TupleObjective objective = [&](const MatrixTuple& y, MatrixTuple* grad) {
    const MatrixTuple full = x.concat(y);
    double total = 0.0;
    if (grad) *grad = MatrixTuple::zeros(n, m);
    for (const auto& c : spec.constraints) {
      const bool need_grad = grad != nullptr;
      double value = 0.0;
      MatrixTuple g;
      if (need_grad) {
        auto gr = cyclic_gradient(*c.phi, full, cfg, true);
        value = gr.value;
        g = gr.gradient.slice(d, m);
      } else {
        value = eval_formula(*c.phi, full, cfg).value;
      }
      const double excess = std::abs(value - c.target) - 0.5 * c.tol;
      if (excess <= 0.0) continue;
      total += excess * excess;
      if (need_grad) {
        const double sign = value >= c.target ? 1.0 : -1.0;
        *grad += (2.0 * excess * sign) * g;
      }
    }
    return total;
  };
  const auto opt = minimize_over_ball(objective, spec.r, n, m, cfg.opt);
  res.residual = opt.value;
  const MatrixTuple full = x.concat(opt.witness);
  if (!within_domain(opt.witness, spec.r)) return res;
  res.verdict = check_constraints(full, spec, cfg);
  if (res.verdict != Membership::Out) res.witness = opt.witness;
  res.heuristic = res.verdict == Membership::Out;
  return res;
}

void SamplingConfig::validate() const {
  if (samples < 1000 || samples > kMaxSamples) {
    throw std::invalid_argument("SamplingConfig: samples must be in [1000, " + std::to_string(kMaxSamples) + "]");
  }
  if (!(proposal_scale > 0.0)) throw std::invalid_argument("SamplingConfig: proposal_scale must be positive");
  if (max_n < 1) throw std::invalid_argument("SamplingConfig: max_n must be positive");
}

MatrixTuple draw_proposal(int n, int d, Field field, const SamplingConfig& cfg, std::int64_t i, double* log_weight) {
  RngStream rng = RngStream(cfg.seed, cfg.stream).child(static_cast<std::uint64_t>(n)).child(static_cast<std::uint64_t>(i));
  const int per = real_dimension(n, field);
  const double sigma2 = cfg.proposal_scale * cfg.proposal_scale / (field_factor(field) * static_cast<double>(n) * n);
  const double sigma = std::sqrt(sigma2);
  std::vector<Matrix> mats;
  mats.reserve(static_cast<std::size_t>(d));
  double sq = 0.0;
  Eigen::VectorXd c(per);
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < per; ++k) c(k) = sigma * rng.normal();
    sq += c.squaredNorm();
    mats.push_back(from_coordinates(c, n, field));
  }
  if (log_weight) {
    const double dim = static_cast<double>(per) * d;
    *log_weight = 0.5 * dim * std::log(2.0 * std::numbers::pi * sigma2) + sq / (2.0 * sigma2);
  }
  return MatrixTuple(std::move(mats));
}

SharedSamples sample_specs(const std::vector<NeighborhoodSpec>& specs, int n, const SamplingConfig& cfg) {
  cfg.validate();
  if (specs.empty()) throw std::invalid_argument("sample_specs: no specs");
  if (n < 1 || n > cfg.max_n) throw std::invalid_argument("sample_specs: n outside [1, max_n]");
  const int d = specs.front().d;
  const Field field = specs.front().field;
  for (const auto& s : specs) {
    s.validate();
    if (s.d != d || s.field != field) throw std::invalid_argument("sample_specs: specs must share d and field");
  }
  SharedSamples out;
  out.n = n;
  out.d = d;
  out.field = field;
  const auto total = cfg.samples;
  out.log_weight.assign(static_cast<std::size_t>(total), 0.0);
  std::vector<std::vector<std::uint8_t>> codes(specs.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(total), 0));

  std::exception_ptr failure;
  auto body = [&](std::int64_t i) {
    try {
      double lw = 0.0;
      const MatrixTuple y = draw_proposal(n, d, field, cfg, i, &lw);
      out.log_weight[static_cast<std::size_t>(i)] = lw;
      for (std::size_t s = 0; s < specs.size(); ++s) {
        const Membership m = is_microstate(y, specs[s], cfg.formula);
        codes[s][static_cast<std::size_t>(i)] = m == Membership::In ? 1 : (m == Membership::Boundary ? 2 : 0);
      }
    } catch (...) {
#pragma omp critical(mslab_sample_failure)
      if (!failure) failure = std::current_exception();
    }
  };
  if (cfg.execution == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 256)
    for (std::int64_t i = 0; i < total; ++i) body(i);
  } else {
    for (std::int64_t i = 0; i < total; ++i) body(i);
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& c : codes) {
    std::int64_t boundary = 0;
    std::vector<std::uint8_t> mask(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      mask[i] = c[i] == 1 ? 1 : 0;
      boundary += c[i] == 2 ? 1 : 0;
    }
    out.masks.push_back(std::move(mask));
    out.boundary_counts.push_back(boundary);
  }
  return out;
}

double entropy_offset(int n, int d, Field field) { return field_factor(field) * d * std::log(static_cast<double>(n)); }

VolumeEstimate estimate_from_mask(const std::vector<double>& log_weight, const std::vector<std::uint8_t>& mask, int n,
                                  int d, Field field) {
  if (log_weight.size() != mask.size()) throw std::invalid_argument("estimate_from_mask: size mismatch");
  VolumeEstimate est;
  est.n = n;
  est.samples = static_cast<std::int64_t>(mask.size());
  double top = -kInf;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      ++est.hits;
      top = std::max(top, log_weight[i]);
    }
  }
  const double n2 = static_cast<double>(n) * n;
  if (est.hits == 0) {
    est.log_volume = -kInf;
    est.h = -kInf;
    return est;
  }
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double y = std::exp(log_weight[i] - top);
    s1 += y;
    s2 += y * y;
  }
  const double count = static_cast<double>(est.samples);
  const double mean = s1 / count;
  const double var = std::max(0.0, s2 / count - mean * mean);
  const double rel_se = std::sqrt(var / count) / mean;
  est.log_volume = top + std::log(mean);
  est.ci = 1.96 * rel_se;
  est.h = est.log_volume / n2 + entropy_offset(n, d, field);
  est.h_ci = est.ci / n2;
  return est;
}

VolumeEstimate estimate_volume(const NeighborhoodSpec& spec, int n, const SamplingConfig& cfg) {
  const auto shared = sample_specs({spec}, n, cfg);
  auto est = estimate_from_mask(shared.log_weight, shared.masks[0], n, spec.d, spec.field);
  est.boundary = shared.boundary_counts[0];
  return est;
}

double log_ball_volume(int dim, double r) {
  const double k = dim;
  return 0.5 * k * std::log(std::numbers::pi) + k * std::log(r) - std::lgamma(0.5 * k + 1.0);
}

Trend fit_trend(const std::vector<VolumeEstimate>& per_n) {
  Trend t;
  if (per_n.empty()) return t;
  t.value_at_largest_n = per_n.back().h;
  std::vector<std::pair<double, double>> pts;
  for (const auto& e : per_n) {
    if (std::isfinite(e.h)) pts.emplace_back(1.0 / (static_cast<double>(e.n) * e.n), e.h);
  }
  if (pts.size() < 2) return t;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(pts.size());
  const double denom = k * sxx - sx * sx;
  if (denom == 0.0) return t;
  t.slope = (k * sxy - sx * sy) / denom;
  t.intercept = (sy - *t.slope * sx) / k;
  return t;
}

EntropyEstimate estimate_entropy(const NeighborhoodSpec& spec, const std::vector<int>& n_list, const SamplingConfig& cfg) {
  if (n_list.empty()) throw std::invalid_argument("estimate_entropy: empty n list");
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    if (n_list[k] < 1 || n_list[k] > cfg.max_n) {
      throw std::invalid_argument("estimate_entropy: n = " + std::to_string(n_list[k]) + " outside [1, " +
                                  std::to_string(cfg.max_n) + "]");
    }
    if (k > 0 && n_list[k] <= n_list[k - 1]) throw std::invalid_argument("estimate_entropy: n list must ascend");
  }
  EntropyEstimate out;
  for (int n : n_list) out.per_n.push_back(estimate_volume(spec, n, cfg));
  out.trend = fit_trend(out.per_n);
  return out;
}

double covering_upper_bound(int d, double r, double eps, double c) {
  if (d < 1) throw std::invalid_argument("covering_upper_bound: d must be >= 1");
  if (!(r > 0.0)) throw std::invalid_argument("covering_upper_bound: r must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("covering_upper_bound: eps must be in (0, 1)");
  if (!(c > 0.0)) throw std::invalid_argument("covering_upper_bound: C must be positive");
  const double dd = d;
  return std::log(c) + dd * std::log(std::numbers::pi) - dd * (std::log(dd) - 1.0) +
         2.0 * dd * std::log(2.0 * std::sqrt(dd) * r + 1.0) + (2.0 * dd - 1.0) * std::log(eps);
}

// Independent joins ---------------------------------------------------------

void McmcConfig::validate() const {
  if (n < 1) throw std::invalid_argument("McmcConfig: n must be positive");
  if (burn_in < 0 || samples < 1 || thin < 1) throw std::invalid_argument("McmcConfig: bad chain lengths");
  if (!(initial_step > 0.0)) throw std::invalid_argument("McmcConfig: initial_step must be positive");
  if (init_tries < 1) throw std::invalid_argument("McmcConfig: init_tries must be positive");
}

namespace {

struct Chain {
  std::vector<Eigen::VectorXd> states;  // concatenated coordinates, one per kept step
  double acceptance = 0.0;
};

MatrixTuple tuple_from(const Eigen::VectorXd& c, int n, int d, Field field) {
  const int per = real_dimension(n, field);
  std::vector<Matrix> mats;
  for (int j = 0; j < d; ++j) mats.push_back(from_coordinates(c.segment(j * per, per), n, field));
  return MatrixTuple(std::move(mats));
}

Chain run_chain(const NeighborhoodSpec& spec, const McmcConfig& cfg, std::uint64_t stream, int which) {
  const int n = cfg.n;
  const int per = real_dimension(n, spec.field);
  SamplingConfig init;
  init.seed = cfg.seed;
  init.stream = stream;
  init.proposal_scale = cfg.proposal_scale;
  init.max_n = std::max(n, kDefaultMaxN);
  Eigen::VectorXd state;
  for (int t = 0; t < cfg.init_tries && state.size() == 0; ++t) {
    const MatrixTuple y = draw_proposal(n, spec.d, spec.field, init, t, nullptr);
    if (is_microstate(y, spec, cfg.formula) == Membership::In) {
      state.resize(per * spec.d);
      for (int j = 0; j < spec.d; ++j) state.segment(j * per, per) = to_coordinates(y[j], spec.field);
    }
  }
  if (state.size() == 0) {
    throw ChainFailure("independent_join_ratio: chain " + std::to_string(which) + " found no feasible start in " +
                       std::to_string(cfg.init_tries) + " draws");
  }
  RngStream rng = RngStream(cfg.seed, stream).child(0xC4A1);
  double step = cfg.initial_step / n;
  Chain chain;
  std::int64_t accepted = 0, proposed = 0, window_acc = 0, window = 0;
  const std::int64_t total = cfg.burn_in + cfg.samples * cfg.thin;
  Eigen::VectorXd proposal(state.size());
  for (std::int64_t t = 0; t < total; ++t) {
    for (Eigen::Index k = 0; k < proposal.size(); ++k) proposal(k) = state(k) + step * rng.normal();
    const bool ok = is_microstate(tuple_from(proposal, n, spec.d, spec.field), spec, cfg.formula) == Membership::In;
    if (ok) state = proposal;
    if (t < cfg.burn_in) {
      window_acc += ok ? 1 : 0;
      if (++window == 100) {
        const double rate = static_cast<double>(window_acc) / 100.0;
        if (rate > 0.35) step *= 1.25;
        if (rate < 0.2) step /= 1.25;
        window = window_acc = 0;
      }
    } else {
      accepted += ok ? 1 : 0;
      ++proposed;
      if ((t - cfg.burn_in) % cfg.thin == cfg.thin - 1) chain.states.push_back(state);
    }
  }
  chain.acceptance = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  return chain;
}

}  // namespace

JoinRatio independent_join_ratio(const NeighborhoodSpec& spec1, const NeighborhoodSpec& spec2,
                                 const NeighborhoodSpec& joint, const McmcConfig& cfg) {
  cfg.validate();
  spec1.validate();
  spec2.validate();
  joint.validate();
  if (joint.d != spec1.d + spec2.d) throw std::invalid_argument("independent_join_ratio: joint.d must be d1 + d2");
  if (spec1.field != spec2.field || joint.field != spec1.field) {
    throw std::invalid_argument("independent_join_ratio: specs must share the field");
  }
  Chain chains[2];
  std::exception_ptr failure[2];
#pragma omp parallel for schedule(static, 1)
  for (int k = 0; k < 2; ++k) {
    try {
      chains[k] = run_chain(k == 0 ? spec1 : spec2, cfg, 0x10 + static_cast<std::uint64_t>(k), k + 1);
    } catch (...) {
      failure[k] = std::current_exception();
    }
  }
  for (auto& f : failure) {
    if (f) std::rethrow_exception(f);
  }
  const auto count = static_cast<std::int64_t>(chains[0].states.size());
  std::vector<std::uint8_t> joint_hit(static_cast<std::size_t>(count), 0);
  std::exception_ptr scoring_failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t t = 0; t < count; ++t) {
    try {
      const auto a = tuple_from(chains[0].states[static_cast<std::size_t>(t)], cfg.n, spec1.d, spec1.field);
      const auto b = tuple_from(chains[1].states[static_cast<std::size_t>(t)], cfg.n, spec2.d, spec2.field);
      joint_hit[static_cast<std::size_t>(t)] = is_microstate(a.concat(b), joint, cfg.formula) == Membership::In;
    } catch (...) {
#pragma omp critical(mslab_join_failure)
      if (!scoring_failure) scoring_failure = std::current_exception();
    }
  }
  if (scoring_failure) std::rethrow_exception(scoring_failure);

  JoinRatio out;
  out.samples = count;
  out.acceptance[0] = chains[0].acceptance;
  out.acceptance[1] = chains[1].acceptance;
  double hits = 0.0;
  for (auto h : joint_hit) hits += h;
  out.ratio = hits / static_cast<double>(count);
  // Batch means for the Monte Carlo error of a correlated indicator sequence.
  const std::int64_t batches = std::max<std::int64_t>(1, std::min<std::int64_t>(50, count / 20));
  const std::int64_t size = count / batches;
  double var_b = 0.0;
  for (std::int64_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::int64_t t = b * size; t < (b + 1) * size; ++t) s += joint_hit[static_cast<std::size_t>(t)];
    const double m = s / static_cast<double>(size) - out.ratio;
    var_b += m * m;
  }
  var_b = batches > 1 ? var_b / static_cast<double>(batches - 1) : 0.0;
  const double se2 = var_b / static_cast<double>(batches);
  out.ci = 1.96 * std::sqrt(se2);
  const double p = out.ratio;
  out.ess = se2 > 0.0 ? std::min(static_cast<double>(count), p * (1.0 - p) / se2) : static_cast<double>(count);
  return out;
}

}  // namespace mslab
