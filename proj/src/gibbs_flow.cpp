#include "mslab/gibbs_flow.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include <omp.h>

#include "mslab/optimize.hpp"

namespace mslab {

namespace {

constexpr std::uint64_t kChainStreamBase = 0x600;
constexpr std::uint64_t kBoundStream = 0x680;
constexpr std::uint64_t kGradientStream = 0x690;
constexpr std::uint64_t kHopfLaxStream = 0x700;
constexpr int kBatches = 10;

double field_factor(Field field) { return field == Field::Complex ? 2.0 : 1.0; }

Matrix gaussian_matrix(int n, Field field, double variance, RngStream& rng) {
  Eigen::VectorXd c(real_dimension(n, field));
  const double sd = std::sqrt(variance);
  for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = sd * rng.normal();
  return from_coordinates(c, n, field);
}

// Unit-variance Gaussian tuple in the orthonormal coordinates of the field.
MatrixTuple coordinate_noise(int n, int d, Field field, RngStream& rng) {
  std::vector<Matrix> mats;
  mats.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) mats.push_back(gaussian_matrix(n, field, 1.0, rng));
  return MatrixTuple(std::move(mats));
}

// Tuple with E||Z||_2^2 = 2td, the Brownian normalization.
MatrixTuple brownian(int n, int d, Field field, double t, RngStream& rng) {
  const double variance = 2.0 * t / (field_factor(field) * n * n);
  std::vector<Matrix> mats;
  for (int j = 0; j < d; ++j) mats.push_back(gaussian_matrix(n, field, variance, rng));
  return MatrixTuple(std::move(mats));
}

MatrixTuple project_tuple(const MatrixTuple& x, Field field) {
  if (field == Field::Complex) return x;
  std::vector<Matrix> mats;
  for (const auto& m : x) mats.push_back(project_to_field(m, field));
  return MatrixTuple(std::move(mats));
}

MatrixTuple random_tuple(int n, int d, Field field, RngStream& rng) {
  if (field == Field::Complex) return sample_ginibre(n, d, rng);
  std::vector<Matrix> mats;
  for (int j = 0; j < d; ++j) mats.push_back(sample_gue(n, rng));
  return MatrixTuple(std::move(mats));
}

double real_inner(const MatrixTuple& a, const MatrixTuple& b) { return hs_inner(a, b).real(); }

}  // namespace

double Potential::value(const MatrixTuple& x) const {
  return eval_formula(*phi, x).value;
}

double Potential::gradient(const MatrixTuple& x, MatrixTuple* grad) const {
  auto g = cyclic_gradient(*phi, x);
  if (grad) *grad = project_tuple(g.gradient, field);
  return g.value;
}

void check_potential(const Potential& v, int n, double radius, std::uint64_t seed) {
  if (!v.phi) throw PotentialError("potential: missing formula");
  if (v.d < 1) throw PotentialError("potential: d must be at least 1");
  try {
    validate_formula(*v.phi);
  } catch (const FormulaError& e) {
    throw PotentialError(std::string("potential: ") + e.what());
  }
  if (!is_quantifier_free(*v.phi)) throw PotentialError("potential: formula must be quantifier-free");
  const int k = max_free_index(*v.phi);
  if (k > v.d) {
    throw PotentialError("potential: formula uses variable x" + std::to_string(k) + " but d = " + std::to_string(v.d));
  }
  const auto& bd = v.bounds;
  if (!std::isfinite(bd.a) || !std::isfinite(bd.b) || !std::isfinite(bd.A) || !std::isfinite(bd.B)) {
    throw PotentialError("potential: bounds must be finite");
  }
  if (!(bd.b > 0.0)) throw PotentialError("potential: lower quadratic coefficient b must be positive");
  if (bd.B < bd.b) throw PotentialError("potential: B must be at least b");

  const RngStream base(seed, kBoundStream);
  for (int s = 0; s < kBoundCheckSamples; ++s) {
    RngStream rng = base.child(static_cast<std::uint64_t>(s));
    MatrixTuple x = random_tuple(n, v.d, v.field, rng);
    const double opn = max_operator_norm(x);
    if (opn > 0.0) x *= radius * rng.uniform() / opn;
    const double val = v.value(x);
    const double q = hs_norm_sq(x);
    const double slack = 1e-9 * (1.0 + std::abs(val));
    if (!std::isfinite(val) || val < bd.a + bd.b * q - slack || val > bd.A + bd.B * q + slack) {
      std::ostringstream os;
      os.precision(6);
      os << "potential: envelope violated at sample " << s << " (V = " << val << ", ||X||^2 = " << q
         << ", allowed [" << bd.a + bd.b * q << ", " << bd.A + bd.B * q << "])";
      throw PotentialError(os.str());
    }
  }
}

double gradient_check(const Potential& v, int n, int directions, std::uint64_t seed) {
  const RngStream base(seed, kGradientStream);
  double worst = 0.0;
  for (int k = 0; k < directions; ++k) {
    RngStream rng = base.child(static_cast<std::uint64_t>(k));
    const MatrixTuple x = random_tuple(n, v.d, v.field, rng);
    const MatrixTuple h = random_tuple(n, v.d, v.field, rng);
    MatrixTuple g;
    v.gradient(x, &g);
    const double analytic = real_inner(g, h);
    const double eps = 1e-5;
    const double fd = (v.value(x + eps * h) - v.value(x - eps * h)) / (2.0 * eps);
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-3 * hs_norm(g) * hs_norm(h), 1e-12});
    worst = std::max(worst, std::abs(fd - analytic) / scale);
  }
  return worst;
}

Potential potential_from_json(const nlohmann::json& j, Field field) {
  Potential v;
  v.field = field;
  try {
    v.phi = parse_formula(j.at("formula").get<std::string>());
    v.d = j.value("d", std::max(1, max_free_index(*v.phi)));
    const auto& b = j.at("bounds");
    v.bounds = {b.at("a").get<double>(), b.at("b").get<double>(), b.at("A").get<double>(), b.at("B").get<double>()};
    if (j.contains("field")) {
      const auto f = j.at("field").get<std::string>();
      if (f == "complex") {
        v.field = Field::Complex;
      } else if (f == "self_adjoint") {
        v.field = Field::SelfAdjoint;
      } else {
        throw PotentialError("potential: unknown field '" + f + "'");
      }
    }
  } catch (const ParseError& e) {
    throw PotentialError(std::string("potential: ") + e.what() + " at position " + std::to_string(e.position));
  } catch (const nlohmann::json::exception& e) {
    throw PotentialError(std::string("potential: ") + e.what());
  }
  check_potential(v);
  return v;
}

double default_step(const Potential& v) { return 0.01 / v.bounds.B; }
double max_step(const Potential& v) { return 1.0 / v.bounds.B; }

void langevin_step(LangevinState& state, const Potential& v, RngStream& rng) {
  const int n = state.x.n();
  const int d = state.x.d();
  MatrixTuple g;
  const double val = v.gradient(state.x, &g);
  if (!std::isfinite(val) || !g.all_finite()) {
    state.step *= 0.5;
    ++state.rejected;
    return;
  }
  const MatrixTuple xi = coordinate_noise(n, d, v.field, rng);
  const double noise = std::sqrt(2.0 * state.step) / n;
  for (int j = 0; j < d; ++j) state.x[j] += -state.step * g[j] + noise * xi[j];
  state.t += state.step;
  const double norm = hs_norm(state.x);
  if (!std::isfinite(norm) || norm > kDivergenceNorm) {
    std::ostringstream os;
    os << "langevin: chain diverged at t = " << state.t << " (||X||_2 = " << norm << ", step = " << state.step
       << ")";
    throw DivergenceError(os.str());
  }
}

void GibbsConfig::validate() const {
  if (n < 1) throw std::invalid_argument("gibbs: n must be positive");
  if (burn_in < 0) throw std::invalid_argument("gibbs: burn_in must be non-negative");
  if (samples < kBatches) throw std::invalid_argument("gibbs: need at least 10 recorded samples");
  if (thin < 1) throw std::invalid_argument("gibbs: thin must be positive");
  if (max_len < 1 || max_len > kMaxLenCap) throw std::invalid_argument("gibbs: max_len out of range");
  if (chains < 1 || chains > 64) throw std::invalid_argument("gibbs: chains must be in [1, 64]");
  if (step < 0.0) throw std::invalid_argument("gibbs: step must be non-negative");
}

GibbsResult sample_gibbs_moments(const Potential& v, const GibbsConfig& cfg) {
  cfg.validate();
  check_potential(v);
  GibbsResult res;
  res.gradient_error = gradient_check(v, std::min(cfg.n, 8));
  if (res.gradient_error > cfg.gradient_tolerance) {
    std::ostringstream os;
    os << "gibbs: gradient check failed (relative error " << res.gradient_error << ")";
    throw PotentialError(os.str());
  }
  res.step = cfg.step > 0.0 ? cfg.step : default_step(v);
  if (res.step > max_step(v)) throw std::invalid_argument("gibbs: step exceeds the stability limit 1/B");

  const std::size_t cells = MomentVector(v.d, cfg.max_len).size();
  const std::int64_t per_batch = cfg.samples / kBatches;
  const std::int64_t used = per_batch * kBatches;
  // batch_sums[c][b][cell], plus the raw m2 trace series per chain.
  std::vector<std::vector<std::vector<double>>> batch_sums(
      static_cast<std::size_t>(cfg.chains),
      std::vector<std::vector<double>>(kBatches, std::vector<double>(cells, 0.0)));
  std::vector<std::vector<Complex>> totals(static_cast<std::size_t>(cfg.chains), std::vector<Complex>(cells));
  std::vector<std::vector<double>> m2_series(static_cast<std::size_t>(cfg.chains));
  std::vector<std::int64_t> rejected(static_cast<std::size_t>(cfg.chains), 0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.chains));

  auto run_chain = [&](int c) {
    const auto cu = static_cast<std::size_t>(c);
    try {
      RngStream rng(cfg.seed, kChainStreamBase + static_cast<std::uint64_t>(c));
      LangevinState st{MatrixTuple::zeros(cfg.n, v.d), res.step, 0.0, 0};
      for (std::int64_t s = 0; s < cfg.burn_in; ++s) langevin_step(st, v, rng);
      m2_series[cu].reserve(static_cast<std::size_t>(used));
      for (std::int64_t s = 0; s < used; ++s) {
        for (int k = 0; k < cfg.thin; ++k) langevin_step(st, v, rng);
        const MomentVector mv = matrix_moments(st.x, cfg.max_len, false);
        auto& bs = batch_sums[cu][static_cast<std::size_t>(s / per_batch)];
        for (std::size_t i = 0; i < cells; ++i) {
          bs[i] += mv[i].real();
          totals[cu][i] += mv[i];
        }
        m2_series[cu].push_back(hs_norm_sq(st.x[0]));
      }
      rejected[cu] = st.rejected;
    } catch (...) {
      errors[cu] = std::current_exception();
    }
  };
  if (cfg.execution == Execution::Parallel && cfg.chains > 1) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cfg.chains; ++c) run_chain(c);
  } else {
    for (int c = 0; c < cfg.chains; ++c) run_chain(c);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const double total_samples = static_cast<double>(used) * cfg.chains;
  const int nb = kBatches * cfg.chains;
  res.moments = MomentVector(v.d, cfg.max_len);
  res.ci.assign(cells, 0.0);
  for (std::size_t i = 0; i < cells; ++i) {
    Complex acc = 0.0;
    for (int c = 0; c < cfg.chains; ++c) acc += totals[static_cast<std::size_t>(c)][i];
    res.moments[i] = acc / total_samples;
    double mean = 0.0, sq = 0.0;
    for (int c = 0; c < cfg.chains; ++c) {
      for (int b = 0; b < kBatches; ++b) {
        const double m = batch_sums[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)][i] / per_batch;
        mean += m;
        sq += m * m;
      }
    }
    mean /= nb;
    const double var = std::max(0.0, (sq / nb - mean * mean) * nb / (nb - 1.0));
    res.ci[i] = 1.96 * std::sqrt(var / nb);
  }
  res.moments[0] = 1.0;
  res.ci[0] = 0.0;

  // Integrated autocorrelation time from batch means versus the pointwise variance.
  double pmean = 0.0, psq = 0.0, bsq = 0.0;
  for (const auto& series : m2_series) {
    for (double x : series) {
      pmean += x;
      psq += x * x;
    }
  }
  pmean /= total_samples;
  const double pvar = psq / total_samples - pmean * pmean;
  for (const auto& series : m2_series) {
    for (int b = 0; b < kBatches; ++b) {
      double m = 0.0;
      for (std::int64_t s = b * per_batch; s < (b + 1) * per_batch; ++s) m += series[static_cast<std::size_t>(s)];
      m /= per_batch;
      bsq += (m - pmean) * (m - pmean);
    }
  }
  const double bvar = bsq / (nb - 1.0);
  res.tau_m2 = pvar > 0.0 ? std::max(1.0, per_batch * bvar / pvar) : 1.0;
  res.recorded = static_cast<std::int64_t>(total_samples);
  for (auto r : rejected) res.rejected += r;
  return res;
}

MomentVector dyson_schwinger_quartic(double g, int max_len) {
  if (!(g >= 0.0) || g > 0.5) throw std::invalid_argument("dyson_schwinger_quartic: g must lie in [0, 0.5]");
  if (max_len < 0 || max_len > kMaxLenCap) throw std::invalid_argument("dyson_schwinger_quartic: max_len out of range");
  double a2 = 1.0;
  bool converged = false;
  for (int it = 0; it < 10000; ++it) {
    const double next = 1.0 / (1.0 + 12.0 * g * a2);
    const double delta = std::abs(next - a2);
    a2 = next;
    if (delta < 1e-14) {
      converged = true;
      break;
    }
  }
  if (!converged || std::abs(12.0 * g * a2 * a2 + a2 - 1.0) > 1e-10) {
    throw std::runtime_error("dyson_schwinger_quartic: fixed-point iteration did not converge");
  }
  std::vector<double> m(static_cast<std::size_t>(max_len) + 1, 0.0);
  auto catalan = [](int k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * 2.0 * (2 * i + 1) / (i + 2);
    return c;
  };
  for (int k = 0; 2 * k <= max_len; ++k) {
    m[static_cast<std::size_t>(2 * k)] = (1.0 + 8.0 * g * a2) * catalan(k) * std::pow(a2, k + 1) +
                                         4.0 * g * catalan(k + 1) * std::pow(a2, k + 2);
  }
  m[0] = 1.0;
  return MomentVector::from_real_moments(m);
}

HopfLaxConfig::HopfLaxConfig() {
  opt.starts = 1;
  opt.max_iters = 300;
}

void HopfLaxConfig::validate() const {
  if (z_samples < 1) throw std::invalid_argument("hopf_lax: z_samples must be positive");
  opt.validate();
}

namespace {

std::vector<std::vector<MatrixTuple>> draw_paths(int n, int d, Field field, double tau, int steps, int samples,
                                                 bool antithetic, std::uint64_t seed) {
  const RngStream base(seed, kHopfLaxStream);
  std::vector<std::vector<MatrixTuple>> z(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    auto& path = z[static_cast<std::size_t>(s)];
    if (antithetic && s % 2 == 1) {
      for (const auto& zz : z[static_cast<std::size_t>(s - 1)]) path.push_back(-1.0 * zz);
      continue;
    }
    RngStream rng = base.child(static_cast<std::uint64_t>(s));
    for (int j = 0; j < steps; ++j) path.push_back(brownian(n, d, field, tau, rng));
  }
  return z;
}

int sample_count(const HopfLaxConfig& cfg) {
  return cfg.antithetic ? 2 * ((cfg.z_samples + 1) / 2) : cfg.z_samples;
}

// Standard error of a mean, pairing antithetic partners first.
double mc_standard_error(const std::vector<double>& vals, bool antithetic) {
  std::vector<double> units;
  if (antithetic) {
    for (std::size_t s = 0; s + 1 < vals.size(); s += 2) units.push_back(0.5 * (vals[s] + vals[s + 1]));
  } else {
    units = vals;
  }
  if (units.size() < 2) return 0.0;
  double mean = 0.0, sq = 0.0;
  for (double u : units) mean += u;
  mean /= static_cast<double>(units.size());
  for (double u : units) sq += (u - mean) * (u - mean);
  return std::sqrt(sq / (units.size() - 1.0) / static_cast<double>(units.size()));
}

double hopf_lax_radius(const MatrixTuple& x) { return 10.0 * max_operator_norm(x) + 10.0; }

}  // namespace

HopfLaxResult hopf_lax_step(const Potential& v, double t, const MatrixTuple& x, const HopfLaxConfig& cfg) {
  cfg.validate();
  if (!(t > 0.0)) throw std::invalid_argument("hopf_lax_step: t must be positive");
  if (x.d() != v.d) throw std::invalid_argument("hopf_lax_step: tuple size does not match the potential");
  const int n = x.n();
  const int d = x.d();
  const int samples = sample_count(cfg);
  const auto paths = draw_paths(n, d, v.field, t, 1, samples, cfg.antithetic, cfg.seed);
  const double radius = hopf_lax_radius(x);

  auto single_objective = [&](const std::vector<int>& which) -> TupleObjective {
    return [&, which](const MatrixTuple& a_raw, MatrixTuple* grad) {
      const MatrixTuple a = project_tuple(a_raw, v.field);
      double f = 0.0;
      MatrixTuple gsum = MatrixTuple::zeros(n, d);
      MatrixTuple g;
      for (int s : which) {
        f += v.gradient(x + a + paths[static_cast<std::size_t>(s)][0], grad ? &g : nullptr);
        if (grad) gsum += g;
      }
      const double inv = 1.0 / static_cast<double>(which.size());
      f = f * inv + hs_norm_sq(a) / (2.0 * t);
      if (grad) *grad = project_tuple(inv * gsum + (1.0 / t) * a, v.field);
      return f;
    };
  };

  HopfLaxResult res;
  std::vector<double> per_sample(static_cast<std::size_t>(samples));
  if (!cfg.per_sample) {
    std::vector<int> all(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) all[static_cast<std::size_t>(s)] = s;
    const auto opt = minimize_over_ball(single_objective(all), radius, n, d, cfg.opt);
    res.value = opt.value;
    res.witness = project_tuple(opt.witness, v.field);
    res.converged = opt.converged;
    for (int s = 0; s < samples; ++s) {
      per_sample[static_cast<std::size_t>(s)] = v.value(x + res.witness + paths[static_cast<std::size_t>(s)][0]);
    }
  } else {
    std::vector<MatrixTuple> witnesses(static_cast<std::size_t>(samples));
    std::vector<int> conv(static_cast<std::size_t>(samples), 0);
    OptConfig inner = cfg.opt;
    inner.execution = Execution::Serial;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(samples));
#pragma omp parallel for schedule(dynamic) if (cfg.opt.execution == Execution::Parallel)
    for (int s = 0; s < samples; ++s) {
      try {
        const auto opt = minimize_over_ball(single_objective({s}), radius, n, d, inner);
        per_sample[static_cast<std::size_t>(s)] = opt.value;
        witnesses[static_cast<std::size_t>(s)] = project_tuple(opt.witness, v.field);
        conv[static_cast<std::size_t>(s)] = opt.converged;
      } catch (...) {
        errors[static_cast<std::size_t>(s)] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    res.witness = MatrixTuple::zeros(n, d);
    res.converged = true;
    for (int s = 0; s < samples; ++s) {
      res.value += per_sample[static_cast<std::size_t>(s)];
      res.witness += witnesses[static_cast<std::size_t>(s)];
      res.converged = res.converged && conv[static_cast<std::size_t>(s)];
    }
    res.value /= samples;
    res.witness *= 1.0 / samples;
  }
  res.mc_error = mc_standard_error(per_sample, cfg.antithetic);
  return res;
}

HopfLaxResult hopf_lax_iterate(const Potential& v, double t, int k, const MatrixTuple& x, const HopfLaxConfig& cfg) {
  if (k < 1) throw std::invalid_argument("hopf_lax_iterate: k must be at least 1");
  if (k == 1) return hopf_lax_step(v, t, x, cfg);
  cfg.validate();
  if (!(t > 0.0)) throw std::invalid_argument("hopf_lax_iterate: t must be positive");
  if (x.d() != v.d) throw std::invalid_argument("hopf_lax_iterate: tuple size does not match the potential");
  if (cfg.per_sample) throw std::invalid_argument("hopf_lax_iterate: the per-sample variant is single-step only");
  const int n = x.n();
  const int d = x.d();
  const double tau = t / k;
  const int samples = sample_count(cfg);
  const auto paths = draw_paths(n, d, v.field, tau, k, samples, cfg.antithetic, cfg.seed);
  const Matrix id = Matrix::Identity(n, n);

  // Slots: B_j^{(i)} at j * d + i, then kappa_j * I at k * d + j.
  auto unpack = [&](const MatrixTuple& z, std::vector<MatrixTuple>& b, std::vector<double>& kappa) {
    b.assign(static_cast<std::size_t>(k), MatrixTuple());
    kappa.assign(static_cast<std::size_t>(k), 0.0);
    for (int j = 0; j < k; ++j) {
      b[static_cast<std::size_t>(j)] = project_tuple(z.slice(j * d, d), v.field);
      kappa[static_cast<std::size_t>(j)] = normalized_trace(z[k * d + j]).real();
    }
  };

  // Path cost and its gradient in (B, kappa) for one noise path.
  auto path_cost = [&](const std::vector<MatrixTuple>& b, const std::vector<double>& kappa,
                       const std::vector<MatrixTuple>& z, std::vector<MatrixTuple>* gb, std::vector<double>* gk) {
    std::vector<MatrixTuple> xs(static_cast<std::size_t>(k) + 1), as(static_cast<std::size_t>(k));
    xs[0] = x;
    double cost = 0.0;
    for (int j = 0; j < k; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      as[ju] = b[ju] - kappa[ju] * xs[ju];
      cost += hs_norm_sq(as[ju]) / (2.0 * tau);
      xs[ju + 1] = xs[ju] + as[ju] + z[ju];
    }
    MatrixTuple lambda;
    cost += v.gradient(xs[static_cast<std::size_t>(k)], gb ? &lambda : nullptr);
    if (!gb) return cost;
    for (int j = k - 1; j >= 0; --j) {
      const auto ju = static_cast<std::size_t>(j);
      const MatrixTuple mu = lambda + (1.0 / tau) * as[ju];
      (*gb)[ju] += mu;
      (*gk)[ju] -= real_inner(mu, xs[ju]);
      lambda = lambda - kappa[ju] * mu;
    }
    return cost;
  };

  const TupleObjective obj = [&](const MatrixTuple& z, MatrixTuple* grad) {
    std::vector<MatrixTuple> b;
    std::vector<double> kappa;
    unpack(z, b, kappa);
    std::vector<MatrixTuple> gb(static_cast<std::size_t>(k), MatrixTuple::zeros(n, d));
    std::vector<double> gk(static_cast<std::size_t>(k), 0.0);
    double f = 0.0;
    for (const auto& path : paths) f += path_cost(b, kappa, path, grad ? &gb : nullptr, grad ? &gk : nullptr);
    const double inv = 1.0 / static_cast<double>(paths.size());
    if (grad) {
      std::vector<Matrix> mats;
      for (int j = 0; j < k; ++j) {
        const MatrixTuple g = project_tuple(inv * gb[static_cast<std::size_t>(j)], v.field);
        for (const auto& m : g) mats.push_back(m);
      }
      for (int j = 0; j < k; ++j) mats.push_back(inv * gk[static_cast<std::size_t>(j)] * id);
      *grad = MatrixTuple(std::move(mats));
    }
    return f * inv;
  };

  const auto opt = minimize_over_ball(obj, hopf_lax_radius(x), n, k * d + k, cfg.opt);
  HopfLaxResult res;
  res.value = opt.value;
  res.converged = opt.converged;
  std::vector<MatrixTuple> b;
  std::vector<double> kappa;
  unpack(opt.witness, b, kappa);
  res.witness = b[0] - kappa[0] * x;
  std::vector<double> per_path;
  per_path.reserve(paths.size());
  for (const auto& path : paths) per_path.push_back(path_cost(b, kappa, path, nullptr, nullptr));
  res.mc_error = mc_standard_error(per_path, cfg.antithetic);
  return res;
}

std::vector<std::pair<int, HopfLaxResult>> hopf_lax_sequence(const Potential& v, double t, int k_max,
                                                             const MatrixTuple& x, const HopfLaxConfig& cfg) {
  if (k_max < 1) throw std::invalid_argument("hopf_lax_sequence: k_max must be at least 1");
  std::vector<std::pair<int, HopfLaxResult>> out;
  for (int k = 1; k <= k_max; k *= 2) out.emplace_back(k, hopf_lax_iterate(v, t, k, x, cfg));
  return out;
}

}  // namespace mslab
