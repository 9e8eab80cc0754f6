#include "mslab/freeness_sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>

#include "mslab/io.hpp"

namespace mslab {

namespace {

constexpr std::uint64_t kFreenessStream = 0x800;
constexpr std::uint64_t kConvolutionStream = 0x900;
constexpr std::uint64_t kExampleStream = 0xA00;
constexpr std::uint64_t kSecondSpecStream = 0x1000;

template <typename Body>
void run_trials(int count, Execution execution, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto guarded = [&](int k) {
    try {
      body(k);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  };
  if (execution == Execution::Parallel && count > 1) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < count; ++k) guarded(k);
  } else {
    for (int k = 0; k < count; ++k) guarded(k);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// U diag(q) U* without a dense diagonal product.
Matrix conjugate_diagonal(const Matrix& u, const Matrix& diag) {
  const Eigen::VectorXcd q = diag.diagonal();
  return (u * q.asDiagonal()) * u.adjoint();
}

Matrix conjugate(const Matrix& u, const Matrix& x) { return u * x * u.adjoint(); }

double max_gap(const WordTable& a, const WordTable& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double catalan(int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * 2.0 * (2 * i + 1) / (i + 2);
  return c;
}

}  // namespace

LawSpec LawSpec::semicircle() { return LawSpec{}; }

LawSpec LawSpec::from_atoms(std::vector<std::pair<double, double>> atoms) {
  LawSpec law;
  law.kind = Kind::Atoms;
  law.atoms = SpectralMeasure::from_atoms(std::move(atoms));
  return law;
}

double semicircle_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("semicircle_quantile: p must lie in [0, 1]");
  auto cdf = [](double x) {
    return 0.5 + x * std::sqrt(std::max(0.0, 4.0 - x * x)) / (4.0 * std::numbers::pi) +
           std::asin(std::clamp(x / 2.0, -1.0, 1.0)) / std::numbers::pi;
  };
  double lo = -2.0, hi = 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> LawSpec::quantiles(int n) const {
  if (kind == Kind::Atoms) return atoms.quantiles(n);
  if (n < 1) throw std::invalid_argument("quantiles: n must be positive");
  std::vector<double> q(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) q[static_cast<std::size_t>(k)] = semicircle_quantile((k + 0.5) / n);
  return q;
}

std::vector<double> LawSpec::moments(int max_k) const {
  std::vector<double> m(static_cast<std::size_t>(max_k) + 1, 0.0);
  for (int k = 0; k <= max_k; ++k) {
    m[static_cast<std::size_t>(k)] = kind == Kind::Atoms ? atoms.moment(k) : (k % 2 ? 0.0 : catalan(k / 2));
  }
  m[0] = 1.0;
  return m;
}

Matrix LawSpec::diagonal(int n) const {
  const auto q = quantiles(n);
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(q.data(), n);
  return v.cast<Complex>().asDiagonal();
}

LawSpec law_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "semicircle") return LawSpec::semicircle();
    throw std::invalid_argument("law: unknown law '" + j.get<std::string>() + "'");
  }
  if (!j.contains("atoms")) throw std::invalid_argument("law: expected \"semicircle\" or {\"atoms\": [[loc, w], ...]}");
  std::vector<std::pair<double, double>> atoms;
  for (const auto& a : j.at("atoms")) {
    if (!a.is_array() || a.size() != 2) throw std::invalid_argument("law: each atom is [location, weight]");
    atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
  }
  return LawSpec::from_atoms(std::move(atoms));
}

nlohmann::json to_json(const LawSpec& law) {
  if (law.kind == LawSpec::Kind::Semicircle) return "semicircle";
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& [loc, w] : law.atoms.atoms) atoms.push_back({loc, w});
  return {{"atoms", atoms}};
}

std::vector<double> power_traces(const Matrix& h, int max_k) {
  if (max_k < 0) throw std::invalid_argument("power_traces: max_k must be non-negative");
  const double inv_n = 1.0 / static_cast<double>(h.rows());
  const int half = (max_k + 1) / 2;
  std::vector<Matrix> p;
  p.reserve(static_cast<std::size_t>(half) + 1);
  p.push_back(Matrix::Identity(h.rows(), h.cols()));
  for (int j = 1; j <= half; ++j) p.push_back(j == 1 ? h : Matrix(p.back() * h));
  std::vector<double> out(static_cast<std::size_t>(max_k) + 1);
  out[0] = 1.0;
  for (int k = 1; k <= max_k; ++k) {
    const int a = k / 2;
    const int b = k - a;
    const auto& pa = p[static_cast<std::size_t>(a)];
    const auto& pb = p[static_cast<std::size_t>(b)];
    out[static_cast<std::size_t>(k)] =
        a == 0 ? pb.trace().real() * inv_n : pa.cwiseProduct(pb.conjugate()).sum().real() * inv_n;
  }
  return out;
}

void FreenessConfig::validate() const {
  if (n_list.empty()) throw std::invalid_argument("freeness: n_list is empty");
  for (int n : n_list) {
    if (n < 1 || n > 4096) throw std::invalid_argument("freeness: n must lie in [1, 4096]");
  }
  if (max_len < 1 || max_len > 8) throw std::invalid_argument("freeness: max_len must lie in [1, 8]");
  if (trials < 1) throw std::invalid_argument("freeness: trials must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("freeness: epsilon must be positive");
}

std::vector<FreenessRow> asymptotic_freeness_experiment(const std::vector<LawSpec>& x, const std::vector<LawSpec>& y,
                                                        const FreenessConfig& cfg) {
  cfg.validate();
  if (x.empty() || y.empty()) throw std::invalid_argument("freeness: both sides need at least one variable");
  std::vector<FreenessRow> rows;
  for (int n : cfg.n_list) {
    std::vector<Matrix> dx, dy;
    for (const auto& law : x) dx.push_back(law.diagonal(n));
    for (const auto& law : y) dy.push_back(law.diagonal(n));
    const MatrixTuple base_x(dx), base_y(dy);
    const auto mx = matrix_moments(base_x, cfg.max_len);
    const auto my = matrix_moments(base_y, cfg.max_len);
    const auto oracle = free_product_moments(mx, my, cfg.max_len);

    FreenessRow row;
    row.n = n;
    row.per_trial.assign(static_cast<std::size_t>(cfg.trials), 0.0);
    std::vector<double> invariance(static_cast<std::size_t>(cfg.trials), 0.0);
    const RngStream base = RngStream(cfg.seed, kFreenessStream).child(static_cast<std::uint64_t>(n));
    run_trials(cfg.trials, cfg.execution, [&](int trial) {
      RngStream rng = base.child(static_cast<std::uint64_t>(trial));
      const Matrix u = sample_haar_unitary(n, rng);
      const Matrix v = sample_haar_unitary(n, rng);
      std::vector<Matrix> cx, cy, joint;
      for (const auto& m : dx) cx.push_back(symmetrize(conjugate_diagonal(u, m)).value);
      for (const auto& m : dy) cy.push_back(symmetrize(conjugate_diagonal(v, m)).value);
      joint = cx;
      joint.insert(joint.end(), cy.begin(), cy.end());
      const auto emp = matrix_moments(MatrixTuple(joint), cfg.max_len, false);
      const auto own_x = matrix_moments(MatrixTuple(cx), cfg.max_len, false);
      const auto own_y = matrix_moments(MatrixTuple(cy), cfg.max_len, false);
      row.per_trial[static_cast<std::size_t>(trial)] = max_gap(emp, oracle);
      invariance[static_cast<std::size_t>(trial)] = std::max(max_gap(own_x, mx), max_gap(own_y, my));
    });
    int exceed = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      const double dev = row.per_trial[static_cast<std::size_t>(t)];
      row.mean_deviation += dev;
      row.max_deviation = std::max(row.max_deviation, dev);
      exceed += dev > cfg.epsilon;
      row.self_invariance = std::max(row.self_invariance, invariance[static_cast<std::size_t>(t)]);
    }
    row.mean_deviation /= cfg.trials;
    row.exceed_frequency = static_cast<double>(exceed) / cfg.trials;
    // Scale-aware bound on rounding in the conjugated word traces.
    double scale = 1.0;
    for (const auto& m : dx) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    for (const auto& m : dy) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    if (row.self_invariance > 1e-10 * std::pow(scale, cfg.max_len)) {
      std::ostringstream os;
      os << "freeness: Haar conjugation changed a tuple's own word traces by " << row.self_invariance << " at n = " << n;
      throw std::runtime_error(os.str());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void ConvolutionConfig::validate() const {
  if (n < 1 || n > 4096) throw std::invalid_argument("convolve: n must lie in [1, 4096]");
  if (trials < 1) throw std::invalid_argument("convolve: trials must be positive");
  if (max_len < 1 || max_len > kMaxLenCap) throw std::invalid_argument("convolve: max_len out of range");
}

std::vector<ConvolutionRow> free_convolution_experiment(const LawSpec& mu, const LawSpec& nu,
                                                        const ConvolutionConfig& cfg) {
  cfg.validate();
  const Matrix a = mu.diagonal(cfg.n);
  const Matrix b = nu.diagonal(cfg.n);
  auto discretized = [&](const Matrix& d) {
    std::vector<double> m(static_cast<std::size_t>(cfg.max_len) + 1, 0.0);
    for (int k = 0; k <= cfg.max_len; ++k) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < d.rows(); ++i) s += std::pow(d(i, i).real(), k);
      m[static_cast<std::size_t>(k)] = s / static_cast<double>(d.rows());
    }
    m[0] = 1.0;
    return MomentVector::from_real_moments(m);
  };
  const auto oracle = free_convolve(discretized(a), discretized(b), cfg.max_len);
  const auto limit = free_convolve(MomentVector::from_real_moments(mu.moments(cfg.max_len)),
                                   MomentVector::from_real_moments(nu.moments(cfg.max_len)), cfg.max_len);

  std::vector<std::vector<double>> traces(static_cast<std::size_t>(cfg.trials));
  const RngStream base = RngStream(cfg.seed, kConvolutionStream).child(static_cast<std::uint64_t>(cfg.n));
  run_trials(cfg.trials, cfg.execution, [&](int trial) {
    RngStream rng = base.child(static_cast<std::uint64_t>(trial));
    const Matrix u = sample_haar_unitary(cfg.n, rng);
    const Matrix h = symmetrize(Matrix(a + conjugate_diagonal(u, b))).value;
    traces[static_cast<std::size_t>(trial)] = power_traces(h, cfg.max_len);
  });
  std::vector<ConvolutionRow> rows;
  for (int k = 1; k <= cfg.max_len; ++k) {
    ConvolutionRow row;
    row.k = k;
    double sq = 0.0;
    for (const auto& tr : traces) row.empirical += tr[static_cast<std::size_t>(k)];
    row.empirical /= cfg.trials;
    for (const auto& tr : traces) sq += std::pow(tr[static_cast<std::size_t>(k)] - row.empirical, 2);
    row.spread = cfg.trials > 1 ? std::sqrt(sq / (cfg.trials - 1)) : 0.0;
    row.oracle = oracle.power_moment(k).real();
    row.limit = limit.power_moment(k).real();
    row.deviation = std::abs(row.empirical - row.oracle);
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct HitSet {
  std::vector<std::int64_t> index;
  std::vector<double> log_weight;
};

HitSet collect_hits(const SharedSamples& s) {
  HitSet h;
  for (std::size_t i = 0; i < s.masks[0].size(); ++i) {
    if (s.masks[0][i]) {
      h.index.push_back(static_cast<std::int64_t>(i));
      h.log_weight.push_back(s.log_weight[i]);
    }
  }
  return h;
}

}  // namespace

std::vector<AdditivityRow> entropy_additivity_experiment(const NeighborhoodSpec& spec1,
                                                         const NeighborhoodSpec& spec2,
                                                         const std::vector<Constraint>& cross,
                                                         const std::vector<int>& n_list,
                                                         const SamplingConfig& cfg) {
  cfg.validate();
  spec1.validate();
  spec2.validate();
  const auto joint = join_specs(spec1, spec2, cross);
  if (n_list.empty()) throw std::invalid_argument("additivity: n_list is empty");
  SamplingConfig cfg2 = cfg;
  cfg2.stream = cfg.stream + kSecondSpecStream;
  std::vector<AdditivityRow> rows;
  for (int n : n_list) {
    if (n < 1 || n > cfg.max_n) throw std::invalid_argument("additivity: n out of range");
    const auto s1 = sample_specs({spec1}, n, cfg);
    const auto s2 = sample_specs({spec2}, n, cfg2);
    AdditivityRow row;
    row.n = n;
    row.first = estimate_from_mask(s1.log_weight, s1.masks[0], n, spec1.d, spec1.field);
    row.second = estimate_from_mask(s2.log_weight, s2.masks[0], n, spec2.d, spec2.field);
    row.first.boundary = s1.boundary_counts[0];
    row.second.boundary = s2.boundary_counts[0];
    const auto h1 = collect_hits(s1);
    const auto h2 = collect_hits(s2);
    if (h1.index.empty() || h2.index.empty()) {
      row.h_joint = -std::numeric_limits<double>::infinity();
      row.deficit = std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
      continue;
    }
    std::vector<MatrixTuple> y1, y2;
    double lw = 0.0;
    for (auto i : h1.index) y1.push_back(draw_proposal(n, spec1.d, spec1.field, cfg, i, &lw));
    for (auto i : h2.index) y2.push_back(draw_proposal(n, spec2.d, spec2.field, cfg2, i, &lw));
    const double max1 = *std::max_element(h1.log_weight.begin(), h1.log_weight.end());
    const double max2 = *std::max_element(h2.log_weight.begin(), h2.log_weight.end());

    const auto n1 = static_cast<std::int64_t>(y1.size());
    const auto n2 = static_cast<std::int64_t>(y2.size());
    const std::int64_t rounds = std::clamp<std::int64_t>(kMaxAdditivityPairs / n1, 1, n2);
    std::vector<double> num(static_cast<std::size_t>(n1), 0.0), den(static_cast<std::size_t>(n1), 0.0);
    run_trials(static_cast<int>(n1), cfg.execution, [&](int i) {
      const auto iu = static_cast<std::size_t>(i);
      const double wi = std::exp(h1.log_weight[iu] - max1);
      for (std::int64_t r = 0; r < rounds; ++r) {
        const auto j = static_cast<std::size_t>((i + r) % n2);
        const double w = wi * std::exp(h2.log_weight[j] - max2);
        den[iu] += w;
        if (is_microstate(y1[iu].concat(y2[j]), joint, cfg.formula) == Membership::In) num[iu] += w;
      }
    });
    double su = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) {
      su += num[i];
      sv += den[i];
    }
    row.ratio = su / sv;
    double var = 0.0;
    for (std::size_t i = 0; i < num.size(); ++i) var += std::pow(num[i] - row.ratio * den[i], 2);
    row.ratio_ci = 1.96 * std::sqrt(var) / sv;
    row.pairs = n1 * rounds;
    const double n2d = static_cast<double>(n) * n;
    row.h_joint = row.first.h + row.second.h + std::log(row.ratio) / n2d;
    row.deficit = row.ratio > 0.0 ? -std::log(row.ratio) / n2d : std::numeric_limits<double>::infinity();
    rows.push_back(row);
  }
  return rows;
}

OrbitFixture orbit_fixture_from_json(const nlohmann::json& j) {
  try {
    OrbitFixture f;
    f.x = tuple_from_json(j.at("x"));
    f.y = tuple_from_json(j.at("y"));
    f.matched_degree = j.at("matched_degree").get<int>();
    f.gap = j.value("gap", 0.0);
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw FixtureError(std::string("fixture: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FixtureError(std::string("fixture: ") + e.what());
  }
}

void Example53Config::validate() const {
  if (trials < 1) throw std::invalid_argument("example-5-3: trials must be positive");
  if (moment_len < 1 || moment_len > kMaxLenCap) throw std::invalid_argument("example-5-3: moment_len out of range");
  psi.validate();
}

Example53Report example_5_3_runner(const OrbitFixture& fixture, const Example53Config& cfg) {
  cfg.validate();
  const auto& x = fixture.x;
  const auto& y = fixture.y;
  if (x.n() != y.n() || x.d() != y.d()) throw FixtureError("fixture: X and Y have different shapes");
  if (fixture.matched_degree < 1) throw FixtureError("fixture: matched_degree must be at least 1");
  const int len = std::max(cfg.moment_len, fixture.matched_degree);
  const auto mx = matrix_moments(x, len);
  const auto my = matrix_moments(y, len);
  for (std::size_t i = 0; i < mx.offset(fixture.matched_degree + 1); ++i) {
    if (std::abs(mx[i] - my[i]) > 1e-10) {
      throw FixtureError("fixture: moments differ at word '" + mx.word_at(i).to_string() + "' within the declared degree");
    }
  }
  Example53Report rep;
  rep.psi_fixture = psi_distance(x, y, cfg.psi).distance;
  if (!(rep.psi_fixture > fixture.gap)) {
    std::ostringstream os;
    os << "fixture: psi(X, Y) = " << rep.psi_fixture << " does not exceed the declared gap " << fixture.gap;
    throw FixtureError(os.str());
  }

  const int n = x.n();
  rep.psi_same.assign(static_cast<std::size_t>(cfg.trials), 0.0);
  rep.psi_other.assign(static_cast<std::size_t>(cfg.trials), 0.0);
  std::vector<MomentVector> tx(static_cast<std::size_t>(cfg.trials), MomentVector(x.d(), len));
  std::vector<MomentVector> ty = tx;
  OptConfig inner = cfg.psi;
  inner.execution = Execution::Serial;
  const RngStream base(cfg.seed, kExampleStream);
  run_trials(cfg.trials, cfg.psi.execution, [&](int trial) {
    const auto tu = static_cast<std::size_t>(trial);
    RngStream rng = base.child(tu);
    const Matrix u = sample_haar_unitary(n, rng);
    const Matrix v = sample_haar_unitary(n, rng);
    std::vector<Matrix> ux, vx, vy;
    for (int j = 0; j < x.d(); ++j) {
      ux.push_back(conjugate(u, x[j]));
      vx.push_back(conjugate(v, x[j]));
      vy.push_back(conjugate(v, y[j]));
    }
    OptConfig c = inner;
    c.seed = cfg.psi.seed + tu;
    rep.psi_same[tu] = psi_distance(MatrixTuple(ux), MatrixTuple(vx), c).distance;
    rep.psi_other[tu] = psi_distance(MatrixTuple(ux), MatrixTuple(vy), c).distance;
    tx[tu] = matrix_moments(MatrixTuple(vx), len, false);
    ty[tu] = matrix_moments(MatrixTuple(vy), len, false);
  });
  rep.moments_x = MomentVector(x.d(), len);
  rep.moments_y = MomentVector(x.d(), len);
  for (std::size_t i = 0; i < rep.moments_x.size(); ++i) {
    Complex ax = 0.0, ay = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      ax += tx[static_cast<std::size_t>(t)][i];
      ay += ty[static_cast<std::size_t>(t)][i];
    }
    rep.moments_x[i] = ax / static_cast<double>(cfg.trials);
    rep.moments_y[i] = ay / static_cast<double>(cfg.trials);
  }
  for (std::size_t i = 0; i < rep.moments_x.offset(fixture.matched_degree + 1); ++i) {
    rep.matched_deviation = std::max(rep.matched_deviation, std::abs(rep.moments_x[i] - rep.moments_y[i]));
  }
  for (int t = 0; t < cfg.trials; ++t) {
    rep.mean_same += rep.psi_same[static_cast<std::size_t>(t)];
    rep.mean_other += rep.psi_other[static_cast<std::size_t>(t)];
  }
  rep.mean_same /= cfg.trials;
  rep.mean_other /= cfg.trials;
  return rep;
}

}  // namespace mslab
