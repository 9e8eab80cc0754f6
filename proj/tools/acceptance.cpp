// Acceptance gates for the mslab library. Prints one PASS/FAIL line per
// criterion; the exit status is 0 when every failing criterion was listed
// with --known-infeasible.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "mslab/experiment.hpp"
#include "mslab/freeness_sim.hpp"
#include "mslab/gibbs_flow.hpp"
#include "mslab/microstates.hpp"
#include "mslab/moments.hpp"
#include "mslab/transport.hpp"

using namespace mslab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Detail {
 public:
  Detail() { os_ << std::setprecision(4); }
  template <typename T>
  Detail& operator<<(const T& v) {
    os_ << v;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Constraint con(const std::string& formula, double target, double tol) { return {parse_formula(formula), target, tol}; }

NeighborhoodSpec single(std::vector<Constraint> cs, Field field = Field::Complex, double r = 4.0) {
  NeighborhoodSpec s;
  s.d = 1;
  s.r = r;
  s.field = field;
  s.constraints = std::move(cs);
  return s;
}

SamplingConfig sampling(std::int64_t samples, std::uint64_t seed) {
  SamplingConfig cfg;
  cfg.samples = samples;
  cfg.seed = seed;
  return cfg;
}

// 1. Normalized HS unit ball: h_n -> 1 + log(pi).
Outcome ball_volume() {
  const auto ball = single({con("sqrt(tr.re(x1 x1*))", 0.0, 1.0)});
  const double target = 1.0 + std::log(std::numbers::pi);
  bool pass = true;
  Detail d;
  d << "target " << target;
  for (auto [n, tol] : {std::pair{4, 0.2}, std::pair{8, 0.1}}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = estimate_volume(ball, n, sampling(1'000'000, 11));
    const double secs = seconds_since(t0);
    pass = pass && std::abs(e.h - target) < tol && secs < 60.0;
    d << "; n=" << n << " h=" << e.h << " (|diff|=" << std::abs(e.h - target) << ", " << secs << " s)";
  }
  return {pass, d.str()};
}

bool contained(const std::vector<std::uint8_t>& inner, const std::vector<std::uint8_t>& outer, std::int64_t* violations) {
  std::int64_t v = 0;
  for (std::size_t i = 0; i < inner.size(); ++i) v += inner[i] && !outer[i];
  *violations += v;
  return v == 0;
}

// 2. Nested specs on shared draws: indicator containment sample by sample.
Outcome monotonicity() {
  std::int64_t violations = 0, inner_hits = 0;
  bool ordered = true;
  const std::vector<std::pair<Field, const char*>> fields{{Field::Complex, "tr.re(x1 x1*)"},
                                                          {Field::SelfAdjoint, "tr.re(x1 x1)"}};
  for (const auto& [field, m2] : fields) {
    const std::vector<NeighborhoodSpec> chain{
        single({con(m2, 1.0, 0.1), con("tr.re(x1)", 0.0, 0.1), con("tr.re(x1 x1 x1)", 0.0, 0.3)}, field),
        single({con(m2, 1.0, 0.1), con("tr.re(x1)", 0.0, 0.1)}, field),
        single({con(m2, 1.0, 0.2), con("tr.re(x1)", 0.0, 0.2)}, field),
        single({con(m2, 1.0, 0.4)}, field),
        single({con(m2, 1.0, 0.4)}, field, 6.0),
    };
    for (int n : {3, 4}) {
      const auto shared = sample_specs(chain, n, sampling(10'000, 21));
      inner_hits += std::count(shared.masks[0].begin(), shared.masks[0].end(), 1);
      for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        contained(shared.masks[k], shared.masks[k + 1], &violations);
        const auto a = estimate_from_mask(shared.log_weight, shared.masks[k], n, 1, field);
        const auto b = estimate_from_mask(shared.log_weight, shared.masks[k + 1], n, 1, field);
        ordered = ordered && a.log_volume <= b.log_volume;
      }
    }
  }
  Detail d;
  d << violations << " violations over 10^4 shared draws x 16 nested pairs; innermost hits " << inner_hits
    << "; volume order " << (ordered ? "holds" : "broken");
  return {violations == 0 && ordered && inner_hits > 0, d.str()};
}

// 3. Disjoint specs: h(A u B) <= max(h(A), h(B)) + log 2 / n^2 on the same draws.
Outcome union_bound() {
  bool pass = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::int64_t overlaps = 0;
  const std::vector<std::pair<NeighborhoodSpec, NeighborhoodSpec>> pairs{
      {single({con("tr.re(x1)", 0.15, 0.05)}), single({con("tr.re(x1)", -0.15, 0.05)})},
      {single({con("tr.re(x1 x1*)", 0.6, 0.2)}), single({con("tr.re(x1 x1*)", 1.2, 0.2)})},
      {single({con("tr.re(x1 x1)", 1.0, 0.2)}, Field::SelfAdjoint),
       single({con("tr.re(x1 x1)", 1.5, 0.2)}, Field::SelfAdjoint)},
  };
  for (const auto& [a, b] : pairs) {
    for (int n : {3, 4, 6}) {
      const auto shared = sample_specs({a, b}, n, sampling(20'000, 31));
      std::vector<std::uint8_t> either(shared.masks[0].size());
      for (std::size_t i = 0; i < either.size(); ++i) {
        overlaps += shared.masks[0][i] & shared.masks[1][i];
        either[i] = shared.masks[0][i] | shared.masks[1][i];
      }
      const auto ea = estimate_from_mask(shared.log_weight, shared.masks[0], n, 1, a.field);
      const auto eb = estimate_from_mask(shared.log_weight, shared.masks[1], n, 1, a.field);
      const auto eu = estimate_from_mask(shared.log_weight, either, n, 1, a.field);
      const double slack = std::max(ea.h, eb.h) + std::log(2.0) / (n * n) - eu.h;
      pass = pass && ea.hits > 0 && eb.hits > 0 && slack >= 0.0;
      worst_slack = std::min(worst_slack, slack);
    }
  }
  Detail d;
  d << "9 disjoint pairs; min slack " << worst_slack << "; overlapping draws " << overlaps;
  return {pass && overlaps == 0, d.str()};
}

// Log-energy free entropy of the standard semicircle by midpoint quadrature
// in the angle variable s = 2 cos(theta), density (2/pi) sin^2(theta).
double semicircle_entropy_quadrature(int m) {
  const double pi = std::numbers::pi;
  std::vector<double> s(static_cast<std::size_t>(m)), w(static_cast<std::size_t>(m));
  std::vector<double> s2(static_cast<std::size_t>(m)), w2(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double th = pi * (i + 0.5) / m;
    const double th2 = pi * (i + 0.25) / m;  // staggered grid keeps the diagonal off the nodes
    s[static_cast<std::size_t>(i)] = 2.0 * std::cos(th);
    w[static_cast<std::size_t>(i)] = 2.0 / m * std::sin(th) * std::sin(th);
    s2[static_cast<std::size_t>(i)] = 2.0 * std::cos(th2);
    w2[static_cast<std::size_t>(i)] = 2.0 / m * std::sin(th2) * std::sin(th2);
  }
  double energy = 0.0;
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j = 0; j < m; ++j) row += w2[static_cast<std::size_t>(j)] * std::log(std::abs(s[static_cast<std::size_t>(i)] - s2[static_cast<std::size_t>(j)]));
    energy += w[static_cast<std::size_t>(i)] * row;
  }
  return energy + 0.75 + 0.5 * std::log(2.0 * pi);
}

// 4. Semicircular moment box, n = 4..12 step 2, against the log-energy value.
Outcome semicircle_entropy() {
  const auto spec = single({con("tr.re(x1)", 0.0, 0.1), con("tr.re(x1 x1)", 1.0, 0.1),
                            con("tr.re(x1 x1 x1)", 0.0, 0.1), con("tr.re(x1 x1 x1 x1)", 2.0, 0.1)},
                           Field::SelfAdjoint);
  const double oracle = semicircle_entropy_quadrature(4000);
  const auto t0 = std::chrono::steady_clock::now();
  const auto est = estimate_entropy(spec, {4, 6, 8, 10, 12}, sampling(200'000, 41));
  const double secs = seconds_since(t0);
  Detail d;
  for (const auto& e : est.per_n) d << "h" << e.n << "=" << e.h << " ";
  const double trend = est.trend.value_at_largest_n;
  d << "; trend " << trend << " vs quadrature " << oracle << " (" << secs << " s)";
  return {std::isfinite(trend) && std::abs(trend - oracle) < 0.3 && secs < 600.0, d.str()};
}

// 5. Haar-conjugated deterministic diagonals at n = 512.
Outcome asymptotic_freeness() {
  FreenessConfig cfg;
  cfg.n_list = {512};
  cfg.trials = 10;
  cfg.max_len = 4;
  cfg.seed = 51;
  const auto semi = LawSpec::semicircle();
  const auto bern = LawSpec::from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = asymptotic_freeness_experiment({semi}, {bern}, cfg);
  const double secs = seconds_since(t0);
  const auto& r = rows.front();
  Detail d;
  d << "max deviation " << r.max_deviation << ", mean " << r.mean_deviation << " over " << r.per_trial.size()
    << " trials (" << secs << " s)";
  return {r.max_deviation < 0.05 && r.per_trial.size() == 10 && secs < 300.0, d.str()};
}

// 6. Free convolution at n = 1024 against the cumulant-additivity oracle.
// A single trial's m6 for semicircle + semicircle fluctuates with sd ~0.15 at
// this size, so the absolute 0.05 gate needs the mean over ~50 trials.
Outcome free_convolution() {
  ConvolutionConfig cfg;
  cfg.n = 1024;
  cfg.max_len = 6;
  cfg.seed = 61;
  const auto semi = LawSpec::semicircle();
  const auto bern = LawSpec::from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
  bool pass = true;
  Detail d;
  for (const auto& [name, law, trials] : {std::tuple{"semicircle", semi, 48}, std::tuple{"bernoulli", bern, 8}}) {
    cfg.trials = trials;
    double worst = 0.0;
    int worst_k = 0;
    for (const auto& r : free_convolution_experiment(law, law, cfg)) {
      if (r.deviation > worst) {
        worst = r.deviation;
        worst_k = r.k;
      }
    }
    pass = pass && worst < 0.05;
    d << name << " (" << trials << " trials) max deviation " << worst << " at k=" << worst_k << "; ";
  }
  return {pass, d.str()};
}

// 7. Moment-cumulant round trip and NC(n) counts.
Outcome cumulants() {
  RngStream rng(71, 0);
  double worst = 0.0;
  for (int d = 1; d <= 3; ++d) {
    for (int rep = 0; rep < 2; ++rep) {
      MatrixTuple x = sample_ginibre(3, d, rng);
      for (int j = 0; j < d; ++j) x[j] += Complex(rng.normal(), rng.normal()) * 0.3 * Matrix::Identity(3, 3);
      const auto mv = matrix_moments(x, 8);
      const auto back = cumulants_to_moments(moments_to_cumulants(mv));
      for (std::size_t i = 0; i < mv.size(); ++i) worst = std::max(worst, std::abs(back[i] - mv[i]));
    }
  }
  bool counts = true;
  std::vector<long> catalan{1};
  for (int n = 1; n <= 10; ++n) {
    long c = 0;
    for (int j = 0; j < n; ++j) c += catalan[static_cast<std::size_t>(j)] * catalan[static_cast<std::size_t>(n - 1 - j)];
    catalan.push_back(c);
    counts = counts && static_cast<long>(enumerate_nc(n).size()) == c;
  }
  Detail d;
  d << "round-trip max error " << worst << " (d<=3, degree 8); |NC(n)| = Catalan(n) for n<=10: "
    << (counts ? "yes" : "no");
  return {worst < 1e-12 && counts, d.str()};
}

StarPolynomial random_polynomial(RngStream& rng, int d, int max_degree, int terms) {
  StarPolynomial p;
  for (int t = 0; t < terms; ++t) {
    StarWord w;
    const int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_degree));
    for (int k = 0; k < len; ++k) {
      w.letters.push_back({Var{'x', 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(d))}, rng() % 2 == 1});
    }
    p.add_term(w, Complex(rng.normal(), rng.normal()));
  }
  return p;
}

FormulaPtr random_formula(RngStream& rng, int d) {
  auto basic = [&](int deg) {
    auto p = random_polynomial(rng, d, deg, 3);
    return rng() % 2 ? tr_re(p) : tr_im(p);
  };
  switch (rng() % 5) {
    case 0:
      return basic(4);
    case 1:
      return sum({basic(4), scale(rng.normal(), basic(3))});
    case 2:
      return product({basic(2), basic(2)});
    case 3:
      return affine(0.3, {rng.normal(), rng.normal()}, {basic(4), basic(2)});
    default:
      return sqrt_of(sum({constant(50.0), basic(4)}));
  }
}

// Central differences in every real entry direction, in the normalized-trace
// gradient convention G_ij = n (d/dRe + i d/dIm).
MatrixTuple fd_gradient(const Formula& f, const MatrixTuple& x, double h) {
  MatrixTuple g = MatrixTuple::zeros(x.n(), x.d());
  for (int j = 0; j < x.d(); ++j) {
    for (int r = 0; r < x.n(); ++r) {
      for (int c = 0; c < x.n(); ++c) {
        double parts[2];
        const Complex dirs[2] = {Complex(1, 0), Complex(0, 1)};
        for (int k = 0; k < 2; ++k) {
          MatrixTuple xp = x, xm = x;
          xp[j](r, c) += h * dirs[k];
          xm[j](r, c) -= h * dirs[k];
          parts[k] = (eval_formula(f, xp).value - eval_formula(f, xm).value) / (2 * h);
        }
        g[j](r, c) = static_cast<double>(x.n()) * Complex(parts[0], parts[1]);
      }
    }
  }
  return g;
}

// 8. Cyclic gradients vs finite differences.
Outcome gradient_gate() {
  RngStream rng(81, 0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = t % 2 == 0 ? 4 : 8;
    const auto x = sample_ginibre(n, 2, rng);
    const auto f = random_formula(rng, 2);
    const auto g = cyclic_gradient(*f, x);
    const auto fd = fd_gradient(*f, x, 1e-5);
    worst = std::max(worst, hs_norm(g.gradient - fd) / std::max(hs_norm(g.gradient), 1e-12));
  }
  Detail d;
  d << "worst relative error " << worst << " over 100 (formula, tuple) pairs, n in {4, 8}";
  return {worst < 1e-5, d.str()};
}

// 9. Langevin sampler stationary m2.
Outcome gibbs_sampler() {
  Potential quad;
  quad.phi = parse_formula("tr.re(x1 x1*)");
  quad.field = Field::Complex;
  quad.bounds = {0.0, 1.0, 0.0, 1.0};
  GibbsConfig qc;
  qc.n = 64;
  qc.burn_in = 1000;
  qc.samples = 100;
  qc.thin = 10;
  qc.max_len = 2;
  qc.seed = 91;
  auto t0 = std::chrono::steady_clock::now();
  const auto qr = sample_gibbs_moments(quad, qc);
  const double qsecs = seconds_since(t0);
  // Entries of the stationary law are complex Gaussians of variance 1/n.
  const double q_m2 = qr.moments.at(parse_word("x1 x1*")).real();
  const double q_err = std::abs(q_m2 - 1.0);

  const double g = 0.1;
  Potential quart;
  quart.phi = parse_formula("0.5*tr.re(x1 x1) + 0.1*tr.re(x1 x1 x1 x1)");
  quart.field = Field::SelfAdjoint;
  quart.bounds = {0.0, 0.5, 0.0, 0.5 + 9.0 * g};
  GibbsConfig kc;
  kc.n = 128;
  kc.burn_in = 1000;
  kc.samples = 50;
  kc.thin = 20;
  kc.max_len = 2;
  kc.seed = 92;
  t0 = std::chrono::steady_clock::now();
  const auto kr = sample_gibbs_moments(quart, kc);
  const double ksecs = seconds_since(t0);
  const double a2 = (std::sqrt(1.0 + 48.0 * g) - 1.0) / (24.0 * g);
  const double ds_m2 = a2 * (4.0 - a2) / 3.0;
  const double k_m2 = kr.moments.power_moment(2).real();
  const double k_err = std::abs(k_m2 / ds_m2 - 1.0);
  Detail d;
  d << "quadratic n=64 m2 " << q_m2 << " vs 1 (" << 100 * q_err << "%, " << qsecs << " s); quartic n=128 m2 " << k_m2
    << " vs " << ds_m2 << " (" << 100 * k_err << "%, " << ksecs << " s)";
  return {q_err < 0.05 && k_err < 0.05 && qsecs < 600.0 && ksecs < 600.0, d.str()};
}

// 10. Hopf-Lax semigroup on c ||X||^2 at n = 16.
Outcome hopf_lax() {
  RngStream rng(101, 0);
  const auto x = sample_ginibre(16, 1, rng);
  Potential quad;
  quad.phi = parse_formula("tr.re(x1 x1*)");
  quad.field = Field::Complex;
  quad.bounds = {0.0, 1.0, 0.0, 1.0};
  HopfLaxConfig cfg;
  cfg.seed = 102;
  double worst1 = 0.0;
  for (double t : {0.05, 0.2, 1.0}) {
    const double closed = hs_norm_sq(x) / (1.0 + 2.0 * t) + 2.0 * t;
    worst1 = std::max(worst1, std::abs(hopf_lax_step(quad, t, x, cfg).value / closed - 1.0));
  }
  const double t = 0.1;
  const double closed = hs_norm_sq(x) / (1.0 + 2.0 * t) + 2.0 * t;
  cfg.z_samples = 200;
  const double err4 = std::abs(hopf_lax_iterate(quad, t, 4, x, cfg).value / closed - 1.0);
  Detail d;
  d << "single step worst relative error " << worst1 << " (t in {0.05, 0.2, 1}); k=4 relative error " << err4;
  return {worst1 < 1e-2 && err4 < 2e-2, d.str()};
}

Matrix conj_by(const Matrix& u, const Matrix& x) { return u * x * u.adjoint(); }

MatrixTuple conj_by(const Matrix& u, const MatrixTuple& x) {
  std::vector<Matrix> out;
  for (const auto& m : x) out.push_back(conj_by(u, m));
  return MatrixTuple(std::move(out));
}

// 11. Orbit geometry.
Outcome orbit_geometry() {
  RngStream rng(111, 0);
  OptConfig psi_cfg;
  psi_cfg.starts = 8;
  psi_cfg.seed = 112;
  double worst_psi = 0.0;
  for (int n : {2, 4, 8, 16}) {
    for (int d : {1, 2}) {
      const auto x = sample_ginibre(n, d, rng);
      worst_psi = std::max(worst_psi, psi_distance(x, conj_by(sample_haar_unitary(n, rng), x), psi_cfg).distance);
    }
  }
  OptConfig w_cfg;
  w_cfg.starts = 1;
  w_cfg.max_iters = 100;
  w_cfg.seed = 113;
  double worst_w = 0.0;
  int pairs = 0;
  for (int n : {8, 32, 64}) {
    for (int k = 0; k < 34; ++k, ++pairs) {
      const Matrix a = sample_gue(n, rng);
      const Matrix b = 0.5 * sample_gue(n, rng) + 0.3 * Matrix::Identity(n, n);
      Eigen::VectorXd ea = spectrum(a), eb = spectrum(b);
      std::sort(ea.data(), ea.data() + ea.size());
      std::sort(eb.data(), eb.data() + eb.size());
      const double oracle = std::sqrt((ea - eb).squaredNorm() / n);
      worst_w = std::max(worst_w, std::abs(wasserstein_matrix(a, b, w_cfg) - oracle));
    }
  }
  int distinct = 0, runs = 0;
  for (int n : {2, 3, 4}) {
    for (int rep = 0; rep < 3; ++rep, ++runs) {
      const auto x = sample_ginibre(n, 1, rng);
      distinct += specht_equivalent(x, conj_by(sample_haar_unitary(n, rng), x), n * n).verdict == SpechtVerdict::Distinct;
    }
  }
  for (int rep = 0; rep < 3; ++rep, ++runs) {
    const auto x = sample_ginibre(2, 2, rng);
    distinct += specht_equivalent(x, conj_by(sample_haar_unitary(2, rng), x), 4).verdict == SpechtVerdict::Distinct;
  }
  Detail d;
  d << "psi on conjugates max " << worst_psi << "; W vs sorted spectra max |diff| " << worst_w << " over " << pairs
    << " pairs; specht distinct on " << distinct << "/" << runs << " conjugate pairs";
  return {worst_psi < 1e-6 && worst_w < 1e-4 && distinct == 0, d.str()};
}

// 12. Independent-join ratio.
Outcome independent_join() {
  const auto box = single({con("tr.re(x1)", 0.0, 0.1), con("tr.re(x1 x1)", 1.0, 0.1)}, Field::SelfAdjoint);
  McmcConfig mc;
  mc.n = 8;
  mc.seed = 121;
  const auto marginal = independent_join_ratio(box, box, join_specs(box, box, {}), mc);
  const auto near = independent_join_ratio(box, box, join_specs(box, box, {con("tr.re(x1 x2)", 0.0, 0.1)}), mc);
  Detail d;
  d << "marginal-only ratio " << marginal.ratio << "; near-freeness (|tr x1 x2| < 0.1) ratio " << near.ratio
    << " +- " << near.ci << " at n=8 (gate >= 0.8)";
  return {marginal.ratio == 1.0 && near.ratio >= 0.8, d.str()};
}

// 13. Every example config, run twice.
Outcome determinism() {
  const fs::path dir = fs::path(MSLAB_FIXTURE_DIR) / "configs";
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  int identical = 0;
  std::string differing;
  for (const auto& f : files) {
    std::ifstream in(f);
    const auto cfg = config_from_json(nlohmann::json::parse(in), "", f.parent_path());
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    if (render(a.json) == render(b.json) && a.csv == b.csv) {
      ++identical;
    } else {
      differing += " " + cfg.kind;
    }
  }
  Detail d;
  d << identical << "/" << files.size() << " experiment kinds byte-identical on rerun" << differing;
  return {identical == static_cast<int>(files.size()) && !files.empty(), d.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mslab acceptance gates"};
  std::vector<int> only, known;
  app.add_option("--only", only, "run just these criteria");
  app.add_option("--known-infeasible", known, "criteria whose failure does not change the exit status");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "ball-volume calibration", ball_volume},
      {2, "monotonicity on nested specs", monotonicity},
      {3, "union inequality on disjoint specs", union_bound},
      {4, "semicircular entropy vs log-energy", semicircle_entropy},
      {5, "asymptotic freeness at n=512", asymptotic_freeness},
      {6, "free convolution at n=1024", free_convolution},
      {7, "moment-cumulant machinery", cumulants},
      {8, "cyclic gradient vs finite differences", gradient_gate},
      {9, "Gibbs sampler stationary m2", gibbs_sampler},
      {10, "Hopf-Lax quadratic closed form", hopf_lax},
      {11, "orbit geometry", orbit_geometry},
      {12, "independent-join ratio", independent_join},
      {13, "determinism", determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> tolerated(known.begin(), known.end());
  int passed = 0, ran = 0;
  std::vector<int> failed;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << " ("
              << std::fixed << std::setprecision(1) << seconds_since(t0) << " s): " << o.detail << std::endl;
    std::cout.unsetf(std::ios::fixed);
    if (o.pass) {
      ++passed;
    } else {
      failed.push_back(c.id);
    }
  }
  bool unexpected = false;
  std::cout << "acceptance: " << passed << "/" << ran << " passed";
  if (!failed.empty()) {
    std::cout << "; failed:";
    for (int id : failed) {
      std::cout << " " << id << (tolerated.count(id) ? " (known infeasible)" : "");
      unexpected = unexpected || !tolerated.count(id);
    }
  }
  std::cout << std::endl;
  return unexpected ? 1 : 0;
}
