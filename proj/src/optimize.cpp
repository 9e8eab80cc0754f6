#include "mslab/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <omp.h>

namespace mslab {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr double kMinStep = 1e-14;
constexpr double kMaxStep = 1e8;
constexpr int kReunitarizeEvery = 50;

struct StartOutcome {
  double value = std::numeric_limits<double>::infinity();
  MatrixTuple witness;
  bool converged = false;
  bool failed = false;
  int iters = 0;
  std::vector<double> history;
};

double real_inner(const MatrixTuple& a, const MatrixTuple& b) { return hs_inner(a, b).real(); }

double real_inner(const Matrix& a, const Matrix& b) {
  return (a.conjugate().cwiseProduct(b)).sum().real() / static_cast<double>(a.rows());
}

bool finite_tuple(const MatrixTuple& t) { return t.all_finite(); }

StartOutcome descend_in_ball(const TupleObjective& obj, double r, MatrixTuple y, const OptConfig& cfg) {
  StartOutcome out;
  y = project_opnorm_ball(y, r);
  MatrixTuple g = MatrixTuple::zeros(y.n(), y.d());
  double f = obj(y, &g);
  if (!std::isfinite(f) || !finite_tuple(g)) {
    out.failed = true;
    return out;
  }
  out.history.push_back(f);
  double step = cfg.step_init;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    MatrixTuple pg = y - project_opnorm_ball(y - g, r);
    if (hs_norm(pg) < cfg.tol) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    MatrixTuple y_new;
    MatrixTuple g_new = MatrixTuple::zeros(y.n(), y.d());
    double f_new = 0.0;
    for (int h = 0; h < kMaxHalvings; ++h) {
      y_new = project_opnorm_ball(y - step * g, r);
      const MatrixTuple s = y_new - y;
      const double decrease = real_inner(g, s);
      f_new = obj(y_new, &g_new);
      if (std::isfinite(f_new) && finite_tuple(g_new) && f_new <= f + kArmijo * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < kMinStep) break;
    }
    if (!accepted) {
      // No admissible decrease at machine precision: stationary to working accuracy.
      out.converged = true;
      break;
    }
    const MatrixTuple s = y_new - y;
    const MatrixTuple dg = g_new - g;
    const double ss = hs_norm_sq(s);
    const double sy = real_inner(s, dg);
    y = std::move(y_new);
    g = std::move(g_new);
    const double prev_f = f;
    f = f_new;
    out.history.push_back(f);
    if (ss == 0.0 || prev_f == f) {
      out.converged = true;
      ++it;
      break;
    }
    step = (sy > 0.0 && std::isfinite(sy)) ? ss / sy : 2.0 * step;
    step = std::clamp(step, kMinStep, kMaxStep);
  }
  out.iters = it;
  out.value = f;
  out.witness = std::move(y);
  return out;
}

Matrix reunitarize(const Matrix& u) {
  Eigen::HouseholderQR<Matrix> qr(u);
  Matrix q = qr.householderQ();
  const Matrix& rr = qr.matrixQR();
  for (Eigen::Index k = 0; k < u.rows(); ++k) {
    const Complex rkk = rr(k, k);
    const double mag = std::abs(rkk);
    if (mag > 0.0) q.col(k) *= rkk / mag;
  }
  return q;
}

StartOutcome descend_on_unitaries(const UnitaryObjective& obj, Matrix u, const OptConfig& cfg) {
  StartOutcome out;
  const auto n = u.rows();
  Matrix g = Matrix::Zero(n, n);
  double f = obj(u, &g);
  if (!std::isfinite(f) || !g.allFinite()) {
    out.failed = true;
    return out;
  }
  out.history.push_back(f);
  auto skew_part = [&](const Matrix& uu, const Matrix& gg) -> Matrix {
    const Matrix gu = gg * uu.adjoint();
    return 0.5 * (gu - gu.adjoint());
  };
  Matrix a = skew_part(u, g);
  const Matrix id = Matrix::Identity(n, n);
  double step = cfg.step_init;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const double a_norm_sq = real_inner(a, a);
    if (std::sqrt(a_norm_sq) < cfg.tol) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    Matrix u_new;
    Matrix g_new = Matrix::Zero(n, n);
    double f_new = 0.0;
    for (int h = 0; h < kMaxHalvings; ++h) {
      // Cayley retraction: (I + step A / 2)^{-1} (I - step A / 2) is unitary for skew-Hermitian A.
      const Matrix half = (0.5 * step) * a;
      u_new = (id + half).partialPivLu().solve(Matrix((id - half) * u));
      f_new = obj(u_new, &g_new);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f - kArmijo * step * a_norm_sq) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < kMinStep) break;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    if ((it + 1) % kReunitarizeEvery == 0) {
      u_new = reunitarize(u_new);
      f_new = obj(u_new, &g_new);
    }
    const Matrix a_new = skew_part(u_new, g_new);
    const Matrix s = step * a;
    const double ss = real_inner(s, s);
    const double sy = real_inner(s, Matrix(a_new - a));
    const double prev_f = f;
    u = std::move(u_new);
    g = std::move(g_new);
    a = a_new;
    f = f_new;
    out.history.push_back(f);
    if (prev_f == f) {
      out.converged = true;
      ++it;
      break;
    }
    // BB length in the Lie algebra (ignores transport between tangent spaces).
    step = (sy > 0.0 && std::isfinite(sy)) ? ss / sy : 2.0 * step;
    step = std::clamp(step, kMinStep, kMaxStep);
  }
  out.iters = it;
  out.value = f;
  out.witness = MatrixTuple({u});
  return out;
}

template <typename Run>
std::vector<StartOutcome> run_starts(int count, Execution execution, Run&& run) {
  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(count));
  auto body = [&](int k) {
    try {
      outcomes[static_cast<std::size_t>(k)] = run(k);
    } catch (const std::exception&) {
      outcomes[static_cast<std::size_t>(k)].failed = true;
    }
  };
  if (execution == Execution::Parallel && count > 1 && !omp_in_parallel()) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < count; ++k) body(k);
  } else {
    for (int k = 0; k < count; ++k) body(k);
  }
  return outcomes;
}

OptResult reduce_starts(std::vector<StartOutcome>& outcomes) {
  OptResult res;
  int best = -1;
  for (int k = 0; k < static_cast<int>(outcomes.size()); ++k) {
    const auto& o = outcomes[static_cast<std::size_t>(k)];
    if (o.failed) {
      ++res.failed_starts;
      continue;
    }
    if (best < 0 || o.value < outcomes[static_cast<std::size_t>(best)].value) best = k;
  }
  if (best < 0) throw std::runtime_error("optimizer: every start failed (non-finite objective or gradient)");
  auto& b = outcomes[static_cast<std::size_t>(best)];
  res.value = b.value;
  res.witness = std::move(b.witness);
  res.converged = b.converged;
  res.iters_used = b.iters;
  res.best_start = best;
  res.history = std::move(b.history);
  return res;
}

}  // namespace

void OptConfig::validate() const {
  if (starts < 1 || starts > 64) throw std::invalid_argument("OptConfig: starts must be in [1, 64]");
  if (max_iters < 1) throw std::invalid_argument("OptConfig: max_iters must be positive");
  if (!(step_init > 0.0)) throw std::invalid_argument("OptConfig: step_init must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("OptConfig: tol must be positive");
}

MatrixTuple project_opnorm_ball(const MatrixTuple& x, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("project_opnorm_ball: r must be positive");
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(x.d()));
  for (const auto& m : x) {
    if (operator_norm(m) <= r) {
      out.push_back(m);
      continue;
    }
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd s = svd.singularValues().cwiseMin(r);
    out.push_back(svd.matrixU() * s.cast<Complex>().asDiagonal() * svd.matrixV().adjoint());
  }
  return MatrixTuple(std::move(out));
}

double max_operator_norm(const MatrixTuple& x) {
  double m = 0.0;
  for (const auto& mat : x) m = std::max(m, operator_norm(mat));
  return m;
}

OptResult minimize_over_ball(const TupleObjective& obj, double r, int n, int d, const OptConfig& cfg,
                             const std::vector<MatrixTuple>& extra_starts) {
  cfg.validate();
  if (!(r > 0.0)) throw std::invalid_argument("minimize_over_ball: r must be positive");
  const int extras = static_cast<int>(extra_starts.size());
  const int total = cfg.starts + extras;
  const RngStream base(cfg.seed, cfg.stream);
  auto outcomes = run_starts(total, cfg.execution, [&](int k) {
    MatrixTuple start;
    if (k == 0) {
      start = MatrixTuple::zeros(n, d);
    } else if (k <= extras) {
      start = extra_starts[static_cast<std::size_t>(k - 1)];
    } else {
      RngStream rng = base.child(static_cast<std::uint64_t>(k));
      start = 0.5 * r * sample_ginibre(n, d, rng);
    }
    return descend_in_ball(obj, r, std::move(start), cfg);
  });
  return reduce_starts(outcomes);
}

OptResult minimize_over_unitaries(const UnitaryObjective& obj, int n, const OptConfig& cfg,
                                  const std::vector<Matrix>& extra_starts) {
  cfg.validate();
  const int extras = static_cast<int>(extra_starts.size());
  const int total = cfg.starts + extras;
  const RngStream base(cfg.seed, cfg.stream);
  auto outcomes = run_starts(total, cfg.execution, [&](int k) {
    Matrix start;
    if (k == 0) {
      start = Matrix::Identity(n, n);
    } else if (k <= extras) {
      start = extra_starts[static_cast<std::size_t>(k - 1)];
    } else {
      RngStream rng = base.child(static_cast<std::uint64_t>(k));
      start = sample_haar_unitary(n, rng);
    }
    return descend_on_unitaries(obj, std::move(start), cfg);
  });
  return reduce_starts(outcomes);
}

}  // namespace mslab
