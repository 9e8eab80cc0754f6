#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mslab/matrix_core.hpp"

namespace mslab {

/// Selects between the OpenMP kernel and its serial reference. Both produce
/// bit-identical results; the serial path exists for testing.
enum class Execution { Serial, Parallel };

struct OptConfig {
  int starts = 8;
  int max_iters = 500;
  double step_init = 1.0;
  double tol = 1e-8;  // projected / Riemannian gradient norm
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Execution execution = Execution::Parallel;

  void validate() const;
};

struct OptResult {
  double value = 0.0;
  MatrixTuple witness;
  bool converged = false;
  int iters_used = 0;
  int best_start = 0;
  int failed_starts = 0;
  std::vector<double> history;  // objective after each accepted step of the best start
};

/// f(Y); when `grad` is non-null it receives G with df = Re<G, dY>.
using TupleObjective = std::function<double(const MatrixTuple& y, MatrixTuple* grad)>;

/// Same contract for a single unitary argument (Euclidean gradient).
using UnitaryObjective = std::function<double(const Matrix& u, Matrix* grad)>;

/// Clips every singular value of every matrix at r.
MatrixTuple project_opnorm_ball(const MatrixTuple& x, double r);

/// Largest operator norm across the tuple.
double max_operator_norm(const MatrixTuple& x);

/// Projected gradient descent over (D_r)^d, multi-start.
///
/// Start 0 is the zero tuple, then `extra_starts` (projected), then scaled
/// Ginibre draws from (cfg.seed, cfg.stream). Each start runs backtracking
/// Armijo steps seeded with Barzilai-Borwein lengths, so its objective never
/// increases. The best start wins; ties go to the lower index. The returned
/// value is f at a feasible witness, hence an upper bound on the infimum.
OptResult minimize_over_ball(const TupleObjective& obj, double r, int n, int d,
                             const OptConfig& cfg,
                             const std::vector<MatrixTuple>& extra_starts = {});

/// Riemannian descent on U(n) with Cayley steps
/// U <- (I + eta A/2)^{-1} (I - eta A/2) U, A the
/// skew-Hermitian part of G U^*. Re-unitarized by QR every 50 iterations.
/// The witness is returned as a 1-tuple.
OptResult minimize_over_unitaries(const UnitaryObjective& obj, int n, const OptConfig& cfg,
                                  const std::vector<Matrix>& extra_starts = {});

}  // namespace mslab
