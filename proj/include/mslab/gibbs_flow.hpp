#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "mslab/formula.hpp"
#include "mslab/moments.hpp"

namespace mslab {

/// Quadratic envelope a + b||X||_2^2 <= V(X) <= A + B||X||_2^2.
struct PotentialBounds {
  double a = 0.0;
  double b = 0.0;
  double A = 0.0;
  double B = 0.0;
};

/// Quantifier-free real-valued potential on d-tuples.
struct Potential {
  FormulaPtr phi;
  int d = 1;
  Field field = Field::Complex;
  PotentialBounds bounds;

  double value(const MatrixTuple& x) const;
  /// V(X) and its gradient projected onto the field, dV = Re <G, dX>.
  double gradient(const MatrixTuple& x, MatrixTuple* grad) const;
};

struct PotentialError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kBoundCheckSamples = 1000;

/// Structural checks (quantifier-free, variables within d, b > 0, B >= b)
/// followed by the envelope test on kBoundCheckSamples random tuples of size
/// n whose operator norms are spread over [0, radius]. Throws PotentialError
/// naming the first violation.
void check_potential(const Potential& v, int n = 6, double radius = 3.0, std::uint64_t seed = 0);

/// Largest relative deviation between Re <G, H> and the central finite
/// difference of V along random directions H.
double gradient_check(const Potential& v, int n, int directions = 8, std::uint64_t seed = 0);

Potential potential_from_json(const nlohmann::json& j, Field field = Field::Complex);

// Langevin --------------------------------------------------------------------

/// Chain state. The update in orthonormal coordinates c is
///   c <- c - eps grad V(c) + sqrt(2 eps / n^2) xi,
/// a standard Euler-Maruyama step for the density e^{-n^2 V} with time step
/// eps / n^2. `t` accumulates eps.
struct LangevinState {
  MatrixTuple x;
  double step = 0.01;
  double t = 0.0;
  std::int64_t rejected = 0;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kDivergenceNorm = 1e6;

/// Step size keeping the stationary-variance bias of the quadratic envelope
/// below 1%: 0.01 / B.
double default_step(const Potential& v);
/// Stability limit 1 / B.
double max_step(const Potential& v);

/// One update. A non-finite gradient halves the step and leaves x in place;
/// a norm above kDivergenceNorm throws DivergenceError.
void langevin_step(LangevinState& state, const Potential& v, RngStream& rng);

struct GibbsConfig {
  int n = 64;
  std::int64_t burn_in = 500;
  std::int64_t samples = 2000;
  int thin = 5;
  int max_len = 4;
  int chains = 2;
  double step = 0.0;  // 0 selects default_step
  std::uint64_t seed = 0;
  Execution execution = Execution::Parallel;
  double gradient_tolerance = 1e-5;

  void validate() const;
};

struct GibbsResult {
  MomentVector moments{1, 0};
  std::vector<double> ci;        // 95% half-width per table entry (real part), batch means
  double tau_m2 = 0.0;           // integrated autocorrelation of tr(x1* x1), in recorded samples
  double step = 0.0;
  double gradient_error = 0.0;
  std::int64_t recorded = 0;
  std::int64_t rejected = 0;
};

/// Time-averaged word traces over `chains` independent chains, each started at
/// zero and run for burn_in + samples * thin steps. The gradient check gates
/// the run.
GibbsResult sample_gibbs_moments(const Potential& v, const GibbsConfig& cfg);

/// Limit moments of e^{-n Tr(x^2/2 + g x^4)} for 0 <= g <= 0.5 via the planar
/// one-cut solution; a^2 solves a^2 = 1 / (1 + 12 g a^2).
MomentVector dyson_schwinger_quartic(double g, int max_len = 8);

// Hopf-Lax ------------------------------------------------------------------

struct HopfLaxConfig {
  int z_samples = 1000;
  bool antithetic = true;  // use Z and -Z in pairs
  bool per_sample = false; // average of per-draw infima instead of the infimum of the average
  OptConfig opt;
  std::uint64_t seed = 0;

  HopfLaxConfig();
  void validate() const;
};

struct HopfLaxResult {
  double value = 0.0;
  MatrixTuple witness;  // A (first-step shift for iterates)
  double mc_error = 0.0;
  bool converged = false;
};

/// Phi_t V(X) = inf_A E[V(X + A + Z_t)] + ||A||_2^2 / (2t), Z_t = sqrt(2t)
/// times a Ginibre (or GUE) tuple, so E||Z_t||^2 = 2td. The infimum runs over
/// the ball of radius 10 ||X||_op + 10 with common random numbers.
HopfLaxResult hopf_lax_step(const Potential& v, double t, const MatrixTuple& x, const HopfLaxConfig& cfg);

/// k-fold composition of Phi_{t/k}, as the value of the k-stage control
/// problem restricted to affine feedback A_j = B_j - kappa_j X_j. k = 1 is
/// hopf_lax_step.
HopfLaxResult hopf_lax_iterate(const Potential& v, double t, int k, const MatrixTuple& x, const HopfLaxConfig& cfg);

/// Values for k = 1, 2, 4, ..., up to k_max.
std::vector<std::pair<int, HopfLaxResult>> hopf_lax_sequence(const Potential& v, double t, int k_max,
                                                             const MatrixTuple& x, const HopfLaxConfig& cfg);

}  // namespace mslab
