#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/formula.hpp"

namespace mslab {

enum class SpecKind { QuantifierFree, Full, Existential };

struct Constraint {
  FormulaPtr phi;
  double target = 0.0;
  double tol = 0.1;
};

/// Constraint set cutting out a microstate space inside the ambient domain
/// {Y : ||Y_j||_op <= r}. For the existential kind the constraints range over
/// d + existential_vars variables and membership asks for a witness in the
/// last existential_vars coordinates.
struct NeighborhoodSpec {
  int d = 1;
  double r = 1.0;
  SpecKind kind = SpecKind::QuantifierFree;
  std::vector<Constraint> constraints;
  Field field = Field::Complex;
  int existential_vars = 0;

  int total_vars() const { return d + existential_vars; }
  /// Throws SpecError on any structural problem.
  void validate() const;
};

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

NeighborhoodSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NeighborhoodSpec& spec);
std::string to_string(SpecKind kind);

/// Spec for (x_1..x_{d1}, x_{d1+1}..x_{d1+d2}): both marginal constraint lists
/// plus `cross` (already written over the joint variables).
NeighborhoodSpec join_specs(const NeighborhoodSpec& a, const NeighborhoodSpec& b,
                            const std::vector<Constraint>& cross = {});

enum class Membership { In, Out, Boundary };

/// Optimizer-uncertainty band for quantified constraints.
inline constexpr double kBoundaryBand = 1e-6;

Membership is_microstate(const MatrixTuple& y, const NeighborhoodSpec& spec, const FormulaConfig& cfg = {});

struct ExistentialResult {
  Membership verdict = Membership::Out;
  MatrixTuple witness;       // last m coordinates when verdict is In
  double residual = 0.0;     // optimizer objective at the witness
  bool heuristic = true;     // Out verdicts may be optimizer misses
};

ExistentialResult existential_membership(const MatrixTuple& x, const NeighborhoodSpec& spec,
                                         const FormulaConfig& cfg = {});

// Volume estimation ---------------------------------------------------------

inline constexpr std::int64_t kMaxSamples = 10'000'000;
inline constexpr int kDefaultMaxN = 16;

struct SamplingConfig {
  std::int64_t samples = 100'000;
  /// Gaussian proposal with per-coordinate variance scale^2 / (k n^2),
  /// k = 2 for complex and 1 for self-adjoint coordinates (scale 1 matches
  /// the Ginibre / GUE normalization).
  double proposal_scale = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Execution execution = Execution::Parallel;
  FormulaConfig formula;
  int max_n = kDefaultMaxN;

  void validate() const;
};

struct VolumeEstimate {
  int n = 0;
  double log_volume = 0.0;  // -inf when no hits
  double ci = 0.0;          // 95% half-width of log_volume (0 when no hits)
  double h = 0.0;           // log_volume / n^2 + k d log n
  double h_ci = 0.0;
  std::int64_t hits = 0;
  std::int64_t samples = 0;
  std::int64_t boundary = 0;
};

/// Log importance weights and per-spec membership masks on one shared set of
/// proposal draws. Sample i comes from its own stream, so the draws do not
/// depend on the specs being scored or on the execution mode.
struct SharedSamples {
  int n = 0;
  int d = 0;
  Field field = Field::Complex;
  std::vector<double> log_weight;
  std::vector<std::vector<std::uint8_t>> masks;      // 1 = In
  std::vector<std::int64_t> boundary_counts;
};

/// Draw sample i of the proposal for (n, d, field) and its log weight
/// -log(gamma(c)).
MatrixTuple draw_proposal(int n, int d, Field field, const SamplingConfig& cfg, std::int64_t i,
                          double* log_weight);

SharedSamples sample_specs(const std::vector<NeighborhoodSpec>& specs, int n, const SamplingConfig& cfg);

VolumeEstimate estimate_from_mask(const std::vector<double>& log_weight, const std::vector<std::uint8_t>& mask,
                                  int n, int d, Field field);

VolumeEstimate estimate_volume(const NeighborhoodSpec& spec, int n, const SamplingConfig& cfg);

/// log vol of the normalized-HS ball of radius r in the real coordinate space
/// of dimension dim.
double log_ball_volume(int dim, double r);

/// Additive normalization k d log n.
double entropy_offset(int n, int d, Field field);

struct Trend {
  double value_at_largest_n = 0.0;
  std::optional<double> intercept;  // least-squares fit h = a + b / n^2 over finite points
  std::optional<double> slope;
};

struct EntropyEstimate {
  std::vector<VolumeEstimate> per_n;
  Trend trend;
};

EntropyEstimate estimate_entropy(const NeighborhoodSpec& spec, const std::vector<int>& n_list,
                                 const SamplingConfig& cfg);

Trend fit_trend(const std::vector<VolumeEstimate>& per_n);

/// log C + d log pi - d(log d - 1) + 2d log(2 sqrt(d) r + 1) + (2d - 1) log eps.
double covering_upper_bound(int d, double r, double eps, double c);

// Independent joins ---------------------------------------------------------

struct McmcConfig {
  int n = 8;
  std::int64_t burn_in = 2'000;
  std::int64_t samples = 20'000;
  int thin = 1;
  double initial_step = 0.05;   // proposal sd per coordinate, relative to 1/n
  int init_tries = 100'000;     // proposal draws allowed to find a feasible start
  double proposal_scale = 1.0;
  std::uint64_t seed = 0;
  FormulaConfig formula;

  void validate() const;
};

struct JoinRatio {
  double ratio = 0.0;
  double ci = 0.0;
  double acceptance[2] = {0.0, 0.0};
  double ess = 0.0;
  std::int64_t samples = 0;
};

struct ChainFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fraction of the product of two uniform microstate distributions that lies
/// in the joint neighborhood, estimated with one random-walk Metropolis chain
/// per factor.
JoinRatio independent_join_ratio(const NeighborhoodSpec& spec1, const NeighborhoodSpec& spec2,
                                 const NeighborhoodSpec& joint, const McmcConfig& cfg);

}  // namespace mslab
