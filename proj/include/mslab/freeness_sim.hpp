#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/microstates.hpp"
#include "mslab/moments.hpp"
#include "mslab/transport.hpp"

namespace mslab {

/// Law of one self-adjoint variable, realized at size n by midpoint quantiles.
struct LawSpec {
  enum class Kind { Atoms, Semicircle };
  Kind kind = Kind::Semicircle;
  SpectralMeasure atoms;  // used when kind == Atoms

  static LawSpec semicircle();
  static LawSpec from_atoms(std::vector<std::pair<double, double>> atoms);

  std::vector<double> quantiles(int n) const;
  /// Moments of the law itself (not of its discretization).
  std::vector<double> moments(int max_k) const;
  Matrix diagonal(int n) const;
};

LawSpec law_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LawSpec& law);

/// Inverse CDF of the standard semicircle law on [-2, 2].
double semicircle_quantile(double p);

/// tr_n(h^k) for k = 0..max_k, using half powers so that products of two
/// stored powers give every trace.
std::vector<double> power_traces(const Matrix& h, int max_k);

// Asymptotic freeness -------------------------------------------------------

struct FreenessRow {
  int n = 0;
  double mean_deviation = 0.0;
  double max_deviation = 0.0;
  double exceed_frequency = 0.0;  // fraction of trials with deviation > epsilon
  double self_invariance = 0.0;   // worst change of a tuple's own word traces under conjugation
  std::vector<double> per_trial;
};

struct FreenessConfig {
  std::vector<int> n_list{64, 512};
  int max_len = 4;
  int trials = 10;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
  Execution execution = Execution::Parallel;

  void validate() const;
};

/// For each n the tuples diag(quantiles) are conjugated by independent Haar
/// unitaries; the joint word traces are compared with the free product of
/// the two size-n marginals.
std::vector<FreenessRow> asymptotic_freeness_experiment(const std::vector<LawSpec>& x, const std::vector<LawSpec>& y,
                                                        const FreenessConfig& cfg);

// Free convolution ------------------------------------------------------------

struct ConvolutionRow {
  int k = 0;
  double empirical = 0.0;    // mean of tr(H^k) over trials
  double spread = 0.0;       // sample standard deviation over trials
  double oracle = 0.0;       // free convolution of the size-n marginals
  double limit = 0.0;        // free convolution of the laws
  double deviation = 0.0;    // |empirical - oracle|
};

struct ConvolutionConfig {
  int n = 1024;
  int trials = 4;
  int max_len = 6;
  std::uint64_t seed = 0;
  Execution execution = Execution::Parallel;

  void validate() const;
};

/// Moments of A + U B U* with A, B quantile diagonals and U Haar.
std::vector<ConvolutionRow> free_convolution_experiment(const LawSpec& mu, const LawSpec& nu,
                                                        const ConvolutionConfig& cfg);

// Entropy additivity -------------------------------------------------------------

struct AdditivityRow {
  int n = 0;
  VolumeEstimate first;
  VolumeEstimate second;
  double h_joint = 0.0;      // h_n of the joint spec
  double ratio = 0.0;        // weighted fraction of hit pairs inside the joint spec
  double ratio_ci = 0.0;
  double deficit = 0.0;      // h_1 + h_2 - h_joint = -log(ratio) / n^2
  std::int64_t pairs = 0;
};

inline constexpr std::int64_t kMaxAdditivityPairs = 1'000'000;

/// Volumes of the two marginal specs on independent proposal streams, and
/// the joint volume as their product times the weighted fraction of hit
/// pairs (X_i, Y_j) that satisfy the joint spec. When the joint spec is just
/// the two marginal constraint lists, every hit pair qualifies and
/// additivity holds exactly.
std::vector<AdditivityRow> entropy_additivity_experiment(const NeighborhoodSpec& spec1,
                                                         const NeighborhoodSpec& spec2,
                                                         const std::vector<Constraint>& cross,
                                                         const std::vector<int>& n_list,
                                                         const SamplingConfig& cfg);

// Example 5.3 -------------------------------------------------------------------------

struct OrbitFixture {
  MatrixTuple x;
  MatrixTuple y;
  int matched_degree = 1;
  double gap = 0.0;  // lower bound for psi(X, Y)
};

OrbitFixture orbit_fixture_from_json(const nlohmann::json& j);

struct FixtureError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Example53Config {
  int trials = 20;
  int moment_len = 4;  // length of the reported moment table
  OptConfig psi;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Example53Report {
  std::vector<double> psi_same;   // (A): psi(U X U*, V X V*)
  std::vector<double> psi_other;  // (B): psi(U X U*, V Y V*)
  double mean_same = 0.0;
  double mean_other = 0.0;
  double psi_fixture = 0.0;
  MomentVector moments_x{1, 0};
  MomentVector moments_y{1, 0};
  double matched_deviation = 0.0;  // largest gap over words of length <= matched_degree, averaged conjugates
};

/// Checks the fixture (moments agree to matched_degree within 1e-10, psi
/// above the gap), then runs both configurations with independent Haar
/// conjugations.
Example53Report example_5_3_runner(const OrbitFixture& fixture, const Example53Config& cfg);

}  // namespace mslab
