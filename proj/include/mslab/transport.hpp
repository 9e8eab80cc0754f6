#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mslab/optimize.hpp"

namespace mslab {

/// Finitely supported probability measure on the real line.
struct SpectralMeasure {
  std::vector<std::pair<double, double>> atoms;  // (location, weight), sorted by location

  /// Throws invalid_argument unless weights are positive, sum to 1 within
  /// 1e-12 and locations are sorted.
  void validate() const;

  /// Empirical eigenvalue distribution of a self-adjoint matrix.
  static SpectralMeasure of_matrix(const Matrix& h);
  /// Sorts, merges equal locations and rescales nothing; validates.
  static SpectralMeasure from_atoms(std::vector<std::pair<double, double>> atoms);

  /// n points at the midpoint quantiles (k + 1/2)/n.
  std::vector<double> quantiles(int n) const;
  double moment(int k) const;
};

/// CSV with header "location,weight".
SpectralMeasure read_spectral_csv(std::istream& in);
void write_spectral_csv(std::ostream& out, const SpectralMeasure& mu);

enum class SpechtVerdict { Equivalent, Distinct, Undetermined };
std::string to_string(SpechtVerdict v);

inline constexpr double kSpechtTolerance = 1e-8;
inline constexpr std::int64_t kSpechtWordCap = 20'000'000;

struct SpechtResult {
  SpechtVerdict verdict = SpechtVerdict::Undetermined;
  int checked_len = 0;        // longest length fully compared
  int sufficiency_bound = 0;  // n^2
  int mismatch_len = 0;       // length of the first mismatching word, 0 if none
  double max_deviation = 0.0;
  std::int64_t words_checked = 0;
  bool capped = false;        // word budget ran out before max_len
};

/// Compares tr_n(w(X)) and tr_n(w(Y)) over *-words of length <= max_len,
/// shortest first. A word differs when the gap exceeds 1e-8 relative to
/// max(1, |tr w(X)|, |tr w(Y)|).
SpechtResult specht_equivalent(const MatrixTuple& x, const MatrixTuple& y, int max_len,
                               std::int64_t word_cap = kSpechtWordCap);

struct PsiResult {
  double distance = 0.0;
  Matrix unitary;
  bool converged = false;
};

/// inf_U ||U X U* - Y||_2 over U(n), as an upper bound from multistart
/// Riemannian descent. When the first coordinates of both tuples are
/// self-adjoint, the eigenbasis alignment with sorted spectra is added as an
/// extra start.
PsiResult psi_distance(const MatrixTuple& x, const MatrixTuple& y, const OptConfig& cfg = {});

/// L2 Wasserstein distance via the monotone (quantile) coupling.
double wasserstein_spectral(const SpectralMeasure& mu, const SpectralMeasure& nu);

/// Orbit distance of two self-adjoint matrices.
double wasserstein_matrix(const Matrix& x, const Matrix& y, const OptConfig& cfg = {});

bool is_self_adjoint(const Matrix& x, double tol = 1e-10);

}  // namespace mslab
