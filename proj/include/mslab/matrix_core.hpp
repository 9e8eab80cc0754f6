#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "mslab/rng.hpp"

namespace mslab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

/// d-tuple of n x n complex matrices sharing one dimension.
class MatrixTuple {
 public:
  MatrixTuple() = default;
  explicit MatrixTuple(std::vector<Matrix> mats);

  static MatrixTuple zeros(int n, int d);

  int d() const { return static_cast<int>(mats_.size()); }
  int n() const { return mats_.empty() ? 0 : static_cast<int>(mats_.front().rows()); }

  const Matrix& operator[](int j) const { return mats_[static_cast<std::size_t>(j)]; }
  Matrix& operator[](int j) { return mats_[static_cast<std::size_t>(j)]; }

  const std::vector<Matrix>& mats() const { return mats_; }
  auto begin() const { return mats_.begin(); }
  auto end() const { return mats_.end(); }

  bool all_finite() const;

  MatrixTuple& operator+=(const MatrixTuple& other);
  MatrixTuple& operator-=(const MatrixTuple& other);
  MatrixTuple& operator*=(double s);

  friend MatrixTuple operator+(MatrixTuple a, const MatrixTuple& b) { return a += b; }
  friend MatrixTuple operator-(MatrixTuple a, const MatrixTuple& b) { return a -= b; }
  friend MatrixTuple operator*(double s, MatrixTuple a) { return a *= s; }

  /// Appends the matrices of `tail` (same n).
  MatrixTuple concat(const MatrixTuple& tail) const;
  /// Matrices [first, first + count).
  MatrixTuple slice(int first, int count) const;

 private:
  std::vector<Matrix> mats_;
};

/// Whether microstates range over all matrices or over self-adjoint ones.
enum class Field { Complex, SelfAdjoint };

Complex normalized_trace(const Matrix& x);

/// sum_j tr_n(X_j^* Y_j)
Complex hs_inner(const MatrixTuple& x, const MatrixTuple& y);

/// ||X||_2^2 = tr_n(X^* X)
double hs_norm_sq(const Matrix& x);
double hs_norm_sq(const MatrixTuple& x);
double hs_norm(const MatrixTuple& x);

/// Largest singular value (from the eigenvalues of X^* X).
double operator_norm(const Matrix& x);

/// Entries i.i.d. complex Gaussian with E|z_ij|^2 = 1/n.
MatrixTuple sample_ginibre(int n, int d, RngStream& rng);

/// Self-adjoint, normalized so the spectrum fills [-2, 2].
Matrix sample_gue(int n, RngStream& rng);

/// Haar unitary via Ginibre QR with the phases of R's diagonal removed.
Matrix sample_haar_unitary(int n, RngStream& rng);

struct SelfAdjointPart {
  Matrix value;
  double correction = 0.0;  // max-entry size of the discarded anti-Hermitian part
};

SelfAdjointPart symmetrize(const Matrix& h);

inline constexpr double kHermitianTolerance = 1e-10;

/// e^{iH} for self-adjoint H via eigendecomposition.
/// Throws std::invalid_argument when H is not self-adjoint within tolerance.
Matrix unitary_from_hermitian(const Matrix& h);

/// Ascending eigenvalues of a self-adjoint matrix.
Eigen::VectorXd spectrum(const Matrix& h);

// Coordinates: an orthonormal basis for Re<X, Y> with the normalized trace.
// Complex field: sqrt(n) E_ij (real and imaginary directions), 2n^2 coords.
// Self-adjoint field: sqrt(n) E_ii and sqrt(n/2)(E_ij + E_ji),
// i sqrt(n/2)(E_ij - E_ji) for i < j, n^2 coords.

int real_dimension(int n, Field field);
Eigen::VectorXd to_coordinates(const Matrix& x, Field field);
Matrix from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& c, int n, Field field);

/// Projects a gradient onto the tangent space of the field (Hermitian part
/// for self-adjoint microstates).
Matrix project_to_field(const Matrix& g, Field field);

}  // namespace mslab
