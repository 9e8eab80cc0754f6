#include "mslab/matrix_core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mslab {

MatrixTuple::MatrixTuple(std::vector<Matrix> mats) : mats_(std::move(mats)) {
  if (mats_.empty()) throw std::invalid_argument("MatrixTuple: d must be >= 1");
  const auto n = mats_.front().rows();
  if (n < 1) throw std::invalid_argument("MatrixTuple: n must be >= 1");
  for (const auto& m : mats_) {
    if (m.rows() != n || m.cols() != n) {
      throw std::invalid_argument("MatrixTuple: matrices must be square with a common dimension");
    }
  }
}

MatrixTuple MatrixTuple::zeros(int n, int d) {
  return MatrixTuple(std::vector<Matrix>(static_cast<std::size_t>(d), Matrix::Zero(n, n)));
}

bool MatrixTuple::all_finite() const {
  for (const auto& m : mats_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

MatrixTuple& MatrixTuple::operator+=(const MatrixTuple& other) {
  if (other.d() != d()) throw std::invalid_argument("MatrixTuple: size mismatch");
  for (std::size_t j = 0; j < mats_.size(); ++j) mats_[j] += other.mats_[j];
  return *this;
}

MatrixTuple& MatrixTuple::operator-=(const MatrixTuple& other) {
  if (other.d() != d()) throw std::invalid_argument("MatrixTuple: size mismatch");
  for (std::size_t j = 0; j < mats_.size(); ++j) mats_[j] -= other.mats_[j];
  return *this;
}

MatrixTuple& MatrixTuple::operator*=(double s) {
  for (auto& m : mats_) m *= s;
  return *this;
}

MatrixTuple MatrixTuple::concat(const MatrixTuple& tail) const {
  std::vector<Matrix> all = mats_;
  all.insert(all.end(), tail.mats_.begin(), tail.mats_.end());
  return MatrixTuple(std::move(all));
}

MatrixTuple MatrixTuple::slice(int first, int count) const {
  if (first < 0 || count < 1 || first + count > d()) {
    throw std::out_of_range("MatrixTuple::slice out of range");
  }
  return MatrixTuple(std::vector<Matrix>(mats_.begin() + first, mats_.begin() + first + count));
}

Complex normalized_trace(const Matrix& x) {
  return x.trace() / static_cast<double>(x.rows());
}

Complex hs_inner(const MatrixTuple& x, const MatrixTuple& y) {
  if (x.d() != y.d() || x.n() != y.n()) {
    throw std::invalid_argument("hs_inner: dimension mismatch (d " + std::to_string(x.d()) + " vs " +
                                std::to_string(y.d()) + ", n " + std::to_string(x.n()) + " vs " +
                                std::to_string(y.n()) + ")");
  }
  Complex total = 0.0;
  for (int j = 0; j < x.d(); ++j) {
    // tr(X^* Y) = sum_ik conj(X_ik) Y_ik
    total += x[j].cwiseProduct(y[j].conjugate()).sum();
  }
  return std::conj(total) / static_cast<double>(x.n());
}

double hs_norm_sq(const Matrix& x) { return x.squaredNorm() / static_cast<double>(x.rows()); }

double hs_norm_sq(const MatrixTuple& x) {
  double s = 0.0;
  for (const auto& m : x) s += hs_norm_sq(m);
  return s;
}

double hs_norm(const MatrixTuple& x) { return std::sqrt(hs_norm_sq(x)); }

double operator_norm(const Matrix& x) {
  if (x.rows() == 1) return std::abs(x(0, 0));
  const Matrix gram = x.adjoint() * x;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

MatrixTuple sample_ginibre(int n, int d, RngStream& rng) {
  if (n < 1 || d < 1) throw std::invalid_argument("sample_ginibre: n, d must be >= 1");
  const double sd = std::sqrt(0.5 / n);
  std::vector<Matrix> mats;
  mats.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    Matrix z(n, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) {
        const double re = rng.normal();
        const double im = rng.normal();
        z(r, c) = Complex(sd * re, sd * im);
      }
    }
    mats.push_back(std::move(z));
  }
  return MatrixTuple(std::move(mats));
}

Matrix sample_gue(int n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("sample_gue: n must be >= 1");
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  const double off = s / std::sqrt(2.0);
  Matrix x(n, n);
  for (int i = 0; i < n; ++i) {
    x(i, i) = Complex(s * rng.normal(), 0.0);
    for (int j = i + 1; j < n; ++j) {
      const double re = rng.normal();
      const double im = rng.normal();
      x(i, j) = Complex(off * re, off * im);
      x(j, i) = std::conj(x(i, j));
    }
  }
  return x;
}

Matrix sample_haar_unitary(int n, RngStream& rng) {
  const Matrix z = sample_ginibre(n, 1, rng)[0];
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (int k = 0; k < n; ++k) {
    const Complex rkk = r(k, k);
    const double mag = std::abs(rkk);
    const Complex phase = mag > 0.0 ? rkk / mag : Complex(1.0, 0.0);
    q.col(k) *= phase;
  }
  return q;
}

SelfAdjointPart symmetrize(const Matrix& h) {
  const Matrix anti = 0.5 * (h - h.adjoint());
  return {0.5 * (h + h.adjoint()), anti.cwiseAbs().maxCoeff()};
}

Matrix unitary_from_hermitian(const Matrix& h) {
  auto sa = symmetrize(h);
  if (sa.correction > kHermitianTolerance) {
    throw std::invalid_argument("unitary_from_hermitian: input not self-adjoint (residual " +
                                std::to_string(sa.correction) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sa.value);
  const Eigen::VectorXd& lambda = es.eigenvalues();
  Eigen::VectorXcd phases(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) phases(k) = std::polar(1.0, lambda(k));
  const Matrix& v = es.eigenvectors();
  return v * phases.asDiagonal() * v.adjoint();
}

Eigen::VectorXd spectrum(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(h).value, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

int real_dimension(int n, Field field) {
  return field == Field::Complex ? 2 * n * n : n * n;
}

Eigen::VectorXd to_coordinates(const Matrix& x, Field field) {
  const int n = static_cast<int>(x.rows());
  const double rn = std::sqrt(static_cast<double>(n));
  Eigen::VectorXd c(real_dimension(n, field));
  int k = 0;
  if (field == Field::Complex) {
    for (int col = 0; col < n; ++col) {
      for (int row = 0; row < n; ++row) {
        c(k++) = x(row, col).real() / rn;
        c(k++) = x(row, col).imag() / rn;
      }
    }
    return c;
  }
  const double off = std::sqrt(2.0 / n);
  for (int i = 0; i < n; ++i) c(k++) = x(i, i).real() / rn;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      c(k++) = x(i, j).real() * off;
      c(k++) = x(i, j).imag() * off;
    }
  }
  return c;
}

Matrix from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& c, int n, Field field) {
  if (c.size() != real_dimension(n, field)) {
    throw std::invalid_argument("from_coordinates: wrong coordinate count");
  }
  const double rn = std::sqrt(static_cast<double>(n));
  Matrix x(n, n);
  int k = 0;
  if (field == Field::Complex) {
    for (int col = 0; col < n; ++col) {
      for (int row = 0; row < n; ++row) {
        x(row, col) = Complex(c(k) * rn, c(k + 1) * rn);
        k += 2;
      }
    }
    return x;
  }
  const double off = std::sqrt(n / 2.0);
  for (int i = 0; i < n; ++i) x(i, i) = Complex(c(k++) * rn, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      x(i, j) = Complex(c(k) * off, c(k + 1) * off);
      x(j, i) = std::conj(x(i, j));
      k += 2;
    }
  }
  return x;
}

Matrix project_to_field(const Matrix& g, Field field) {
  if (field == Field::Complex) return g;
  return 0.5 * (g + g.adjoint());
}

}  // namespace mslab
