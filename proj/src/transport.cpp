#include "mslab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mslab {

void SpectralMeasure::validate() const {
  if (atoms.empty()) throw std::invalid_argument("spectral measure: no atoms");
  double total = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const auto [loc, w] = atoms[k];
    if (!std::isfinite(loc) || !std::isfinite(w)) throw std::invalid_argument("spectral measure: non-finite atom");
    if (!(w > 0.0)) throw std::invalid_argument("spectral measure: weights must be positive");
    if (k > 0 && loc < atoms[k - 1].first) throw std::invalid_argument("spectral measure: locations not sorted");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "spectral measure: weights sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
}

SpectralMeasure SpectralMeasure::of_matrix(const Matrix& h) {
  if (!is_self_adjoint(h)) throw std::invalid_argument("spectral measure: matrix is not self-adjoint");
  const Eigen::VectorXd ev = spectrum(h);
  const double w = 1.0 / static_cast<double>(ev.size());
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index k = 0; k < ev.size(); ++k) atoms.emplace_back(ev(k), w);
  std::sort(atoms.begin(), atoms.end());
  SpectralMeasure mu{std::move(atoms)};
  // Equal weights 1/n may accumulate rounding in the sum; renormalize the last atom.
  double head = 0.0;
  for (std::size_t k = 0; k + 1 < mu.atoms.size(); ++k) head += mu.atoms[k].second;
  mu.atoms.back().second = 1.0 - head;
  return mu;
}

SpectralMeasure SpectralMeasure::from_atoms(std::vector<std::pair<double, double>> atoms) {
  std::sort(atoms.begin(), atoms.end());
  SpectralMeasure mu;
  for (const auto& a : atoms) {
    if (!mu.atoms.empty() && mu.atoms.back().first == a.first) {
      mu.atoms.back().second += a.second;
    } else {
      mu.atoms.push_back(a);
    }
  }
  mu.validate();
  return mu;
}

std::vector<double> SpectralMeasure::quantiles(int n) const {
  validate();
  if (n < 1) throw std::invalid_argument("quantiles: n must be positive");
  std::vector<double> out(static_cast<std::size_t>(n));
  double cum = 0.0;
  std::size_t a = 0;
  for (int k = 0; k < n; ++k) {
    const double p = (k + 0.5) / n;
    while (a + 1 < atoms.size() && cum + atoms[a].second <= p) {
      cum += atoms[a].second;
      ++a;
    }
    out[static_cast<std::size_t>(k)] = atoms[a].first;
  }
  return out;
}

double SpectralMeasure::moment(int k) const {
  double s = 0.0;
  for (const auto& [loc, w] : atoms) s += w * std::pow(loc, k);
  return s;
}

SpectralMeasure read_spectral_csv(std::istream& in) {
  std::string line;
  std::vector<std::pair<double, double>> atoms;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_of("0123456789") == std::string::npos) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("spectral csv line " + std::to_string(lineno) + ": expected location,weight");
    }
    try {
      atoms.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw std::invalid_argument("spectral csv line " + std::to_string(lineno) + ": not a number");
    }
  }
  return SpectralMeasure::from_atoms(std::move(atoms));
}

void write_spectral_csv(std::ostream& out, const SpectralMeasure& mu) {
  out << "location,weight\n";
  out.precision(17);
  for (const auto& [loc, w] : mu.atoms) out << loc << ',' << w << '\n';
}

std::string to_string(SpechtVerdict v) {
  switch (v) {
    case SpechtVerdict::Equivalent: return "equivalent";
    case SpechtVerdict::Distinct: return "distinct";
    case SpechtVerdict::Undetermined: return "undetermined";
  }
  return "undetermined";
}

bool is_self_adjoint(const Matrix& x, double tol) {
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  return (x - x.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

namespace {

// Depth-first walk over words of a fixed length, sharing prefix products.
struct SpechtWalk {
  std::vector<Matrix> letters_x, letters_y;
  int n = 0;
  double max_dev = 0.0;
  std::int64_t words = 0;

  bool walk(int remaining, const Matrix& px, const Matrix& py) {
    if (remaining == 0) {
      ++words;
      const Complex tx = px.trace() / static_cast<double>(n);
      const Complex ty = py.trace() / static_cast<double>(n);
      const double gap = std::abs(tx - ty);
      const double scale = std::max({1.0, std::abs(tx), std::abs(ty)});
      max_dev = std::max(max_dev, gap);
      return gap <= kSpechtTolerance * scale;
    }
    for (std::size_t a = 0; a < letters_x.size(); ++a) {
      if (!walk(remaining - 1, Matrix(px * letters_x[a]), Matrix(py * letters_y[a]))) return false;
    }
    return true;
  }
};

}  // namespace

SpechtResult specht_equivalent(const MatrixTuple& x, const MatrixTuple& y, int max_len, std::int64_t word_cap) {
  if (x.n() != y.n() || x.d() != y.d()) throw std::invalid_argument("specht_equivalent: tuple shapes differ");
  if (max_len < 1) throw std::invalid_argument("specht_equivalent: max_len must be at least 1");
  SpechtResult res;
  res.sufficiency_bound = x.n() * x.n();
  SpechtWalk walk;
  walk.n = x.n();
  for (int j = 0; j < x.d(); ++j) {
    walk.letters_x.push_back(x[j]);
    walk.letters_x.push_back(x[j].adjoint());
    walk.letters_y.push_back(y[j]);
    walk.letters_y.push_back(y[j].adjoint());
  }
  const Matrix id = Matrix::Identity(x.n(), x.n());
  const double alphabet = 2.0 * x.d();
  for (int len = 1; len <= max_len; ++len) {
    if (static_cast<double>(walk.words) + std::pow(alphabet, len) > static_cast<double>(word_cap)) {
      res.capped = true;
      break;
    }
    if (!walk.walk(len, id, id)) {
      res.verdict = SpechtVerdict::Distinct;
      res.mismatch_len = len;
      break;
    }
    res.checked_len = len;
  }
  res.words_checked = walk.words;
  res.max_deviation = walk.max_dev;
  if (res.verdict != SpechtVerdict::Distinct) {
    res.verdict = res.checked_len >= res.sufficiency_bound ? SpechtVerdict::Equivalent : SpechtVerdict::Undetermined;
  }
  return res;
}

namespace {

// Unitary whose conjugation maps the sorted eigenbasis of a onto that of b.
Matrix eigen_alignment(const Matrix& a, const Matrix& b) {
  const auto sa = symmetrize(a).value;
  const auto sb = symmetrize(b).value;
  Eigen::SelfAdjointEigenSolver<Matrix> ea(sa), eb(sb);
  return eb.eigenvectors() * ea.eigenvectors().adjoint();
}

}  // namespace

PsiResult psi_distance(const MatrixTuple& x, const MatrixTuple& y, const OptConfig& cfg) {
  if (x.n() != y.n() || x.d() != y.d()) throw std::invalid_argument("psi_distance: tuple shapes differ");
  const int n = x.n();
  const int d = x.d();
  const double inv_n = 1.0 / static_cast<double>(n);
  const UnitaryObjective obj = [&](const Matrix& u, Matrix* grad) {
    double f = 0.0;
    if (grad) grad->setZero(n, n);
    for (int j = 0; j < d; ++j) {
      const Matrix ux = u * x[j];
      const Matrix e = ux * u.adjoint() - y[j];
      f += e.squaredNorm() * inv_n;
      if (grad) *grad += 2.0 * (e * u * x[j].adjoint() + e.adjoint() * ux);
    }
    return f;
  };
  std::vector<Matrix> extra;
  if (d >= 1 && is_self_adjoint(x[0]) && is_self_adjoint(y[0])) extra.push_back(eigen_alignment(x[0], y[0]));
  const auto opt = minimize_over_unitaries(obj, n, cfg, extra);
  PsiResult res;
  res.distance = std::sqrt(std::max(0.0, opt.value));
  res.unitary = opt.witness[0];
  res.converged = opt.converged;
  return res;
}

double wasserstein_spectral(const SpectralMeasure& mu, const SpectralMeasure& nu) {
  mu.validate();
  nu.validate();
  // Walk both cumulative distribution functions together.
  std::size_t i = 0, j = 0;
  double left_i = mu.atoms[0].second, left_j = nu.atoms[0].second;
  double acc = 0.0;
  while (i < mu.atoms.size() && j < nu.atoms.size()) {
    const double mass = std::min(left_i, left_j);
    const double gap = mu.atoms[i].first - nu.atoms[j].first;
    acc += mass * gap * gap;
    left_i -= mass;
    left_j -= mass;
    if (left_i <= 1e-15 && ++i < mu.atoms.size()) left_i += mu.atoms[i].second;
    if (left_j <= 1e-15 && ++j < nu.atoms.size()) left_j += nu.atoms[j].second;
  }
  return std::sqrt(acc);
}

double wasserstein_matrix(const Matrix& x, const Matrix& y, const OptConfig& cfg) {
  if (x.rows() != y.rows()) throw std::invalid_argument("wasserstein_matrix: sizes differ");
  if (!is_self_adjoint(x) || !is_self_adjoint(y)) {
    throw std::invalid_argument("wasserstein_matrix: inputs must be self-adjoint");
  }
  return psi_distance(MatrixTuple({x}), MatrixTuple({y}), cfg).distance;
}

}  // namespace mslab
