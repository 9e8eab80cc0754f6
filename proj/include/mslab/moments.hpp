#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mslab/ncpoly.hpp"

namespace mslab {

/// Dense table of complex values on every *-word over x1..x_d of length
/// <= max_len. Letters are coded 2(i-1) + starred; words are indexed by
/// length, then base-2d digits.
class WordTable {
 public:
  WordTable(int d, int max_len);

  int d() const { return d_; }
  int max_len() const { return max_len_; }
  int alphabet() const { return 2 * d_; }
  std::size_t size() const { return values_.size(); }

  Complex at(const StarWord& w) const { return values_[index_of(w)]; }
  Complex& at(const StarWord& w) { return values_[index_of(w)]; }

  Complex operator[](std::size_t idx) const { return values_[idx]; }
  Complex& operator[](std::size_t idx) { return values_[idx]; }

  std::size_t index_of(const StarWord& w) const;
  std::size_t index_of_codes(const int* codes, int len) const;
  /// First index of words of the given length.
  std::size_t offset(int len) const { return offsets_[static_cast<std::size_t>(len)]; }
  StarWord word_at(std::size_t idx) const;
  /// Letter codes of the word at idx (length = returned size).
  std::vector<int> codes_at(std::size_t idx) const;

  const std::vector<Complex>& values() const { return values_; }

 protected:
  int d_;
  int max_len_;
  std::vector<std::size_t> offsets_;
  std::vector<Complex> values_;
};

inline constexpr int kDefaultMaxLen = 6;
inline constexpr int kMaxLenCap = 10;

/// Truncated *-moments tau(w) of a d-tuple.
class MomentVector : public WordTable {
 public:
  MomentVector(int d, int max_len);

  /// Largest |value(w*) - conj(value(w))|.
  double conjugate_symmetry_defect() const;
  /// Largest |value(uv) - value(vu)| over cyclic rotations in range.
  double traciality_defect() const;

  /// Single self-adjoint variable with m_k = moments[k] (moments[0] must be 1).
  static MomentVector from_real_moments(const std::vector<double>& moments);

  /// tau(x1^k) for a single variable.
  Complex power_moment(int k) const;

  /// Truncation to a shorter length bound.
  MomentVector truncated(int max_len) const;
};

/// Free cumulants kappa(w), starred letters treated as distinct letters.
class CumulantVector : public WordTable {
 public:
  CumulantVector(int d, int max_len);
};

struct NonCrossingPartition {
  int n = 0;
  std::vector<std::vector<int>> blocks;  // 1-based, each sorted, ordered by minimum

  bool is_noncrossing() const;
  bool covers_ground_set() const;
  bool operator==(const NonCrossingPartition&) const = default;
  auto operator<=>(const NonCrossingPartition&) const = default;
};

/// All non-crossing partitions of {1..n}, 1 <= n <= 12, in lexicographic
/// order of their block lists.
std::vector<NonCrossingPartition> enumerate_nc(int n);

/// Moebius inversion over the non-crossing lattice using the first-block
/// recursion m(w) = sum_{V containing 1} kappa(w_V) prod m(gaps).
CumulantVector moments_to_cumulants(const MomentVector& mv);
MomentVector cumulants_to_moments(const CumulantVector& cv);

/// Joint moments of the free product: within-family cumulants inherited,
/// mixed cumulants zero. Variables of B are renumbered after those of A.
MomentVector free_product_moments(const MomentVector& a, const MomentVector& b, int max_len);

/// Moments of X + Y for free self-adjoint X ~ mu, Y ~ nu.
MomentVector free_convolve(const MomentVector& mu, const MomentVector& nu, int max_len);

enum class ReferenceLaw { Semicircular, Circular, FreeCircularFamily };

ReferenceLaw parse_reference_law(const std::string& name);

/// Exact moments from the cumulant description. `d` only matters for the
/// circular family.
MomentVector reference_law(ReferenceLaw law, int max_len, int d = 1);

/// Empirical moments tr_n(w(X)).
MomentVector matrix_moments(const MatrixTuple& x, int max_len, bool parallel = true);

nlohmann::json to_json(const MomentVector& mv);
MomentVector moment_vector_from_json(const nlohmann::json& j);

}  // namespace mslab
