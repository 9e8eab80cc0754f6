#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "mslab/matrix_core.hpp"

namespace mslab {

/// A variable name: `x<k>` (free, bound to tuple slot k) or `y<k>` (bound by
/// a quantifier). Indices start at 1.
struct Var {
  char kind = 'x';
  int index = 1;

  auto operator<=>(const Var&) const = default;
  std::string name() const { return std::string(1, kind) + std::to_string(index); }
};

struct Letter {
  Var var;
  bool starred = false;

  auto operator<=>(const Letter&) const = default;
};

/// Monomial in the variables and their adjoints; empty word is the unit.
struct StarWord {
  std::vector<Letter> letters;

  auto operator<=>(const StarWord&) const = default;

  std::size_t length() const { return letters.size(); }
  bool empty() const { return letters.empty(); }

  /// Reverses and toggles every star: the word of the adjoint.
  StarWord adjoint() const;

  /// "x1 x2* x1"; "" for the unit.
  std::string to_string() const;
};

StarWord word_of_free(std::initializer_list<std::pair<int, bool>> letters);

/// Finite map word -> coefficient; never stores zero coefficients.
class StarPolynomial {
 public:
  StarPolynomial() = default;

  static StarPolynomial monomial(StarWord w, Complex c = 1.0);
  static StarPolynomial constant(Complex c);

  void add_term(const StarWord& w, Complex c);

  const std::map<StarWord, Complex>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  StarPolynomial adjoint() const;

  StarPolynomial& operator+=(const StarPolynomial& other);
  friend StarPolynomial operator+(StarPolynomial a, const StarPolynomial& b) { return a += b; }
  friend StarPolynomial operator*(const StarPolynomial& a, const StarPolynomial& b);
  friend StarPolynomial operator*(Complex c, StarPolynomial p);

  bool operator==(const StarPolynomial& other) const = default;

  /// Largest word length.
  std::size_t degree() const;

 private:
  std::map<StarWord, Complex> terms_;
};

/// Resolves variables to matrices during evaluation.
class Assignment {
 public:
  explicit Assignment(const MatrixTuple& free) : free_(&free) {}

  const Matrix& lookup(const Var& v) const;
  int n() const { return free_->n(); }
  const MatrixTuple& free() const { return *free_; }

  void bind(const Var& v, const Matrix* value);
  void unbind(const Var& v);
  bool is_bound(const Var& v) const;

 private:
  const MatrixTuple* free_;
  std::vector<std::pair<Var, const Matrix*>> bound_;
};

/// w(X) as a matrix.
Matrix eval_word(const StarWord& w, const Assignment& a);

/// tr_n(w(X)) without forming the last product.
Complex word_trace(const StarWord& w, const Assignment& a);
Complex word_trace(const StarWord& w, const MatrixTuple& x);

/// p(X). Throws std::out_of_range if p mentions x_k with k > X.d().
Matrix eval_polynomial(const StarPolynomial& p, const MatrixTuple& x);
Matrix eval_polynomial(const StarPolynomial& p, const Assignment& a);

/// Every *-word over variables x1..x_d with length in [1, max_len], ordered
/// by length then lexicographically (x1 < x1* < x2 < ...).
std::vector<StarWord> enumerate_star_words(int d, int max_len);

/// tr_n of each word, computed by depth-first prefix reuse.
/// The parallel kernel splits the first letter across threads; the serial
/// path is the reference. Results are identical.
std::vector<Complex> word_traces(const MatrixTuple& x, const std::vector<StarWord>& words,
                                 bool parallel = true);

}  // namespace mslab
