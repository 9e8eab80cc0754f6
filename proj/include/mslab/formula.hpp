#pragma once

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mslab/ncpoly.hpp"
#include "mslab/optimize.hpp"

namespace mslab {

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

enum class TracePart { Re, Im };

/// Re tr(p) or Im tr(p).
struct BasicNode {
  TracePart part = TracePart::Re;
  StarPolynomial poly;
};

enum class ConnectiveKind { Sum, Product, ScalarMultiple, Max, Min, Abs, Sqrt, Affine };

/// Pointwise connective. ScalarMultiple uses `scalar`; Affine computes
/// offset + sum_i coefficients[i] * child_i (no children: a constant).
/// Sqrt takes the root of the nonnegative part of its argument.
struct ConnectiveNode {
  ConnectiveKind kind = ConnectiveKind::Sum;
  std::vector<FormulaPtr> children;
  double scalar = 1.0;
  double offset = 0.0;
  std::vector<double> coefficients;
};

enum class QuantifierKind { Sup, Inf };

/// sup / inf of the body over the operator-norm ball D_radius in `bound`.
struct QuantifierNode {
  QuantifierKind kind = QuantifierKind::Sup;
  Var bound{'y', 1};
  double radius = 1.0;
  FormulaPtr body;
};

struct Formula {
  std::variant<BasicNode, ConnectiveNode, QuantifierNode> node;
};

// Builders.
FormulaPtr tr_re(StarPolynomial p);
FormulaPtr tr_im(StarPolynomial p);
FormulaPtr constant(double c);
FormulaPtr sum(std::vector<FormulaPtr> children);
FormulaPtr product(std::vector<FormulaPtr> children);
FormulaPtr scale(double s, FormulaPtr child);
FormulaPtr affine(double offset, std::vector<double> coefficients, std::vector<FormulaPtr> children);
FormulaPtr max_of(std::vector<FormulaPtr> children);
FormulaPtr min_of(std::vector<FormulaPtr> children);
FormulaPtr abs_of(FormulaPtr child);
FormulaPtr sqrt_of(FormulaPtr child);
FormulaPtr sup_over(Var bound, double radius, FormulaPtr body);
FormulaPtr inf_over(Var bound, double radius, FormulaPtr body);

/// Variables occurring free (not captured by an enclosing quantifier).
std::set<Var> free_vars(const Formula& f);
bool is_quantifier_free(const Formula& f);
int quantifier_depth(const Formula& f);
/// Largest index k among free x_k (0 if none).
int max_free_index(const Formula& f);

struct FormulaError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Structural checks: positive radii, bound variables distinct from free
/// variables and from each other, depth at most `max_depth`.
void validate_formula(const Formula& f, int max_depth = 2);

bool formula_equal(const Formula& a, const Formula& b);

/// Renumber every free x_k to x_{k+offset}; bound y variables are untouched.
FormulaPtr shift_free_vars(const FormulaPtr& f, int offset);

// Text form ---------------------------------------------------------------

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos) {}
  std::size_t position;
};

FormulaPtr parse_formula(const std::string& text);
StarPolynomial parse_polynomial(const std::string& text);
StarWord parse_word(const std::string& text);
std::string to_string(const Formula& f);
std::string to_string(const StarPolynomial& p);

// Evaluation --------------------------------------------------------------

struct FormulaConfig {
  OptConfig opt;
  int max_depth = 2;
};

struct EvalDiagnostics {
  bool budget_exhausted = false;   // some quantifier optimizer hit max_iters
  bool nondifferentiable = false;  // a max/min/abs/sqrt tie selected a subgradient
  int quantifier_solves = 0;
};

struct EvalResult {
  double value = 0.0;
  EvalDiagnostics diagnostics;
};

/// Value of phi at X. Sup nodes return a lower bound on the true supremum
/// (value at a feasible witness); Inf nodes an upper bound.
/// Throws FormulaError on non-finite intermediate values.
EvalResult eval_formula(const Formula& phi, const MatrixTuple& x, const FormulaConfig& cfg = {});

struct GradientResult {
  double value = 0.0;
  MatrixTuple gradient;  // d phi = Re <G, H>
  EvalDiagnostics diagnostics;
};

/// Gradient with respect to the free tuple. Requires a quantifier-free phi
/// unless `allow_quantifiers`, in which case quantifier nodes contribute the
/// body gradient at their witness.
GradientResult cyclic_gradient(const Formula& phi, const MatrixTuple& x, const FormulaConfig& cfg = {},
                               bool allow_quantifiers = false);

}  // namespace mslab
