#include "mslab/formula.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace mslab {

namespace {

FormulaPtr make(BasicNode n) { return std::make_shared<const Formula>(Formula{std::move(n)}); }
FormulaPtr make(ConnectiveNode n) { return std::make_shared<const Formula>(Formula{std::move(n)}); }
FormulaPtr make(QuantifierNode n) { return std::make_shared<const Formula>(Formula{std::move(n)}); }

FormulaPtr connective(ConnectiveKind kind, std::vector<FormulaPtr> children, std::size_t min_children) {
  if (children.size() < min_children) throw FormulaError("connective needs more arguments");
  for (const auto& c : children) {
    if (!c) throw FormulaError("null child formula");
  }
  ConnectiveNode n;
  n.kind = kind;
  n.children = std::move(children);
  return make(std::move(n));
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void collect_free(const Formula& f, std::set<Var>& bound, std::set<Var>& out) {
  std::visit(Overloaded{
                 [&](const BasicNode& b) {
                   for (const auto& [w, c] : b.poly.terms()) {
                     for (const auto& l : w.letters) {
                       if (!bound.contains(l.var)) out.insert(l.var);
                     }
                   }
                 },
                 [&](const ConnectiveNode& c) {
                   for (const auto& ch : c.children) collect_free(*ch, bound, out);
                 },
                 [&](const QuantifierNode& q) {
                   const bool fresh = bound.insert(q.bound).second;
                   collect_free(*q.body, bound, out);
                   if (fresh) bound.erase(q.bound);
                 },
             },
             f.node);
}

}  // namespace

FormulaPtr tr_re(StarPolynomial p) { return make(BasicNode{TracePart::Re, std::move(p)}); }
FormulaPtr tr_im(StarPolynomial p) { return make(BasicNode{TracePart::Im, std::move(p)}); }

FormulaPtr constant(double c) {
  ConnectiveNode n;
  n.kind = ConnectiveKind::Affine;
  n.offset = c;
  return make(std::move(n));
}

FormulaPtr sum(std::vector<FormulaPtr> children) {
  return connective(ConnectiveKind::Sum, std::move(children), 1);
}

FormulaPtr product(std::vector<FormulaPtr> children) {
  return connective(ConnectiveKind::Product, std::move(children), 1);
}

FormulaPtr scale(double s, FormulaPtr child) {
  if (!child) throw FormulaError("null child formula");
  ConnectiveNode n;
  n.kind = ConnectiveKind::ScalarMultiple;
  n.scalar = s;
  n.children = {std::move(child)};
  return make(std::move(n));
}

FormulaPtr affine(double offset, std::vector<double> coefficients, std::vector<FormulaPtr> children) {
  if (coefficients.size() != children.size()) throw FormulaError("affine: coefficient count mismatch");
  for (const auto& c : children) {
    if (!c) throw FormulaError("null child formula");
  }
  ConnectiveNode n;
  n.kind = ConnectiveKind::Affine;
  n.offset = offset;
  n.coefficients = std::move(coefficients);
  n.children = std::move(children);
  return make(std::move(n));
}

FormulaPtr max_of(std::vector<FormulaPtr> children) {
  return connective(ConnectiveKind::Max, std::move(children), 1);
}
FormulaPtr min_of(std::vector<FormulaPtr> children) {
  return connective(ConnectiveKind::Min, std::move(children), 1);
}
FormulaPtr abs_of(FormulaPtr child) { return connective(ConnectiveKind::Abs, {std::move(child)}, 1); }
FormulaPtr sqrt_of(FormulaPtr child) { return connective(ConnectiveKind::Sqrt, {std::move(child)}, 1); }

FormulaPtr sup_over(Var bound, double radius, FormulaPtr body) {
  if (!body) throw FormulaError("null quantifier body");
  return make(QuantifierNode{QuantifierKind::Sup, bound, radius, std::move(body)});
}
FormulaPtr inf_over(Var bound, double radius, FormulaPtr body) {
  if (!body) throw FormulaError("null quantifier body");
  return make(QuantifierNode{QuantifierKind::Inf, bound, radius, std::move(body)});
}

std::set<Var> free_vars(const Formula& f) {
  std::set<Var> bound, out;
  collect_free(f, bound, out);
  return out;
}

bool is_quantifier_free(const Formula& f) { return quantifier_depth(f) == 0; }

int quantifier_depth(const Formula& f) {
  return std::visit(Overloaded{
                        [](const BasicNode&) { return 0; },
                        [](const ConnectiveNode& c) {
                          int d = 0;
                          for (const auto& ch : c.children) d = std::max(d, quantifier_depth(*ch));
                          return d;
                        },
                        [](const QuantifierNode& q) { return 1 + quantifier_depth(*q.body); },
                    },
                    f.node);
}

int max_free_index(const Formula& f) {
  int m = 0;
  for (const auto& v : free_vars(f)) {
    if (v.kind == 'x') m = std::max(m, v.index);
  }
  return m;
}

namespace {

void collect_bound(const Formula& f, std::vector<Var>& out) {
  std::visit(Overloaded{
                 [](const BasicNode&) {},
                 [&](const ConnectiveNode& c) {
                   for (const auto& ch : c.children) collect_bound(*ch, out);
                 },
                 [&](const QuantifierNode& q) {
                   if (!(q.radius > 0.0) || !std::isfinite(q.radius)) {
                     throw FormulaError("quantifier radius must be positive and finite");
                   }
                   out.push_back(q.bound);
                   collect_bound(*q.body, out);
                 },
             },
             f.node);
}

}  // namespace

void validate_formula(const Formula& f, int max_depth) {
  std::vector<Var> bound;
  collect_bound(f, bound);
  const auto free = free_vars(f);
  std::set<Var> seen;
  for (const auto& v : bound) {
    if (!seen.insert(v).second) throw FormulaError("bound variable " + v.name() + " is quantified twice");
    if (free.contains(v)) throw FormulaError("bound variable " + v.name() + " also occurs free");
    if (v.kind == 'x') throw FormulaError("bound variable " + v.name() + " must be named y<k>");
  }
  for (const auto& v : free) {
    if (v.kind != 'x') throw FormulaError("variable " + v.name() + " is not bound by any quantifier");
  }
  const int depth = quantifier_depth(f);
  if (depth > max_depth) {
    throw FormulaError("quantifier depth " + std::to_string(depth) + " exceeds the limit " +
                       std::to_string(max_depth));
  }
}

bool formula_equal(const Formula& a, const Formula& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      Overloaded{
          [&](const BasicNode& x) {
            const auto& y = std::get<BasicNode>(b.node);
            return x.part == y.part && x.poly == y.poly;
          },
          [&](const ConnectiveNode& x) {
            const auto& y = std::get<ConnectiveNode>(b.node);
            if (x.kind != y.kind || x.children.size() != y.children.size()) return false;
            if (x.kind == ConnectiveKind::ScalarMultiple && x.scalar != y.scalar) return false;
            if (x.kind == ConnectiveKind::Affine && (x.offset != y.offset || x.coefficients != y.coefficients)) {
              return false;
            }
            for (std::size_t k = 0; k < x.children.size(); ++k) {
              if (!formula_equal(*x.children[k], *y.children[k])) return false;
            }
            return true;
          },
          [&](const QuantifierNode& x) {
            const auto& y = std::get<QuantifierNode>(b.node);
            return x.kind == y.kind && x.bound == y.bound && x.radius == y.radius &&
                   formula_equal(*x.body, *y.body);
          },
      },
      a.node);
}

FormulaPtr shift_free_vars(const FormulaPtr& f, int offset) {
  return std::visit(
      Overloaded{
          [&](const BasicNode& b) -> FormulaPtr {
            StarPolynomial p;
            for (const auto& [w, c] : b.poly.terms()) {
              StarWord moved = w;
              for (auto& l : moved.letters) {
                if (l.var.kind == 'x') l.var.index += offset;
              }
              p.add_term(moved, c);
            }
            return make(BasicNode{b.part, std::move(p)});
          },
          [&](const ConnectiveNode& c) -> FormulaPtr {
            ConnectiveNode out = c;
            for (auto& ch : out.children) ch = shift_free_vars(ch, offset);
            return make(std::move(out));
          },
          [&](const QuantifierNode& q) -> FormulaPtr {
            QuantifierNode out = q;
            out.body = shift_free_vars(q.body, offset);
            return make(std::move(out));
          },
      },
      f->node);
}

// Evaluation ---------------------------------------------------------------

namespace {

using GradMap = std::map<Var, Matrix>;

struct ValueGrad {
  double value = 0.0;
  GradMap grad;
};

void accumulate(GradMap& into, const GradMap& from, double s) {
  if (s == 0.0) return;
  for (const auto& [v, g] : from) {
    auto it = into.find(v);
    if (it == into.end()) {
      into.emplace(v, s * g);
    } else {
      it->second += s * g;
    }
  }
}

void check_finite(double v, const char* where) {
  if (!std::isfinite(v)) throw FormulaError(std::string("non-finite value in ") + where);
}

class Evaluator {
 public:
  Evaluator(const FormulaConfig& cfg, EvalDiagnostics& diag, std::mutex& mu)
      : cfg_(cfg), diag_(diag), mu_(mu) {}

  double value(const Formula& f, Assignment& a) {
    return std::visit(Overloaded{
                          [&](const BasicNode& b) { return basic_value(b, a); },
                          [&](const ConnectiveNode& c) { return connective_value(c, a); },
                          [&](const QuantifierNode& q) { return quantifier(q, a, nullptr); },
                      },
                      f.node);
  }

  ValueGrad value_grad(const Formula& f, Assignment& a) {
    return std::visit(Overloaded{
                          [&](const BasicNode& b) { return basic_grad(b, a); },
                          [&](const ConnectiveNode& c) { return connective_grad(c, a); },
                          [&](const QuantifierNode& q) {
                            ValueGrad vg;
                            vg.value = quantifier(q, a, &vg.grad);
                            return vg;
                          },
                      },
                      f.node);
  }

 private:
  void flag_nondifferentiable() {
    std::lock_guard lock(mu_);
    diag_.nondifferentiable = true;
  }

  double basic_value(const BasicNode& b, Assignment& a) {
    Complex total = 0.0;
    for (const auto& [w, c] : b.poly.terms()) total += c * word_trace(w, a);
    const double v = b.part == TracePart::Re ? total.real() : total.imag();
    check_finite(v, "trace");
    return v;
  }

  ValueGrad basic_grad(const BasicNode& b, Assignment& a) {
    ValueGrad out;
    const int n = a.n();
    Complex total = 0.0;
    for (const auto& [w, coef] : b.poly.terms()) {
      // Re(c tr(w)) with c = coef (Re part) or -i coef (Im part).
      const Complex c = b.part == TracePart::Re ? coef : Complex(0.0, -1.0) * coef;
      total += coef * word_trace(w, a);
      const std::size_t k = w.length();
      if (k == 0) continue;
      std::vector<Matrix> mats;
      mats.reserve(k);
      for (const auto& l : w.letters) {
        const Matrix& m = a.lookup(l.var);
        mats.push_back(l.starred ? Matrix(m.adjoint()) : m);
      }
      // prefix[p] = L_0 ... L_{p-1}, suffix[p] = L_{p+1} ... L_{k-1}
      std::vector<Matrix> prefix(k), suffix(k);
      prefix[0] = Matrix::Identity(n, n);
      for (std::size_t p = 1; p < k; ++p) prefix[p] = prefix[p - 1] * mats[p - 1];
      suffix[k - 1] = Matrix::Identity(n, n);
      for (std::size_t p = k - 1; p-- > 0;) suffix[p] = mats[p + 1] * suffix[p + 1];
      for (std::size_t p = 0; p < k; ++p) {
        const Letter& l = w.letters[p];
        const Matrix m = suffix[p] * prefix[p];
        Matrix contrib = l.starred ? Matrix(c * m) : Matrix(std::conj(c) * m.adjoint());
        auto it = out.grad.find(l.var);
        if (it == out.grad.end()) {
          out.grad.emplace(l.var, std::move(contrib));
        } else {
          it->second += contrib;
        }
      }
    }
    out.value = b.part == TracePart::Re ? total.real() : total.imag();
    check_finite(out.value, "trace");
    return out;
  }

  double connective_value(const ConnectiveNode& c, Assignment& a) {
    std::vector<double> vals;
    vals.reserve(c.children.size());
    for (const auto& ch : c.children) vals.push_back(value(*ch, a));
    double v = 0.0;
    switch (c.kind) {
      case ConnectiveKind::Sum:
        for (double x : vals) v += x;
        break;
      case ConnectiveKind::Product:
        v = 1.0;
        for (double x : vals) v *= x;
        break;
      case ConnectiveKind::ScalarMultiple:
        v = c.scalar * vals[0];
        break;
      case ConnectiveKind::Max:
        v = *std::max_element(vals.begin(), vals.end());
        break;
      case ConnectiveKind::Min:
        v = *std::min_element(vals.begin(), vals.end());
        break;
      case ConnectiveKind::Abs:
        v = std::abs(vals[0]);
        break;
      case ConnectiveKind::Sqrt:
        v = std::sqrt(std::max(0.0, vals[0]));
        break;
      case ConnectiveKind::Affine:
        v = c.offset;
        for (std::size_t k = 0; k < vals.size(); ++k) v += c.coefficients[k] * vals[k];
        break;
    }
    check_finite(v, "connective");
    return v;
  }

  ValueGrad connective_grad(const ConnectiveNode& c, Assignment& a) {
    std::vector<ValueGrad> kids;
    kids.reserve(c.children.size());
    for (const auto& ch : c.children) kids.push_back(value_grad(*ch, a));
    ValueGrad out;
    switch (c.kind) {
      case ConnectiveKind::Sum:
        for (const auto& k : kids) {
          out.value += k.value;
          accumulate(out.grad, k.grad, 1.0);
        }
        break;
      case ConnectiveKind::Product: {
        out.value = 1.0;
        for (const auto& k : kids) out.value *= k.value;
        for (std::size_t i = 0; i < kids.size(); ++i) {
          double others = 1.0;
          for (std::size_t j = 0; j < kids.size(); ++j) {
            if (j != i) others *= kids[j].value;
          }
          accumulate(out.grad, kids[i].grad, others);
        }
        break;
      }
      case ConnectiveKind::ScalarMultiple:
        out.value = c.scalar * kids[0].value;
        accumulate(out.grad, kids[0].grad, c.scalar);
        break;
      case ConnectiveKind::Max:
      case ConnectiveKind::Min: {
        const bool is_max = c.kind == ConnectiveKind::Max;
        std::size_t best = 0;
        for (std::size_t i = 1; i < kids.size(); ++i) {
          if (is_max ? kids[i].value > kids[best].value : kids[i].value < kids[best].value) best = i;
        }
        for (std::size_t i = 0; i < kids.size(); ++i) {
          if (i != best && kids[i].value == kids[best].value) flag_nondifferentiable();
        }
        out.value = kids[best].value;
        accumulate(out.grad, kids[best].grad, 1.0);
        break;
      }
      case ConnectiveKind::Abs: {
        const double v = kids[0].value;
        out.value = std::abs(v);
        if (v == 0.0) {
          flag_nondifferentiable();
        } else {
          accumulate(out.grad, kids[0].grad, v > 0.0 ? 1.0 : -1.0);
        }
        break;
      }
      case ConnectiveKind::Sqrt: {
        const double v = kids[0].value;
        if (v <= 0.0) {
          flag_nondifferentiable();
          out.value = 0.0;
        } else {
          out.value = std::sqrt(v);
          accumulate(out.grad, kids[0].grad, 0.5 / out.value);
        }
        break;
      }
      case ConnectiveKind::Affine:
        out.value = c.offset;
        for (std::size_t k = 0; k < kids.size(); ++k) {
          out.value += c.coefficients[k] * kids[k].value;
          accumulate(out.grad, kids[k].grad, c.coefficients[k]);
        }
        break;
    }
    check_finite(out.value, "connective");
    return out;
  }

  // Optimizes the body over D_r in the bound variable. With `grad`, fills the
  // gradient in the remaining variables at the witness.
  double quantifier(const QuantifierNode& q, Assignment& a, GradMap* grad) {
    const double sign = q.kind == QuantifierKind::Sup ? -1.0 : 1.0;
    const int n = a.n();
    const Assignment outer = a;
    TupleObjective obj = [&](const MatrixTuple& y, MatrixTuple* g) {
      Assignment local = outer;
      local.bind(q.bound, &y[0]);
      Evaluator inner(cfg_, diag_, mu_);
      if (g == nullptr) return sign * inner.value(*q.body, local);
      ValueGrad vg = inner.value_grad(*q.body, local);
      auto it = vg.grad.find(q.bound);
      (*g)[0] = it == vg.grad.end() ? Matrix::Zero(n, n) : Matrix(sign * it->second);
      return sign * vg.value;
    };
    OptResult res = minimize_over_ball(obj, q.radius, n, 1, cfg_.opt);
    {
      std::lock_guard lock(mu_);
      ++diag_.quantifier_solves;
      if (!res.converged && res.iters_used >= cfg_.opt.max_iters) diag_.budget_exhausted = true;
    }
    const double v = sign * res.value;
    check_finite(v, "quantifier");
    if (grad != nullptr) {
      a.bind(q.bound, &res.witness[0]);
      ValueGrad vg = value_grad(*q.body, a);
      a.unbind(q.bound);
      vg.grad.erase(q.bound);
      accumulate(*grad, vg.grad, 1.0);
    }
    return v;
  }

  const FormulaConfig& cfg_;
  EvalDiagnostics& diag_;
  std::mutex& mu_;
};

void check_free_range(const Formula& phi, const MatrixTuple& x) {
  for (const auto& v : free_vars(phi)) {
    if (v.kind != 'x') throw FormulaError("variable " + v.name() + " is not bound by any quantifier");
    if (v.index > x.d()) {
      throw FormulaError("free variable " + v.name() + " exceeds tuple size " + std::to_string(x.d()));
    }
  }
}

}  // namespace

EvalResult eval_formula(const Formula& phi, const MatrixTuple& x, const FormulaConfig& cfg) {
  check_free_range(phi, x);
  if (quantifier_depth(phi) > cfg.max_depth) validate_formula(phi, cfg.max_depth);
  EvalResult res;
  std::mutex mu;
  Evaluator ev(cfg, res.diagnostics, mu);
  Assignment a(x);
  res.value = ev.value(phi, a);
  return res;
}

GradientResult cyclic_gradient(const Formula& phi, const MatrixTuple& x, const FormulaConfig& cfg,
                               bool allow_quantifiers) {
  check_free_range(phi, x);
  if (!allow_quantifiers && !is_quantifier_free(phi)) {
    throw FormulaError("cyclic_gradient: formula has quantifiers");
  }
  GradientResult res;
  std::mutex mu;
  Evaluator ev(cfg, res.diagnostics, mu);
  Assignment a(x);
  ValueGrad vg = ev.value_grad(phi, a);
  res.value = vg.value;
  res.gradient = MatrixTuple::zeros(x.n(), x.d());
  for (auto& [v, g] : vg.grad) {
    if (v.kind == 'x') res.gradient[v.index - 1] = std::move(g);
  }
  return res;
}

}  // namespace mslab
