// Text syntax for formulas.
//
//   formula  := sum
//   sum      := product (('+' | '-') product)*
//   product  := unary ('*' unary)*          literal '*' f  -> scalar multiple
//   unary    := '-' unary | primary
//   primary  := NUMBER | 'tr.re(' poly ')' | 'tr.im(' poly ')'
//             | ('max' | 'min') '(' formula (',' formula)* ')'
//             | 'abs(' formula ')' | 'sqrt(' formula ')'
//             | 'affine(' NUMBER (';' NUMBER ',' formula)* ')'
//             | ('sup' | 'inf') '{' VAR 'in' 'D(' NUMBER ')' '}' unary
//             | '(' formula ')'
//   poly     := pterm (('+' | '-') pterm)*
//   pterm    := coef? word | coef
//   coef     := NUMBER | NUMBER 'i' | '(' NUMBER ('+' | '-') NUMBER 'i' ')'
//   word     := (VAR '*'?)+          VAR := ('x' | 'y') DIGITS

#include <cctype>
#include <charconv>
#include <cmath>

#include "mslab/formula.hpp"

namespace mslab {

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  FormulaPtr formula_all() {
    FormulaPtr f = sum_rule();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return f;
  }

  StarPolynomial poly_all() {
    StarPolynomial p = poly();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return p;
  }

  StarWord word_all() {
    skip_ws();
    StarWord w;
    if (pos_ == s_.size()) return w;
    w = word();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return w;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  bool accept_keyword(const std::string& kw) {
    skip_ws();
    if (s_.compare(pos_, kw.size(), kw) != 0) return false;
    const std::size_t end = pos_ + kw.size();
    if (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_') &&
        std::isalnum(static_cast<unsigned char>(kw.back()))) {
      return false;
    }
    pos_ = end;
    return true;
  }

  bool at_number() {
    skip_ws();
    if (pos_ >= s_.size()) return false;
    const char c = s_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) ||
           (c == '.' && pos_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])));
  }

  double number() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < s_.size() && (s_[q] == '+' || s_[q] == '-')) ++q;
      if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
        pos_ = q;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (ec != std::errc() || ptr != s_.data() + pos_ || start == pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return v;
  }

  double signed_number() {
    const bool neg = accept('-');
    const double v = number();
    return neg ? -v : v;
  }

  bool at_var() {
    skip_ws();
    return pos_ + 1 < s_.size() && (s_[pos_] == 'x' || s_[pos_] == 'y') &&
           std::isdigit(static_cast<unsigned char>(s_[pos_ + 1]));
  }

  Var var() {
    if (!at_var()) fail("expected a variable x<k> or y<k>");
    const char kind = s_[pos_++];
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    int idx = 0;
    std::from_chars(s_.data() + start, s_.data() + pos_, idx);
    if (idx < 1) {
      pos_ = start;
      fail("variable index must be >= 1");
    }
    return Var{kind, idx};
  }

  StarWord word() {
    StarWord w;
    if (!at_var()) fail("expected a word");
    while (at_var()) {
      const Var v = var();
      // A star directly after the variable marks the adjoint.
      const bool star = pos_ < s_.size() && s_[pos_] == '*';
      if (star) ++pos_;
      w.letters.push_back({v, star});
    }
    return w;
  }

  // coef := NUMBER ['i'] | '(' NUMBER ('+'|'-') NUMBER 'i' ')'
  bool try_coef(Complex& out) {
    skip_ws();
    if (at_number()) {
      const double v = number();
      if (pos_ < s_.size() && s_[pos_] == 'i') {
        ++pos_;
        out = Complex(0.0, v);
      } else {
        out = Complex(v, 0.0);
      }
      return true;
    }
    if (peek('(')) {
      ++pos_;
      const double re = signed_number();
      skip_ws();
      double sign = 1.0;
      if (accept('+')) {
        sign = 1.0;
      } else if (accept('-')) {
        sign = -1.0;
      } else {
        fail("expected '+' or '-' in complex coefficient");
      }
      const double im = number();
      if (!(pos_ < s_.size() && s_[pos_] == 'i')) fail("expected 'i' in complex coefficient");
      ++pos_;
      expect(')');
      out = Complex(re, sign * im);
      return true;
    }
    return false;
  }

  void pterm(StarPolynomial& p, double sign) {
    if (accept('-')) sign = -sign;
    Complex c = 1.0;
    const bool has_coef = try_coef(c);
    StarWord w;
    if (at_var()) {
      w = word();
    } else if (!has_coef) {
      fail("expected a polynomial term");
    }
    p.add_term(w, sign * c);
  }

  StarPolynomial poly() {
    StarPolynomial p;
    pterm(p, 1.0);
    while (true) {
      if (accept('+')) {
        pterm(p, 1.0);
      } else if (accept('-')) {
        pterm(p, -1.0);
      } else {
        break;
      }
    }
    return p;
  }

  static bool is_literal(const FormulaPtr& f) {
    const auto* c = std::get_if<ConnectiveNode>(&f->node);
    return c != nullptr && c->kind == ConnectiveKind::Affine && c->children.empty();
  }

  FormulaPtr sum_rule() {
    std::vector<FormulaPtr> terms{product_rule()};
    while (true) {
      if (accept('+')) {
        terms.push_back(product_rule());
      } else if (peek('-')) {
        ++pos_;
        terms.push_back(scale(-1.0, product_rule()));
      } else {
        break;
      }
    }
    return terms.size() == 1 ? terms.front() : sum(std::move(terms));
  }

  FormulaPtr product_rule() {
    std::vector<FormulaPtr> factors{unary()};
    while (accept('*')) factors.push_back(unary());
    if (factors.size() == 2 && is_literal(factors[0])) {
      const double s = std::get<ConnectiveNode>(factors[0]->node).offset;
      return scale(s, factors[1]);
    }
    return factors.size() == 1 ? factors.front() : product(std::move(factors));
  }

  FormulaPtr unary() {
    if (accept('-')) {
      if (at_number()) return constant(-number());
      return scale(-1.0, unary());
    }
    return primary();
  }

  std::vector<FormulaPtr> args() {
    expect('(');
    std::vector<FormulaPtr> out{sum_rule()};
    while (accept(',')) out.push_back(sum_rule());
    expect(')');
    return out;
  }

  FormulaPtr primary() {
    skip_ws();
    if (at_number()) return constant(number());
    if (accept_keyword("tr.re") || accept_keyword("tr.im")) {
      const bool re = s_.compare(pos_ - 2, 2, "re") == 0;
      expect('(');
      StarPolynomial p = poly();
      expect(')');
      return re ? tr_re(std::move(p)) : tr_im(std::move(p));
    }
    if (accept_keyword("max")) return max_of(args());
    if (accept_keyword("min")) return min_of(args());
    if (accept_keyword("abs")) {
      auto a = args();
      if (a.size() != 1) fail("abs takes one argument");
      return abs_of(a[0]);
    }
    if (accept_keyword("sqrt")) {
      auto a = args();
      if (a.size() != 1) fail("sqrt takes one argument");
      return sqrt_of(a[0]);
    }
    if (accept_keyword("affine")) {
      expect('(');
      const double offset = signed_number();
      std::vector<double> coefs;
      std::vector<FormulaPtr> kids;
      while (accept(';')) {
        coefs.push_back(signed_number());
        expect(',');
        kids.push_back(sum_rule());
      }
      expect(')');
      return affine(offset, std::move(coefs), std::move(kids));
    }
    const bool is_sup = accept_keyword("sup");
    if (is_sup || accept_keyword("inf")) {
      expect('{');
      const Var v = var();
      if (!accept_keyword("in")) fail("expected 'in'");
      if (!accept_keyword("D")) fail("expected 'D(radius)'");
      expect('(');
      const double r = number();
      expect(')');
      expect('}');
      if (!(r > 0.0)) fail("quantifier radius must be positive");
      FormulaPtr body = unary();
      return is_sup ? sup_over(v, r, std::move(body)) : inf_over(v, r, std::move(body));
    }
    if (accept('(')) {
      FormulaPtr f = sum_rule();
      expect(')');
      return f;
    }
    if (pos_ >= s_.size()) fail("unexpected end of input");
    fail(std::string("unexpected character '") + s_[pos_] + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string format_coef(Complex c) {
  if (c.imag() == 0.0) return format_number(c.real());
  if (c.real() == 0.0) return format_number(c.imag()) + "i";
  std::string s = "(" + format_number(c.real());
  s += c.imag() < 0.0 ? "-" : "+";
  s += format_number(std::abs(c.imag())) + "i)";
  return s;
}

}  // namespace

std::string to_string(const StarPolynomial& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [w, c] : p.terms()) {
    if (!first) out += " + ";
    first = false;
    if (w.empty()) {
      out += format_coef(c);
    } else if (c == Complex(1.0, 0.0)) {
      out += w.to_string();
    } else {
      out += format_coef(c) + " " + w.to_string();
    }
  }
  return out;
}

std::string to_string(const Formula& f) {
  struct Printer {
    std::string operator()(const BasicNode& b) const {
      return std::string(b.part == TracePart::Re ? "tr.re(" : "tr.im(") + to_string(b.poly) + ")";
    }
    std::string operator()(const ConnectiveNode& c) const {
      auto join = [&](const std::string& sep) {
        std::string s;
        for (std::size_t k = 0; k < c.children.size(); ++k) {
          if (k > 0) s += sep;
          s += to_string(*c.children[k]);
        }
        return s;
      };
      switch (c.kind) {
        case ConnectiveKind::Sum:
          return c.children.size() == 1 ? to_string(*c.children[0]) : "(" + join(" + ") + ")";
        case ConnectiveKind::Product:
          return c.children.size() == 1 ? to_string(*c.children[0]) : "(" + join(" * ") + ")";
        case ConnectiveKind::ScalarMultiple:
          return "(" + format_number(c.scalar) + " * " + to_string(*c.children[0]) + ")";
        case ConnectiveKind::Max:
          return "max(" + join(", ") + ")";
        case ConnectiveKind::Min:
          return "min(" + join(", ") + ")";
        case ConnectiveKind::Abs:
          return "abs(" + to_string(*c.children[0]) + ")";
        case ConnectiveKind::Sqrt:
          return "sqrt(" + to_string(*c.children[0]) + ")";
        case ConnectiveKind::Affine: {
          if (c.children.empty()) return format_number(c.offset);
          std::string s = "affine(" + format_number(c.offset);
          for (std::size_t k = 0; k < c.children.size(); ++k) {
            s += "; " + format_number(c.coefficients[k]) + ", " + to_string(*c.children[k]);
          }
          return s + ")";
        }
      }
      return {};
    }
    std::string operator()(const QuantifierNode& q) const {
      return std::string(q.kind == QuantifierKind::Sup ? "sup{" : "inf{") + q.bound.name() + " in D(" +
             format_number(q.radius) + ")} " + to_string(*q.body);
    }
  };
  return std::visit(Printer{}, f.node);
}

FormulaPtr parse_formula(const std::string& text) { return Parser(text).formula_all(); }

StarPolynomial parse_polynomial(const std::string& text) { return Parser(text).poly_all(); }

StarWord parse_word(const std::string& text) { return Parser(text).word_all(); }

}  // namespace mslab
