#include "mslab/ncpoly.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <stdexcept>

namespace mslab {

StarWord StarWord::adjoint() const {
  StarWord out;
  out.letters.reserve(letters.size());
  for (auto it = letters.rbegin(); it != letters.rend(); ++it) {
    out.letters.push_back({it->var, !it->starred});
  }
  return out;
}

std::string StarWord::to_string() const {
  std::string s;
  for (std::size_t k = 0; k < letters.size(); ++k) {
    if (k > 0) s += ' ';
    s += letters[k].var.name();
    if (letters[k].starred) s += '*';
  }
  return s;
}

StarWord word_of_free(std::initializer_list<std::pair<int, bool>> letters) {
  StarWord w;
  for (const auto& [idx, star] : letters) w.letters.push_back({Var{'x', idx}, star});
  return w;
}

StarPolynomial StarPolynomial::monomial(StarWord w, Complex c) {
  StarPolynomial p;
  p.add_term(w, c);
  return p;
}

StarPolynomial StarPolynomial::constant(Complex c) { return monomial(StarWord{}, c); }

void StarPolynomial::add_term(const StarWord& w, Complex c) {
  auto [it, inserted] = terms_.try_emplace(w, c);
  if (!inserted) it->second += c;
  if (it->second == Complex(0.0, 0.0)) terms_.erase(it);
}

StarPolynomial StarPolynomial::adjoint() const {
  StarPolynomial p;
  for (const auto& [w, c] : terms_) p.add_term(w.adjoint(), std::conj(c));
  return p;
}

StarPolynomial& StarPolynomial::operator+=(const StarPolynomial& other) {
  for (const auto& [w, c] : other.terms_) add_term(w, c);
  return *this;
}

StarPolynomial operator*(const StarPolynomial& a, const StarPolynomial& b) {
  StarPolynomial p;
  for (const auto& [wa, ca] : a.terms_) {
    for (const auto& [wb, cb] : b.terms_) {
      StarWord w = wa;
      w.letters.insert(w.letters.end(), wb.letters.begin(), wb.letters.end());
      p.add_term(w, ca * cb);
    }
  }
  return p;
}

StarPolynomial operator*(Complex c, StarPolynomial p) {
  StarPolynomial out;
  for (const auto& [w, v] : p.terms_) out.add_term(w, c * v);
  return out;
}

std::size_t StarPolynomial::degree() const {
  std::size_t deg = 0;
  for (const auto& [w, c] : terms_) deg = std::max(deg, w.length());
  return deg;
}

const Matrix& Assignment::lookup(const Var& v) const {
  for (auto it = bound_.rbegin(); it != bound_.rend(); ++it) {
    if (it->first == v) return *it->second;
  }
  if (v.kind == 'x') {
    if (v.index < 1 || v.index > free_->d()) {
      throw std::out_of_range("variable " + v.name() + " out of range for a " +
                              std::to_string(free_->d()) + "-tuple");
    }
    return (*free_)[v.index - 1];
  }
  throw std::out_of_range("unbound variable " + v.name());
}

void Assignment::bind(const Var& v, const Matrix* value) { bound_.emplace_back(v, value); }

void Assignment::unbind(const Var& v) {
  for (auto it = bound_.rbegin(); it != bound_.rend(); ++it) {
    if (it->first == v) {
      bound_.erase(std::next(it).base());
      return;
    }
  }
}

bool Assignment::is_bound(const Var& v) const {
  return std::any_of(bound_.begin(), bound_.end(), [&](const auto& b) { return b.first == v; });
}

namespace {

Matrix letter_value(const Letter& l, const Assignment& a) {
  const Matrix& m = a.lookup(l.var);
  return l.starred ? Matrix(m.adjoint()) : m;
}

// tr_n(P L) where L is the letter's matrix, without forming P L.
Complex trace_times_letter(const Matrix& p, const Letter& l, const Matrix& m) {
  const auto n = static_cast<double>(p.rows());
  if (l.starred) {
    // tr(P M^*) = sum_ij P_ij conj(M_ij)
    return p.cwiseProduct(m.conjugate()).sum() / n;
  }
  return p.cwiseProduct(m.transpose()).sum() / n;
}

}  // namespace

Matrix eval_word(const StarWord& w, const Assignment& a) {
  const int n = a.n();
  if (w.empty()) return Matrix::Identity(n, n);
  Matrix prod = letter_value(w.letters.front(), a);
  for (std::size_t k = 1; k < w.letters.size(); ++k) {
    const auto& l = w.letters[k];
    const Matrix& m = a.lookup(l.var);
    if (l.starred) {
      prod = prod * m.adjoint();
    } else {
      prod = prod * m;
    }
  }
  return prod;
}

Complex word_trace(const StarWord& w, const Assignment& a) {
  if (w.empty()) return 1.0;
  if (w.length() == 1) {
    const Complex t = normalized_trace(a.lookup(w.letters[0].var));
    return w.letters[0].starred ? std::conj(t) : t;
  }
  StarWord prefix;
  prefix.letters.assign(w.letters.begin(), w.letters.end() - 1);
  const Letter& last = w.letters.back();
  return trace_times_letter(eval_word(prefix, a), last, a.lookup(last.var));
}

Complex word_trace(const StarWord& w, const MatrixTuple& x) {
  Assignment a(x);
  return word_trace(w, a);
}

Matrix eval_polynomial(const StarPolynomial& p, const Assignment& a) {
  const int n = a.n();
  Matrix total = Matrix::Zero(n, n);
  for (const auto& [w, c] : p.terms()) total += c * eval_word(w, a);
  return total;
}

Matrix eval_polynomial(const StarPolynomial& p, const MatrixTuple& x) {
  Assignment a(x);
  return eval_polynomial(p, a);
}

std::vector<StarWord> enumerate_star_words(int d, int max_len) {
  if (d < 1 || max_len < 0) throw std::invalid_argument("enumerate_star_words: bad arguments");
  std::vector<StarWord> out;
  std::vector<StarWord> layer{StarWord{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<StarWord> next;
    next.reserve(layer.size() * static_cast<std::size_t>(2 * d));
    for (const auto& w : layer) {
      for (int v = 1; v <= d; ++v) {
        for (bool star : {false, true}) {
          StarWord e = w;
          e.letters.push_back({Var{'x', v}, star});
          next.push_back(std::move(e));
        }
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

namespace {

struct TrieNode {
  std::map<Letter, std::unique_ptr<TrieNode>> children;
  std::vector<std::pair<Letter, std::size_t>> endings;  // (last letter, output slot)
};

void walk(const TrieNode& node, const Matrix& prefix, const MatrixTuple& x, std::vector<Complex>& out) {
  for (const auto& [last, slot] : node.endings) {
    out[slot] = trace_times_letter(prefix, last, x[last.var.index - 1]);
  }
  for (const auto& [l, child] : node.children) {
    const Matrix& m = x[l.var.index - 1];
    const Matrix next = l.starred ? Matrix(prefix * m.adjoint()) : Matrix(prefix * m);
    walk(*child, next, x, out);
  }
}

}  // namespace

std::vector<Complex> word_traces(const MatrixTuple& x, const std::vector<StarWord>& words, bool parallel) {
  std::vector<Complex> out(words.size(), Complex(0.0, 0.0));
  TrieNode root;
  for (std::size_t k = 0; k < words.size(); ++k) {
    const auto& w = words[k];
    for (const auto& l : w.letters) {
      if (l.var.kind != 'x' || l.var.index < 1 || l.var.index > x.d()) {
        throw std::out_of_range("word_traces: variable " + l.var.name() + " out of range");
      }
    }
    if (w.empty()) {
      out[k] = 1.0;
      continue;
    }
    TrieNode* node = &root;
    for (std::size_t p = 0; p + 1 < w.length(); ++p) {
      auto& child = node->children[w.letters[p]];
      if (!child) child = std::make_unique<TrieNode>();
      node = child.get();
    }
    node->endings.emplace_back(w.letters.back(), k);
  }
  const int n = x.n();
  const Matrix identity = Matrix::Identity(n, n);
  // Root endings are single letters.
  for (const auto& [last, slot] : root.endings) {
    out[slot] = trace_times_letter(identity, last, x[last.var.index - 1]);
  }
  std::vector<const std::pair<const Letter, std::unique_ptr<TrieNode>>*> firsts;
  for (const auto& entry : root.children) firsts.push_back(&entry);
  const int count = static_cast<int>(firsts.size());
  auto task = [&](int k) {
    const auto& [l, child] = *firsts[static_cast<std::size_t>(k)];
    const Matrix& m = x[l.var.index - 1];
    walk(*child, l.starred ? Matrix(m.adjoint()) : m, x, out);
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < count; ++k) task(k);
  } else {
    for (int k = 0; k < count; ++k) task(k);
  }
  return out;
}

}  // namespace mslab
