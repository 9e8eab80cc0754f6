#include "mslab/moments.hpp"

#include "mslab/formula.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>

namespace mslab {

WordTable::WordTable(int d, int max_len) : d_(d), max_len_(max_len) {
  if (d < 1) throw std::invalid_argument("WordTable: d must be >= 1");
  if (max_len < 0 || max_len > kMaxLenCap) {
    throw std::invalid_argument("WordTable: max_len must be in [0, " + std::to_string(kMaxLenCap) + "]");
  }
  const auto a = static_cast<std::size_t>(2 * d);
  offsets_.resize(static_cast<std::size_t>(max_len) + 2);
  std::size_t total = 0;
  std::size_t layer = 1;
  for (int len = 0; len <= max_len + 1; ++len) {
    offsets_[static_cast<std::size_t>(len)] = total;
    total += layer;
    layer *= a;
  }
  const std::size_t cells = offsets_.back();
  if (cells > (std::size_t{1} << 27)) throw std::invalid_argument("WordTable: table too large");
  values_.assign(cells, Complex(0.0, 0.0));
}

std::size_t WordTable::index_of_codes(const int* codes, int len) const {
  std::size_t idx = 0;
  const auto a = static_cast<std::size_t>(alphabet());
  for (int k = 0; k < len; ++k) idx = idx * a + static_cast<std::size_t>(codes[k]);
  return offsets_[static_cast<std::size_t>(len)] + idx;
}

std::size_t WordTable::index_of(const StarWord& w) const {
  const int len = static_cast<int>(w.length());
  if (len > max_len_) throw std::out_of_range("word longer than the table's length bound");
  std::vector<int> codes(static_cast<std::size_t>(len));
  for (int k = 0; k < len; ++k) {
    const auto& l = w.letters[static_cast<std::size_t>(k)];
    if (l.var.kind != 'x' || l.var.index < 1 || l.var.index > d_) {
      throw std::out_of_range("word uses variable " + l.var.name() + " outside the table");
    }
    codes[static_cast<std::size_t>(k)] = 2 * (l.var.index - 1) + (l.starred ? 1 : 0);
  }
  return index_of_codes(codes.data(), len);
}

std::vector<int> WordTable::codes_at(std::size_t idx) const {
  int len = 0;
  while (len < max_len_ && offsets_[static_cast<std::size_t>(len) + 1] <= idx) ++len;
  std::size_t rest = idx - offsets_[static_cast<std::size_t>(len)];
  std::vector<int> codes(static_cast<std::size_t>(len));
  const auto a = static_cast<std::size_t>(alphabet());
  for (int k = len - 1; k >= 0; --k) {
    codes[static_cast<std::size_t>(k)] = static_cast<int>(rest % a);
    rest /= a;
  }
  return codes;
}

StarWord WordTable::word_at(std::size_t idx) const {
  StarWord w;
  for (int c : codes_at(idx)) w.letters.push_back({Var{'x', c / 2 + 1}, (c % 2) == 1});
  return w;
}

MomentVector::MomentVector(int d, int max_len) : WordTable(d, max_len) { values_[0] = 1.0; }

double MomentVector::conjugate_symmetry_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto w = word_at(i);
    worst = std::max(worst, std::abs(at(w.adjoint()) - std::conj(values_[i])));
  }
  return worst;
}

double MomentVector::traciality_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    auto codes = codes_at(i);
    const int len = static_cast<int>(codes.size());
    for (int r = 1; r < len; ++r) {
      std::rotate(codes.begin(), codes.begin() + 1, codes.end());
      worst = std::max(worst, std::abs(values_[index_of_codes(codes.data(), len)] - values_[i]));
    }
  }
  return worst;
}

MomentVector MomentVector::from_real_moments(const std::vector<double>& moments) {
  if (moments.empty() || std::abs(moments[0] - 1.0) > 1e-12) {
    throw std::invalid_argument("from_real_moments: moments[0] must be 1");
  }
  const int max_len = static_cast<int>(moments.size()) - 1;
  MomentVector mv(1, max_len);
  for (std::size_t i = 0; i < mv.size(); ++i) {
    mv[i] = moments[mv.codes_at(i).size()];
  }
  return mv;
}

Complex MomentVector::power_moment(int k) const {
  if (k < 0 || k > max_len_) throw std::out_of_range("power_moment: k out of range");
  std::vector<int> codes(static_cast<std::size_t>(k), 0);
  return values_[index_of_codes(codes.data(), k)];
}

MomentVector MomentVector::truncated(int max_len) const {
  if (max_len > max_len_) throw std::invalid_argument("truncated: cannot extend");
  MomentVector out(d_, max_len);
  std::copy(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(out.size()), out.values_.begin());
  return out;
}

CumulantVector::CumulantVector(int d, int max_len) : WordTable(d, max_len) {}

bool NonCrossingPartition::covers_ground_set() const {
  std::vector<int> seen(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& b : blocks) {
    if (b.empty()) return false;
    for (int e : b) {
      if (e < 1 || e > n || seen[static_cast<std::size_t>(e)]++) return false;
    }
  }
  return std::all_of(seen.begin() + 1, seen.end(), [](int s) { return s == 1; });
}

bool NonCrossingPartition::is_noncrossing() const {
  std::vector<int> owner(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (int e : blocks[b]) owner[static_cast<std::size_t>(e)] = static_cast<int>(b);
  }
  for (int a = 1; a <= n; ++a) {
    for (int b = a + 1; b <= n; ++b) {
      for (int c = b + 1; c <= n; ++c) {
        for (int d = c + 1; d <= n; ++d) {
          const auto oa = owner[static_cast<std::size_t>(a)];
          const auto ob = owner[static_cast<std::size_t>(b)];
          if (oa == owner[static_cast<std::size_t>(c)] && ob == owner[static_cast<std::size_t>(d)] && oa != ob) {
            return false;
          }
        }
      }
    }
  }
  return true;
}

namespace {

// Non-crossing partitions of the interval [lo, hi] (1-based, inclusive).
void nc_of_interval(int lo, int hi, std::vector<std::vector<std::vector<int>>>& out) {
  out.clear();
  if (lo > hi) {
    out.push_back({});
    return;
  }
  const int rest = hi - lo;  // elements after lo
  for (unsigned mask = 0; mask < (1u << rest); ++mask) {
    std::vector<int> block{lo};
    for (int k = 0; k < rest; ++k) {
      if (mask & (1u << k)) block.push_back(lo + 1 + k);
    }
    // Gaps between consecutive block elements and after the last one.
    std::vector<std::pair<int, int>> gaps;
    for (std::size_t k = 0; k + 1 < block.size(); ++k) gaps.emplace_back(block[k] + 1, block[k + 1] - 1);
    gaps.emplace_back(block.back() + 1, hi);
    std::vector<std::vector<std::vector<int>>> acc{{block}};
    for (const auto& [a, b] : gaps) {
      if (a > b) continue;
      std::vector<std::vector<std::vector<int>>> sub;
      nc_of_interval(a, b, sub);
      std::vector<std::vector<std::vector<int>>> next;
      next.reserve(acc.size() * sub.size());
      for (const auto& left : acc) {
        for (const auto& right : sub) {
          auto merged = left;
          merged.insert(merged.end(), right.begin(), right.end());
          next.push_back(std::move(merged));
        }
      }
      acc = std::move(next);
    }
    out.insert(out.end(), acc.begin(), acc.end());
  }
}

// Neumaier-compensated complex accumulator.
struct CompensatedSum {
  double re = 0.0, im = 0.0, cre = 0.0, cim = 0.0;

  static void add(double& sum, double& comp, double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  void operator+=(Complex v) {
    add(re, cre, v.real());
    add(im, cim, v.imag());
  }
  Complex value() const { return {re + cre, im + cim}; }
};

// Shared first-block recursion. For each word w (by increasing length):
//   total(w) = sum_{V containing position 0} kappa(w_V) prod_{gaps} m(gap).
// Moments -> cumulants solves for kappa(w) (the V = everything term);
// cumulants -> moments evaluates the sum directly. Words of one length only
// read shorter words, so each length is a parallel sweep.
void first_block_pass(const WordTable& shape, std::vector<Complex>& moments, std::vector<Complex>& cumulants,
                      bool solve_for_cumulants, bool parallel) {
  const int max_len = shape.max_len();
  const auto alphabet = static_cast<std::size_t>(shape.alphabet());
  for (int len = 1; len <= max_len; ++len) {
    const auto begin = static_cast<std::int64_t>(shape.offset(len));
    const auto end = static_cast<std::int64_t>(shape.offset(len + 1));
    const unsigned full = (len >= 2) ? ((1u << (len - 1)) - 1u) : 0u;
#pragma omp parallel for schedule(static) if (parallel && end - begin > 256)
    for (std::int64_t i = begin; i < end; ++i) {
      int codes[kMaxLenCap];
      std::size_t rest = static_cast<std::size_t>(i) - static_cast<std::size_t>(begin);
      for (int k = len - 1; k >= 0; --k) {
        codes[k] = static_cast<int>(rest % alphabet);
        rest /= alphabet;
      }
      // Moment of every contiguous block codes[a..b).
      Complex block[kMaxLenCap + 1][kMaxLenCap + 1];
      for (int a = 1; a < len; ++a) {
        std::size_t local = 0;
        for (int b = a + 1; b <= len; ++b) {
          local = local * alphabet + static_cast<std::size_t>(codes[b - 1]);
          block[a][b] = moments[shape.offset(b - a) + local];
        }
      }
      CompensatedSum acc;
      for (unsigned mask = 0; mask <= full; ++mask) {
        if (solve_for_cumulants && mask == full) continue;
        std::size_t sub = static_cast<std::size_t>(codes[0]);
        int sub_len = 1;
        int prev = 0;
        Complex term = 1.0;
        for (int k = 1; k < len; ++k) {
          if (mask & (1u << (k - 1))) {
            if (k - prev > 1) term *= block[prev + 1][k];
            sub = sub * alphabet + static_cast<std::size_t>(codes[k]);
            ++sub_len;
            prev = k;
          }
        }
        if (len - prev > 1) term *= block[prev + 1][len];
        if (term == Complex(0.0, 0.0)) continue;
        acc += term * cumulants[shape.offset(sub_len) + sub];
      }
      const auto idx = static_cast<std::size_t>(i);
      if (solve_for_cumulants) {
        cumulants[idx] = moments[idx] - acc.value();
      } else {
        moments[idx] = acc.value();
      }
    }
  }
}

}  // namespace

std::vector<NonCrossingPartition> enumerate_nc(int n) {
  if (n < 1 || n > 12) throw std::invalid_argument("enumerate_nc: n must be in [1, 12]");
  std::vector<std::vector<std::vector<int>>> raw;
  nc_of_interval(1, n, raw);
  std::vector<NonCrossingPartition> out;
  out.reserve(raw.size());
  for (auto& blocks : raw) {
    std::sort(blocks.begin(), blocks.end());
    out.push_back({n, std::move(blocks)});
  }
  std::sort(out.begin(), out.end());
  return out;
}

CumulantVector moments_to_cumulants(const MomentVector& mv) {
  CumulantVector cv(mv.d(), mv.max_len());
  std::vector<Complex> moments = mv.values();
  std::vector<Complex> cumulants(mv.size(), Complex(0.0, 0.0));
  first_block_pass(mv, moments, cumulants, true, true);
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = cumulants[i];
  cv[0] = 0.0;
  return cv;
}

MomentVector cumulants_to_moments(const CumulantVector& cv) {
  MomentVector mv(cv.d(), cv.max_len());
  std::vector<Complex> moments(cv.size(), Complex(0.0, 0.0));
  moments[0] = 1.0;
  std::vector<Complex> cumulants = cv.values();
  cumulants[0] = 0.0;
  first_block_pass(cv, moments, cumulants, false, true);
  for (std::size_t i = 0; i < mv.size(); ++i) mv[i] = moments[i];
  return mv;
}

MomentVector free_product_moments(const MomentVector& a, const MomentVector& b, int max_len) {
  if (max_len < 0 || a.max_len() < max_len || b.max_len() < max_len) {
    throw std::invalid_argument("free_product_moments: inputs shorter than the requested length");
  }
  const CumulantVector ka = moments_to_cumulants(a.truncated(max_len));
  const CumulantVector kb = moments_to_cumulants(b.truncated(max_len));
  const int da = a.d();
  CumulantVector joint(da + b.d(), max_len);
  std::vector<int> local;
  for (std::size_t i = 1; i < joint.size(); ++i) {
    const auto codes = joint.codes_at(i);
    const bool all_a = std::all_of(codes.begin(), codes.end(), [&](int c) { return c < 2 * da; });
    const bool all_b = std::all_of(codes.begin(), codes.end(), [&](int c) { return c >= 2 * da; });
    const int len = static_cast<int>(codes.size());
    if (all_a) {
      joint[i] = ka[ka.index_of_codes(codes.data(), len)];
    } else if (all_b) {
      local.assign(codes.begin(), codes.end());
      for (int& c : local) c -= 2 * da;
      joint[i] = kb[kb.index_of_codes(local.data(), len)];
    }
  }
  return cumulants_to_moments(joint);
}

namespace {

void require_self_adjoint_single(const MomentVector& mv, const char* who) {
  if (mv.d() != 1) throw std::invalid_argument(std::string(who) + ": single-variable input required");
  for (std::size_t i = 0; i < mv.size(); ++i) {
    const Complex v = mv[i];
    const Complex power = mv.power_moment(static_cast<int>(mv.codes_at(i).size()));
    if (std::abs(v.imag()) > 1e-12 || std::abs(v - power) > 1e-12) {
      throw std::invalid_argument(std::string(who) + ": moments must be real and star-symmetric");
    }
  }
}

}  // namespace

MomentVector free_convolve(const MomentVector& mu, const MomentVector& nu, int max_len) {
  require_self_adjoint_single(mu, "free_convolve");
  require_self_adjoint_single(nu, "free_convolve");
  if (mu.max_len() < max_len || nu.max_len() < max_len) {
    throw std::invalid_argument("free_convolve: inputs shorter than the requested length");
  }
  const CumulantVector a = moments_to_cumulants(mu.truncated(max_len));
  const CumulantVector b = moments_to_cumulants(nu.truncated(max_len));
  CumulantVector sum(1, max_len);
  for (std::size_t i = 1; i < sum.size(); ++i) sum[i] = a[i] + b[i];
  return cumulants_to_moments(sum);
}

ReferenceLaw parse_reference_law(const std::string& name) {
  if (name == "semicircular") return ReferenceLaw::Semicircular;
  if (name == "circular") return ReferenceLaw::Circular;
  if (name == "free_circular_family") return ReferenceLaw::FreeCircularFamily;
  throw std::invalid_argument("unknown reference law '" + name + "'");
}

MomentVector reference_law(ReferenceLaw law, int max_len, int d) {
  const int vars = law == ReferenceLaw::FreeCircularFamily ? d : 1;
  if (vars < 1) throw std::invalid_argument("reference_law: d must be >= 1");
  CumulantVector cv(vars, max_len);
  if (max_len >= 2) {
    for (std::size_t i = cv.offset(2); i < cv.offset(2) + static_cast<std::size_t>(4 * vars * vars); ++i) {
      const auto codes = cv.codes_at(i);
      const int v0 = codes[0] / 2, v1 = codes[1] / 2;
      const bool s0 = codes[0] % 2 == 1, s1 = codes[1] % 2 == 1;
      if (v0 != v1) continue;
      if (law == ReferenceLaw::Semicircular || s0 != s1) cv[i] = 1.0;
    }
  }
  return cumulants_to_moments(cv);
}

MomentVector matrix_moments(const MatrixTuple& x, int max_len, bool parallel) {
  MomentVector mv(x.d(), max_len);
  const bool self_adjoint = std::all_of(x.begin(), x.end(), [](const Matrix& m) { return m == m.adjoint(); });
  std::vector<StarWord> words;
  std::vector<std::size_t> source(mv.size(), 0);
  std::map<StarWord, std::size_t> slot;
  for (std::size_t i = 1; i < mv.size(); ++i) {
    StarWord w = mv.word_at(i);
    if (self_adjoint) {
      for (auto& l : w.letters) l.starred = false;
    }
    auto [it, inserted] = slot.try_emplace(w, words.size());
    if (inserted) words.push_back(std::move(w));
    source[i] = it->second;
  }
  const auto traces = word_traces(x, words, parallel);
  for (std::size_t i = 1; i < mv.size(); ++i) mv[i] = traces[source[i]];
  return mv;
}

nlohmann::json to_json(const MomentVector& mv) {
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t i = 0; i < mv.size(); ++i) {
    values[mv.word_at(i).to_string()] = {mv[i].real(), mv[i].imag()};
  }
  return {{"d", mv.d()}, {"max_len", mv.max_len()}, {"values", values}};
}

MomentVector moment_vector_from_json(const nlohmann::json& j) {
  MomentVector mv(j.at("d").get<int>(), j.at("max_len").get<int>());
  for (const auto& [key, val] : j.at("values").items()) {
    const StarWord w = parse_word(key);
    mv.at(w) = Complex(val.at(0).get<double>(), val.at(1).get<double>());
  }
  return mv;
}

}  // namespace mslab
