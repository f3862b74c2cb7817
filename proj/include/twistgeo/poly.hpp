#pragma once

// Truncated multivariate polynomial arithmetic: the single code path behind
// every derivative in the engine.  A TruncPoly stores Taylor coefficients
// c_alpha = (d^alpha f)/alpha! around a base point, up to a total-degree cap
// and optional per-variable caps.  Order 3 gives the standard jets; higher
// orders (with caps) make spray derivatives exact where plain order 3 cannot.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace twistgeo {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class PolyBasis {
public:
  int nvars = 0;
  int order = 0;
  std::vector<int> caps;                    // per-variable degree caps
  std::vector<std::vector<int>> exps;       // rank -> exponent multi-index
  std::unordered_map<uint64_t, int> index;  // packed exponents -> rank
  std::vector<int32_t> prod_table;          // rank x rank -> rank of summed exponents, -1 if truncated

  int size() const { return static_cast<int>(exps.size()); }

  static uint64_t pack(const std::vector<int>& e) {
    uint64_t key = 0;
    for (size_t v = 0; v < e.size(); ++v) key |= static_cast<uint64_t>(e[v] & 0xF) << (4 * v);
    return key;
  }

  int find(const std::vector<int>& e) const {
    auto it = index.find(pack(e));
    return it == index.end() ? -1 : it->second;
  }

  // Shared, cached, immutable bases.  Degrees are capped at 15 so exponents
  // pack into 4-bit nibbles (nvars <= 16).
  static std::shared_ptr<const PolyBasis> get(int nvars, int order) {
    return get(nvars, order, std::vector<int>(static_cast<size_t>(nvars), order));
  }

  static std::shared_ptr<const PolyBasis> get(int nvars, int order, std::vector<int> var_caps) {
    if (nvars < 0 || nvars > 16 || order < 0 || order > 15)
      throw std::invalid_argument("PolyBasis: need 0 <= nvars <= 16, 0 <= order <= 15");
    std::string key = std::to_string(nvars) + "/" + std::to_string(order);
    for (int c : var_caps) key += ":" + std::to_string(c);
    static std::mutex mu;
    static std::unordered_map<std::string, std::shared_ptr<const PolyBasis>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto b = std::make_shared<PolyBasis>();
    b->nvars = nvars;
    b->order = order;
    b->caps = var_caps;
    std::vector<int> e(static_cast<size_t>(nvars), 0);
    // graded enumeration: total degree ascending, lex within each grade
    for (int deg = 0; deg <= order; ++deg) enumerate(*b, e, 0, deg);
    for (int r = 0; r < b->size(); ++r) b->index.emplace(pack(b->exps[static_cast<size_t>(r)]), r);
    const long n = b->size();
    if (n <= 400) {  // dense product table for the hot small bases
      b->prod_table.assign(static_cast<size_t>(n * n), -1);
      std::vector<int> s(static_cast<size_t>(nvars));
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
          int tot = 0;
          bool ok = true;
          for (int v = 0; v < nvars; ++v) {
            s[static_cast<size_t>(v)] = b->exps[static_cast<size_t>(i)][static_cast<size_t>(v)] +
                                        b->exps[static_cast<size_t>(j)][static_cast<size_t>(v)];
            tot += s[static_cast<size_t>(v)];
            if (s[static_cast<size_t>(v)] > var_caps[static_cast<size_t>(v)]) { ok = false; break; }
          }
          if (ok && tot <= order) b->prod_table[static_cast<size_t>(i * n + j)] = b->find(s);
        }
    }
    auto out = std::shared_ptr<const PolyBasis>(b);
    cache.emplace(key, out);
    return out;
  }

private:
  static void enumerate(PolyBasis& b, std::vector<int>& e, int var, int remaining) {
    if (var == b.nvars) {
      if (remaining == 0) b.exps.push_back(e);
      return;
    }
    int hi = std::min(remaining, b.caps[static_cast<size_t>(var)]);
    for (int d = 0; d <= hi; ++d) {
      e[static_cast<size_t>(var)] = d;
      enumerate(b, e, var + 1, remaining - d);
    }
    e[static_cast<size_t>(var)] = 0;
  }
};

class TruncPoly {
public:
  TruncPoly() = default;
  explicit TruncPoly(std::shared_ptr<const PolyBasis> basis)
      : b_(std::move(basis)), c_(Eigen::VectorXd::Zero(b_->size())) {}

  static TruncPoly constant(std::shared_ptr<const PolyBasis> basis, double v) {
    TruncPoly p(std::move(basis));
    p.c_[0] = v;
    return p;
  }

  // x0 + delta_var; the polynomial variable is the displacement.
  static TruncPoly variable(std::shared_ptr<const PolyBasis> basis, int var, double x0) {
    TruncPoly p(std::move(basis));
    p.c_[0] = x0;
    if (p.b_->order >= 1) {
      std::vector<int> e(static_cast<size_t>(p.b_->nvars), 0);
      e[static_cast<size_t>(var)] = 1;
      int r = p.b_->find(e);
      if (r < 0) throw std::invalid_argument("TruncPoly::variable: var capped out of basis");
      p.c_[r] = 1.0;
    }
    return p;
  }

  const std::shared_ptr<const PolyBasis>& basis() const { return b_; }
  const Eigen::VectorXd& coeffs() const { return c_; }
  Eigen::VectorXd& coeffs() { return c_; }

  double value() const { return c_[0]; }

  // d^alpha f = alpha! * c_alpha; returns 0 for exponents beyond the basis.
  double deriv(const std::vector<int>& alpha) const {
    int r = b_->find(alpha);
    if (r < 0) return 0.0;
    double f = 1.0;
    for (int a : alpha)
      for (int k = 2; k <= a; ++k) f *= k;
    return c_[r] * f;
  }

  double d1(int i) const {
    std::vector<int> a(static_cast<size_t>(b_->nvars), 0);
    a[static_cast<size_t>(i)] = 1;
    return deriv(a);
  }
  double d2(int i, int j) const {
    std::vector<int> a(static_cast<size_t>(b_->nvars), 0);
    a[static_cast<size_t>(i)] += 1;
    a[static_cast<size_t>(j)] += 1;
    return deriv(a);
  }
  double d3(int i, int j, int k) const {
    std::vector<int> a(static_cast<size_t>(b_->nvars), 0);
    a[static_cast<size_t>(i)] += 1;
    a[static_cast<size_t>(j)] += 1;
    a[static_cast<size_t>(k)] += 1;
    return deriv(a);
  }

  // Taylor polynomial of df/dx_var (one order of information drops).
  TruncPoly derivative(int var) const {
    TruncPoly out(b_);
    const auto& ex = b_->exps;
    for (int r = 0; r < b_->size(); ++r) {
      int a = ex[static_cast<size_t>(r)][static_cast<size_t>(var)];
      if (a == 0 || c_[r] == 0.0) continue;
      std::vector<int> t = ex[static_cast<size_t>(r)];
      t[static_cast<size_t>(var)] -= 1;
      out.c_[b_->find(t)] += c_[r] * a;
    }
    return out;
  }

  TruncPoly& operator+=(const TruncPoly& o) { c_ += o.c_; return *this; }
  TruncPoly& operator-=(const TruncPoly& o) { c_ -= o.c_; return *this; }
  TruncPoly& operator+=(double v) { c_[0] += v; return *this; }
  TruncPoly& operator-=(double v) { c_[0] -= v; return *this; }
  TruncPoly& operator*=(double v) { c_ *= v; return *this; }

  friend TruncPoly operator+(TruncPoly a, const TruncPoly& b) { return a += b; }
  friend TruncPoly operator-(TruncPoly a, const TruncPoly& b) { return a -= b; }
  friend TruncPoly operator+(TruncPoly a, double v) { return a += v; }
  friend TruncPoly operator+(double v, TruncPoly a) { return a += v; }
  friend TruncPoly operator-(TruncPoly a, double v) { return a -= v; }
  friend TruncPoly operator-(double v, const TruncPoly& a) {
    TruncPoly r = -a;
    r.c_[0] += v;
    return r;
  }
  friend TruncPoly operator*(TruncPoly a, double v) { return a *= v; }
  friend TruncPoly operator*(double v, TruncPoly a) { return a *= v; }
  friend TruncPoly operator/(TruncPoly a, double v) { return a *= (1.0 / v); }
  TruncPoly operator-() const {
    TruncPoly r(*this);
    r.c_ = -r.c_;
    return r;
  }

  friend TruncPoly operator*(const TruncPoly& a, const TruncPoly& b) {
    const PolyBasis& bs = *a.b_;
    TruncPoly out(a.b_);
    const long n = bs.size();
    const bool table = !bs.prod_table.empty();
    std::vector<int> s(static_cast<size_t>(bs.nvars));
    for (long i = 0; i < n; ++i) {
      double ai = a.c_[i];
      if (ai == 0.0) continue;
      for (long j = 0; j < n; ++j) {
        double bj = b.c_[j];
        if (bj == 0.0) continue;
        int r;
        if (table) {
          r = bs.prod_table[static_cast<size_t>(i * n + j)];
        } else {
          int tot = 0;
          bool ok = true;
          for (int v = 0; v < bs.nvars; ++v) {
            s[static_cast<size_t>(v)] = bs.exps[static_cast<size_t>(i)][static_cast<size_t>(v)] +
                                        bs.exps[static_cast<size_t>(j)][static_cast<size_t>(v)];
            tot += s[static_cast<size_t>(v)];
            if (s[static_cast<size_t>(v)] > bs.caps[static_cast<size_t>(v)]) { ok = false; break; }
          }
          if (!ok || tot > bs.order) continue;
          r = bs.find(s);
        }
        if (r >= 0) out.c_[r] += ai * bj;
      }
    }
    return out;
  }

  TruncPoly& operator*=(const TruncPoly& o) { return *this = *this * o; }

  friend TruncPoly operator/(const TruncPoly& a, const TruncPoly& b);

  // sum_j phi[j] * (this - value)^j via Horner; phi[j] = f^(j)(value)/j!.
  TruncPoly compose_series(const std::vector<double>& phi) const {
    TruncPoly w = *this;
    w.c_[0] = 0.0;
    TruncPoly r = constant(b_, phi.empty() ? 0.0 : phi.back());
    for (int j = static_cast<int>(phi.size()) - 2; j >= 0; --j) {
      r = r * w;
      r.c_[0] += phi[static_cast<size_t>(j)];
    }
    return r;
  }

private:
  std::shared_ptr<const PolyBasis> b_;
  Eigen::VectorXd c_;
};

namespace detail {
inline std::vector<double> pow_series(double u0, double c, int order) {
  // phi_j = binom(c, j) * u0^(c-j); exact for integer c including u0 <= 0.
  bool integral = (c == std::floor(c)) && std::abs(c) < 1e9;
  if (!integral && u0 <= 0.0) throw DomainError("pow: non-integer exponent needs positive base");
  if (integral && u0 == 0.0 && c < 0.0) throw DomainError("pow: zero base with negative exponent");
  std::vector<double> s(static_cast<size_t>(order) + 1, 0.0);
  double binom = 1.0;
  for (int j = 0; j <= order; ++j) {
    if (j > 0) binom *= (c - (j - 1)) / j;
    if (binom == 0.0) break;  // integer exponent exhausted
    double p;
    if (integral) {
      double e = c - j;
      p = (u0 == 0.0 && e == 0.0) ? 1.0 : std::pow(u0, e);
    } else {
      p = std::pow(u0, c - j);
    }
    s[static_cast<size_t>(j)] = binom * p;
  }
  return s;
}
}  // namespace detail

inline TruncPoly exp(const TruncPoly& u) {
  int K = u.basis()->order;
  std::vector<double> s(static_cast<size_t>(K) + 1);
  double e = std::exp(u.value());
  double fact = 1.0;
  for (int j = 0; j <= K; ++j) {
    if (j > 0) fact *= j;
    s[static_cast<size_t>(j)] = e / fact;
  }
  return u.compose_series(s);
}

inline TruncPoly log(const TruncPoly& u) {
  if (u.value() <= 0.0) throw DomainError("log of non-positive value");
  int K = u.basis()->order;
  std::vector<double> s(static_cast<size_t>(K) + 1);
  s[0] = std::log(u.value());
  double sign = 1.0;
  for (int j = 1; j <= K; ++j) {
    s[static_cast<size_t>(j)] = sign / (j * std::pow(u.value(), j));
    sign = -sign;
  }
  return u.compose_series(s);
}

inline TruncPoly sin(const TruncPoly& u) {
  int K = u.basis()->order;
  std::vector<double> s(static_cast<size_t>(K) + 1);
  double cyc[4] = {std::sin(u.value()), std::cos(u.value()), -std::sin(u.value()), -std::cos(u.value())};
  double fact = 1.0;
  for (int j = 0; j <= K; ++j) {
    if (j > 0) fact *= j;
    s[static_cast<size_t>(j)] = cyc[j % 4] / fact;
  }
  return u.compose_series(s);
}

inline TruncPoly cos(const TruncPoly& u) {
  int K = u.basis()->order;
  std::vector<double> s(static_cast<size_t>(K) + 1);
  double cyc[4] = {std::cos(u.value()), -std::sin(u.value()), -std::cos(u.value()), std::sin(u.value())};
  double fact = 1.0;
  for (int j = 0; j <= K; ++j) {
    if (j > 0) fact *= j;
    s[static_cast<size_t>(j)] = cyc[j % 4] / fact;
  }
  return u.compose_series(s);
}

inline TruncPoly pow(const TruncPoly& u, double c) {
  return u.compose_series(detail::pow_series(u.value(), c, u.basis()->order));
}

inline TruncPoly sqrt(const TruncPoly& u) {
  if (u.value() <= 0.0) throw DomainError("sqrt of non-positive value");
  return pow(u, 0.5);
}

inline TruncPoly recip(const TruncPoly& u) {
  if (u.value() == 0.0) throw DomainError("division by zero value");
  return pow(u, -1.0);
}

inline TruncPoly operator/(const TruncPoly& a, const TruncPoly& b) { return a * recip(b); }

// Gauss-Jordan inverse with value-part pivoting; works for any scalar field
// that TruncPoly models (used for inverse metrics carried to jet order).
inline std::vector<TruncPoly> poly_matrix_inverse(const std::vector<TruncPoly>& m, int n) {
  auto basis = m.at(0).basis();
  std::vector<TruncPoly> a = m;
  std::vector<TruncPoly> inv(static_cast<size_t>(n) * static_cast<size_t>(n), TruncPoly(basis));
  for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i * n + i)] = TruncPoly::constant(basis, 1.0);
  for (int col = 0; col < n; ++col) {
    int piv = -1;
    double best = 0.0;
    for (int r = col; r < n; ++r) {
      double v = std::abs(a[static_cast<size_t>(r * n + col)].value());
      if (v > best) { best = v; piv = r; }
    }
    if (piv < 0 || best < 1e-14) throw DomainError("poly_matrix_inverse: singular value part");
    if (piv != col)
      for (int c = 0; c < n; ++c) {
        std::swap(a[static_cast<size_t>(piv * n + c)], a[static_cast<size_t>(col * n + c)]);
        std::swap(inv[static_cast<size_t>(piv * n + c)], inv[static_cast<size_t>(col * n + c)]);
      }
    TruncPoly d = recip(a[static_cast<size_t>(col * n + col)]);
    for (int c = 0; c < n; ++c) {
      a[static_cast<size_t>(col * n + c)] = a[static_cast<size_t>(col * n + c)] * d;
      inv[static_cast<size_t>(col * n + c)] = inv[static_cast<size_t>(col * n + c)] * d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      TruncPoly f = a[static_cast<size_t>(r * n + col)];
      if (f.coeffs().isZero(0.0)) continue;
      for (int c = 0; c < n; ++c) {
        a[static_cast<size_t>(r * n + c)] -= f * a[static_cast<size_t>(col * n + c)];
        inv[static_cast<size_t>(r * n + c)] -= f * inv[static_cast<size_t>(col * n + c)];
      }
    }
  }
  return inv;
}

}  // namespace twistgeo
