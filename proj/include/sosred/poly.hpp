#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sosred {

/// Coefficients with magnitude below this are dropped from every polynomial.
inline constexpr double kCoeffZeroThreshold = 1e-14;

/// Exponent vector of a monomial, one entry per variable.
class Monomial {
 public:
  Monomial() = default;

  explicit Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_) {
      if (e < 0) throw std::invalid_argument("Monomial: negative exponent");
    }
    degree_ = std::accumulate(exps_.begin(), exps_.end(), 0);
  }

  static Monomial one(std::size_t nvars) {
    return Monomial(std::vector<int>(nvars, 0));
  }

  static Monomial variable(std::size_t nvars, std::size_t index, int power = 1) {
    std::vector<int> e(nvars, 0);
    e.at(index) = power;
    return Monomial(std::move(e));
  }

  std::size_t nvars() const { return exps_.size(); }
  int degree() const { return degree_; }
  int operator[](std::size_t i) const { return exps_[i]; }
  const std::vector<int>& exponents() const { return exps_; }

  Monomial operator*(const Monomial& other) const {
    if (other.nvars() != nvars()) {
      throw std::invalid_argument("Monomial: variable-count mismatch");
    }
    Monomial out;
    out.exps_.resize(exps_.size());
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      out.exps_[i] = exps_[i] + other.exps_[i];
    }
    out.degree_ = degree_ + other.degree_;
    return out;
  }

  double eval(std::span<const double> point) const {
    double v = 1.0;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      for (int k = 0; k < exps_[i]; ++k) v *= point[i];
    }
    return v;
  }

  bool operator==(const Monomial& other) const { return exps_ == other.exps_; }

 private:
  std::vector<int> exps_;
  int degree_ = 0;
};

/// Graded lexicographic order: lower total degree first, then the exponent
/// vector compared lexicographically with the first variable dominating, so
/// the degree-1 block of a basis reads x1, x2, ..., xn.
struct GrlexLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    if (a.degree() != b.degree()) return a.degree() < b.degree();
    return a.exponents() > b.exponents();
  }
};

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

/// All monomials in `nvars` variables of degree at most `maxdeg`, in graded
/// lexicographic order. Its length is binomial(nvars + maxdeg, nvars).
inline std::vector<Monomial> monomial_basis(std::size_t nvars, int maxdeg) {
  if (nvars < 1) throw std::invalid_argument("monomial_basis: nvars must be >= 1");
  if (maxdeg < 0) throw std::invalid_argument("monomial_basis: maxdeg must be >= 0");
  std::vector<Monomial> out;
  out.reserve(binomial(static_cast<int>(nvars) + maxdeg, static_cast<int>(nvars)));
  std::vector<int> e(nvars, 0);
  for (int d = 0; d <= maxdeg; ++d) {
    // Enumerate compositions of d into nvars parts, first variable highest.
    auto rec = [&](auto&& self, std::size_t pos, int remaining) -> void {
      if (pos + 1 == nvars) {
        e[pos] = remaining;
        out.emplace_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[pos] = k;
        self(self, pos + 1, remaining - k);
      }
    };
    rec(rec, 0, d);
  }
  return out;
}

/// Affine map w -> matrix * w + offset.
struct AffineMap {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;

  AffineMap() = default;
  AffineMap(Eigen::MatrixXd m, Eigen::VectorXd b) : matrix(std::move(m)), offset(std::move(b)) {
    if (matrix.rows() != offset.size()) {
      throw std::invalid_argument("AffineMap: matrix rows must equal offset length");
    }
  }

  static AffineMap identity(Eigen::Index n) {
    return AffineMap(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
  }

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& w) const { return matrix * w + offset; }

  /// (this o inner)(w) = this(inner(w)).
  AffineMap compose(const AffineMap& inner) const {
    if (cols() != inner.rows()) throw std::invalid_argument("AffineMap::compose: dimension mismatch");
    return AffineMap(matrix * inner.matrix, matrix * inner.offset + offset);
  }
};

/// Sparse multivariate polynomial with real coefficients. Terms are kept in
/// graded lexicographic order and pruned below kCoeffZeroThreshold.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GrlexLess>;

  Polynomial() = default;
  explicit Polynomial(std::size_t nvars) : nvars_(nvars) {}

  /// Duplicate monomials are summed.
  Polynomial(std::size_t nvars, const std::vector<std::pair<Monomial, double>>& terms) : nvars_(nvars) {
    for (const auto& [m, c] : terms) add_term(m, c);
    prune();
  }

  static Polynomial constant(std::size_t nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Monomial::one(nvars), c);
    p.prune();
    return p;
  }

  static Polynomial variable(std::size_t nvars, std::size_t index) {
    Polynomial p(nvars);
    p.add_term(Monomial::variable(nvars, index), 1.0);
    return p;
  }

  /// a^T z + b as a polynomial in z.
  static Polynomial affine(const Eigen::VectorXd& a, double b) {
    const auto n = static_cast<std::size_t>(a.size());
    Polynomial p(n);
    p.add_term(Monomial::one(n), b);
    for (std::size_t i = 0; i < n; ++i) p.add_term(Monomial::variable(n, i), a(static_cast<Eigen::Index>(i)));
    p.prune();
    return p;
  }

  std::size_t nvars() const { return nvars_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  int degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }

  double coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  double max_abs_coeff() const {
    double v = 0.0;
    for (const auto& [m, c] : terms_) v = std::max(v, std::abs(c));
    return v;
  }

  double eval(std::span<const double> point) const {
    if (point.size() != nvars_) throw std::invalid_argument("Polynomial::eval: point length mismatch");
    double v = 0.0;
    for (const auto& [m, c] : terms_) v += c * m.eval(point);
    return v;
  }

  double eval(const Eigen::VectorXd& point) const {
    return eval(std::span<const double>(point.data(), static_cast<std::size_t>(point.size())));
  }

  Polynomial operator-() const {
    Polynomial r = *this;
    for (auto& [m, c] : r.terms_) c = -c;
    return r;
  }

  Polynomial& operator+=(const Polynomial& q) {
    check_same(q);
    for (const auto& [m, c] : q.terms_) add_term(m, c);
    prune();
    return *this;
  }

  Polynomial& operator-=(const Polynomial& q) {
    check_same(q);
    for (const auto& [m, c] : q.terms_) add_term(m, -c);
    prune();
    return *this;
  }

  Polynomial& operator*=(double s) {
    for (auto& [m, c] : terms_) c *= s;
    prune();
    return *this;
  }

  friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
  friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }

  friend Polynomial operator*(const Polynomial& p, const Polynomial& q) {
    p.check_same(q);
    Polynomial r(p.nvars_);
    for (const auto& [mp, cp] : p.terms_) {
      for (const auto& [mq, cq] : q.terms_) r.add_term(mp * mq, cp * cq);
    }
    r.prune();
    return r;
  }

  Polynomial pow(int k) const {
    if (k < 0) throw std::invalid_argument("Polynomial::pow: negative exponent");
    Polynomial r = constant(nvars_, 1.0);
    Polynomial base = *this;
    while (k > 0) {
      if (k & 1) r = r * base;
      k >>= 1;
      if (k > 0) base = base * base;
    }
    return r;
  }

  /// Exact structural equality of the canonical term maps.
  bool operator==(const Polynomial& q) const { return nvars_ == q.nvars_ && terms_ == q.terms_; }

  /// Coefficient-wise comparison with an absolute tolerance.
  bool approx_equal(const Polynomial& q, double tol) const {
    return nvars_ == q.nvars_ && (*this - q).max_abs_coeff() <= tol;
  }

  /// Adds c to the coefficient of m without pruning; call prune() afterwards.
  void add_term(const Monomial& m, double c) {
    if (m.nvars() != nvars_) throw std::invalid_argument("Polynomial: monomial arity mismatch");
    terms_[m] += c;
  }

  void prune() {
    std::erase_if(terms_, [](const auto& kv) { return !(std::abs(kv.second) >= kCoeffZeroThreshold); });
  }

 private:
  void check_same(const Polynomial& q) const {
    if (q.nvars_ != nvars_) throw std::invalid_argument("Polynomial: variable-count mismatch");
  }

  std::size_t nvars_ = 0;
  TermMap terms_;
};

inline Polynomial add(const Polynomial& p, const Polynomial& q) { return p + q; }
inline Polynomial mul(const Polynomial& p, const Polynomial& q) { return p * q; }
inline double eval(const Polynomial& p, std::span<const double> point) { return p.eval(point); }

/// Substitutes z = M w + b into p. The result is a polynomial in w with
/// map.cols() variables and degree at most degree(p).
inline Polynomial compose_affine(const Polynomial& p, const AffineMap& map) {
  if (static_cast<Eigen::Index>(p.nvars()) != map.rows()) {
    throw std::invalid_argument("compose_affine: polynomial has " + std::to_string(p.nvars()) +
                                " variables but the map has " + std::to_string(map.rows()) + " rows");
  }
  const auto nw = static_cast<std::size_t>(map.cols());
  const std::size_t nz = p.nvars();

  // powers[i][k] = (row_i(w))^k, built lazily up to the largest exponent used.
  std::vector<int> maxexp(nz, 0);
  for (const auto& [m, c] : p.terms()) {
    for (std::size_t i = 0; i < nz; ++i) maxexp[i] = std::max(maxexp[i], m[i]);
  }
  std::vector<std::vector<Polynomial>> powers(nz);
  for (std::size_t i = 0; i < nz; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    Polynomial lin = Polynomial::affine(map.matrix.row(row).transpose(), map.offset(row));
    powers[i].push_back(Polynomial::constant(nw, 1.0));
    for (int k = 1; k <= maxexp[i]; ++k) powers[i].push_back(powers[i].back() * lin);
  }

  Polynomial out(nw);
  for (const auto& [m, c] : p.terms()) {
    Polynomial term = Polynomial::constant(nw, c);
    for (std::size_t i = 0; i < nz; ++i) {
      if (m[i] > 0) term = term * powers[i][static_cast<std::size_t>(m[i])];
    }
    for (const auto& [mt, ct] : term.terms()) out.add_term(mt, ct);
  }
  out.prune();
  return out;
}

/// Reinterprets a polynomial over the first p.nvars() of `nvars` variables.
inline Polynomial embed(const Polynomial& p, std::size_t nvars, std::size_t offset = 0) {
  if (offset + p.nvars() > nvars) throw std::invalid_argument("embed: target space too small");
  Polynomial out(nvars);
  for (const auto& [m, c] : p.terms()) {
    std::vector<int> e(nvars, 0);
    for (std::size_t i = 0; i < p.nvars(); ++i) e[offset + i] = m[i];
    out.add_term(Monomial(std::move(e)), c);
  }
  out.prune();
  return out;
}

/// Flat, cache-friendly form of a polynomial for repeated evaluation.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const Polynomial& p) : nvars_(p.nvars()) {
    for (const auto& [m, c] : p.terms()) {
      coeffs_.push_back(c);
      for (std::size_t i = 0; i < nvars_; ++i) {
        exps_.push_back(m[i]);
        maxexp_ = std::max(maxexp_, m[i]);
      }
    }
  }

  std::size_t nvars() const { return nvars_; }

  double operator()(std::span<const double> z) const {
    thread_local std::vector<double> pw;
    const std::size_t stride = static_cast<std::size_t>(maxexp_) + 1;
    pw.resize(nvars_ * stride);
    for (std::size_t i = 0; i < nvars_; ++i) {
      double v = 1.0;
      for (std::size_t k = 0; k < stride; ++k) {
        pw[i * stride + k] = v;
        v *= z[i];
      }
    }
    double s = 0.0;
    for (std::size_t t = 0; t < coeffs_.size(); ++t) {
      double term = coeffs_[t];
      const int* e = exps_.data() + t * nvars_;
      for (std::size_t i = 0; i < nvars_; ++i) {
        if (e[i] != 0) term *= pw[i * stride + static_cast<std::size_t>(e[i])];
      }
      s += term;
    }
    return s;
  }

  double operator()(const Eigen::VectorXd& z) const {
    return (*this)(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())));
  }

  double eval(const Eigen::VectorXd& z) const { return (*this)(z); }

 private:
  std::size_t nvars_ = 0;
  int maxexp_ = 0;
  std::vector<double> coeffs_;
  std::vector<int> exps_;
};

}  // namespace sosred
