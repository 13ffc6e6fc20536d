#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace jbflow {

struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Truncated Taylor scalar in n variables: value, optionally gradient
/// (order >= 1) and symmetric Hessian (order == 2).  Arithmetic follows the
/// Leibniz/chain rules, so any computation written against plain doubles can
/// be replayed on jets to obtain exact forward derivatives.
///
/// A jet constructed from a bare double is a "constant": it is independent
/// of all variables and combines with jets of any dimension/order.
class Jet {
public:
  Jet() = default;
  Jet(double v) : val_(v), n_(0), order_(0) {}
  Jet(int v) : val_(v), n_(0), order_(0) {}

  static Jet constant(double v, int n, int order) {
    Jet j;
    j.val_ = v;
    j.n_ = n;
    j.order_ = order;
    if (order >= 1) j.grad_.assign(n, 0.0);
    if (order >= 2) j.hess_.assign(std::size_t(n) * n, 0.0);
    return j;
  }

  /// Coordinate seed: value v, d/dx_k = 1.
  static Jet variable(double v, int n, int order, int k) {
    Jet j = constant(v, n, order);
    if (order >= 1) j.grad_[k] = 1.0;
    return j;
  }

  double value() const { return val_; }
  int dim() const { return n_; }
  int order() const { return order_; }
  bool is_const() const { return n_ == 0; }

  double grad(int k) const { return order_ >= 1 && n_ > 0 ? grad_[k] : 0.0; }
  double hess(int j, int k) const {
    return order_ >= 2 && n_ > 0 ? hess_[std::size_t(j) * n_ + k] : 0.0;
  }
  double& grad_ref(int k) { return grad_[k]; }
  double& hess_ref(int j, int k) { return hess_[std::size_t(j) * n_ + k]; }

  Jet operator-() const {
    Jet r = *this;
    r.val_ = -r.val_;
    for (auto& g : r.grad_) g = -g;
    for (auto& h : r.hess_) h = -h;
    return r;
  }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r = Jet::align(a, b);
    const Jet bb = Jet::promote(b, r);
    r.val_ += bb.val_;
    for (std::size_t i = 0; i < r.grad_.size(); ++i) r.grad_[i] += bb.grad_[i];
    for (std::size_t i = 0; i < r.hess_.size(); ++i) r.hess_[i] += bb.hess_[i];
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) { return a + (-b); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet ar = Jet::align(a, b);
    Jet br = Jet::promote(b, ar);
    Jet r = Jet::constant(ar.val_ * br.val_, ar.n_, ar.order_);
    if (r.order_ >= 1)
      for (int k = 0; k < r.n_; ++k)
        r.grad_[k] = ar.grad_[k] * br.val_ + ar.val_ * br.grad_[k];
    if (r.order_ >= 2)
      for (int j = 0; j < r.n_; ++j)
        for (int k = 0; k < r.n_; ++k)
          r.hess_ref(j, k) = ar.hess(j, k) * br.val_ + ar.val_ * br.hess(j, k) +
                             ar.grad_[j] * br.grad_[k] + ar.grad_[k] * br.grad_[j];
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.val_ == 0.0) throw domain_error("division by zero");
    return a * b.recip();
  }

  friend Jet operator+(const Jet& a, double b) { return a + Jet(b); }
  friend Jet operator+(double a, const Jet& b) { return Jet(a) + b; }
  friend Jet operator-(const Jet& a, double b) { return a - Jet(b); }
  friend Jet operator-(double a, const Jet& b) { return Jet(a) - b; }
  friend Jet operator*(const Jet& a, double b) { return a * Jet(b); }
  friend Jet operator*(double a, const Jet& b) { return Jet(a) * b; }
  friend Jet operator/(const Jet& a, double b) { return a / Jet(b); }
  friend Jet operator/(double a, const Jet& b) { return Jet(a) / b; }

  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  /// Lift a smooth scalar function through the jet given f(x), f'(x), f''(x)
  /// evaluated at this->value().
  Jet chain(double f, double f1, double f2) const {
    Jet r = Jet::constant(f, n_, order_);
    if (order_ >= 1)
      for (int k = 0; k < n_; ++k) r.grad_[k] = f1 * grad_[k];
    if (order_ >= 2)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k)
          r.hess_ref(j, k) = f1 * hess(j, k) + f2 * grad_[j] * grad_[k];
    return r;
  }

private:
  Jet recip() const {
    const double iv = 1.0 / val_;
    return chain(iv, -iv * iv, 2.0 * iv * iv * iv);
  }

  // Widest shape of the two operands, holding a's data.
  static Jet align(const Jet& a, const Jet& b) {
    int n = a.n_ ? a.n_ : b.n_;
    int order;
    if (a.n_ == 0)
      order = b.order_;
    else if (b.n_ == 0)
      order = a.order_;
    else {
      assert(a.n_ == b.n_);
      order = a.order_ < b.order_ ? a.order_ : b.order_;
    }
    return promote_to(a, n, order);
  }
  static Jet promote(const Jet& x, const Jet& shape) {
    return promote_to(x, shape.n_, shape.order_);
  }
  static Jet promote_to(const Jet& x, int n, int order) {
    if (x.n_ == n && x.order_ == order) return x;
    Jet r = Jet::constant(x.val_, n, order);
    if (x.n_ == n) {
      if (order >= 1 && x.order_ >= 1) r.grad_ = x.grad_;
      if (order >= 2 && x.order_ >= 2) r.hess_ = x.hess_;
    }
    return r;
  }

  double val_ = 0.0;
  int n_ = 0;
  int order_ = 0;
  std::vector<double> grad_;
  std::vector<double> hess_;
};

inline Jet sin(const Jet& x) { return x.chain(std::sin(x.value()), std::cos(x.value()), -std::sin(x.value())); }
inline Jet cos(const Jet& x) { return x.chain(std::cos(x.value()), -std::sin(x.value()), -std::cos(x.value())); }
inline Jet exp(const Jet& x) {
  const double e = std::exp(x.value());
  return x.chain(e, e, e);
}
inline Jet log(const Jet& x) {
  if (x.value() <= 0.0) throw domain_error("log of non-positive value " + std::to_string(x.value()));
  const double iv = 1.0 / x.value();
  return x.chain(std::log(x.value()), iv, -iv * iv);
}
inline Jet sqrt(const Jet& x) {
  if (x.value() < 0.0) throw domain_error("sqrt of negative value " + std::to_string(x.value()));
  const double s = std::sqrt(x.value());
  if (s == 0.0) return x.chain(0.0, 0.0, 0.0);
  return x.chain(s, 0.5 / s, -0.25 / (s * s * s));
}
inline Jet abs(const Jet& x) {
  const double sg = x.value() < 0.0 ? -1.0 : (x.value() > 0.0 ? 1.0 : 0.0);
  return x.chain(std::abs(x.value()), sg, 0.0);
}

inline Jet pow(const Jet& base, const Jet& expn) {
  const double b = base.value();
  const double p = expn.value();
  const bool const_exp = expn.is_const() || expn.order() == 0;
  if (b == 0.0 && p == 0.0) return Jet::constant(1.0, base.dim(), base.order());
  if (const_exp) {
    const bool int_exp = p == std::floor(p) && std::abs(p) < 1e9;
    if (b < 0.0 && !int_exp)
      throw domain_error("negative base with non-integer exponent");
    if (b == 0.0) {
      if (p < 0.0) throw domain_error("zero base with negative exponent");
      // x^p at x=0: derivative 0 unless p==1 or p==2 where it is polynomial.
      const double f1 = p == 1.0 ? 1.0 : 0.0;
      const double f2 = p == 2.0 ? 2.0 : 0.0;
      return base.chain(0.0, f1, f2);
    }
    const double f = std::pow(b, p);
    return base.chain(f, p * std::pow(b, p - 1.0), p * (p - 1.0) * std::pow(b, p - 2.0));
  }
  if (b <= 0.0) throw domain_error("power with varying exponent needs positive base");
  return exp(expn * log(base));
}
inline Jet pow(const Jet& base, double p) { return pow(base, Jet(p)); }

/// Scalar access that works for both double and Jet code paths.
inline double scalar_value(double x) { return x; }
inline double scalar_value(const Jet& x) { return x.value(); }

}  // namespace jbflow
