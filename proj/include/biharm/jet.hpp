#pragma once

#include <array>
#include <complex>

namespace biharm {

// Truncated bivariate Taylor polynomial of degree 4 around a point,
// f ~ sum c(i, j) dx^i dy^j. Enough for exact bilaplacians of closed forms.
class Jet2 {
 public:
  using cplx = std::complex<double>;
  static constexpr int deg = 4;

  Jet2() { c_.fill(0.0); }
  Jet2(cplx v) { c_.fill(0.0); c_[0] = v; }  // NOLINT: implicit constants
  static Jet2 var_x(double x0) { Jet2 j(x0); j.at(1, 0) = 1.0; return j; }
  static Jet2 var_y(double y0) { Jet2 j(y0); j.at(0, 1) = 1.0; return j; }

  cplx& at(int i, int j) { return c_[slot(i, j)]; }
  cplx at(int i, int j) const { return c_[slot(i, j)]; }
  cplx value() const { return c_[0]; }
  // partial derivative d^{i+j} / dx^i dy^j at the expansion point
  cplx deriv(int i, int j) const { return at(i, j) * double(fact(i) * fact(j)); }
  cplx laplacian() const { return deriv(2, 0) + deriv(0, 2); }
  cplx bilaplacian() const { return deriv(4, 0) + 2.0 * deriv(2, 2) + deriv(0, 4); }

  Jet2& operator+=(const Jet2& o) { for (int k = 0; k < n; ++k) c_[k] += o.c_[k]; return *this; }
  Jet2& operator-=(const Jet2& o) { for (int k = 0; k < n; ++k) c_[k] -= o.c_[k]; return *this; }
  Jet2& operator*=(cplx a) { for (auto& v : c_) v *= a; return *this; }
  friend Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
  friend Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
  friend Jet2 operator-(Jet2 a) { return a *= -1.0; }
  friend Jet2 operator*(Jet2 a, cplx b) { return a *= b; }
  friend Jet2 operator*(cplx b, Jet2 a) { return a *= b; }
  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    Jet2 r;
    for (int i = 0; i <= deg; ++i)
      for (int j = 0; i + j <= deg; ++j) {
        const cplx av = a.at(i, j);
        if (av == 0.0) continue;
        for (int k = 0; i + k <= deg; ++k)
          for (int l = 0; i + j + k + l <= deg; ++l) r.at(i + k, j + l) += av * b.at(k, l);
      }
    return r;
  }

  // f(jet) from the derivatives f^(k)(value), k = 0..4
  Jet2 compose(const std::array<cplx, deg + 1>& df) const {
    Jet2 d = *this;
    d.c_[0] = 0.0;
    Jet2 r(df[0]), p(1.0);
    double kf = 1.0;
    for (int k = 1; k <= deg; ++k) {
      p = p * d;
      kf *= k;
      r += p * (df[k] / kf);
    }
    return r;
  }

 private:
  static constexpr int n = (deg + 1) * (deg + 2) / 2;
  static constexpr int slot(int i, int j) { return (i + j) * (i + j + 1) / 2 + j; }
  static constexpr long fact(int k) { return k <= 1 ? 1 : k * fact(k - 1); }
  std::array<cplx, n> c_;
};

inline Jet2 exp(const Jet2& a) {
  const auto e = std::exp(a.value());
  return a.compose({e, e, e, e, e});
}

// a^alpha (principal branch)
inline Jet2 pow(const Jet2& a, std::complex<double> alpha) {
  std::array<std::complex<double>, Jet2::deg + 1> df;
  std::complex<double> coef = 1.0;
  for (int k = 0; k <= Jet2::deg; ++k) {
    df[k] = coef * std::pow(a.value(), alpha - double(k));
    coef *= alpha - double(k);
  }
  return a.compose(df);
}

}  // namespace biharm
