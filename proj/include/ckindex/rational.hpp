#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ckindex {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Typed failures so the CLI can map them to exit codes.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct instability_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct precondition_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Rational rational_pow(const Rational& base, long e) {
  Rational r = 1;
  Rational b = base;
  long n = e;
  if (n < 0) {
    if (base == 0) throw precondition_error("rational_pow: 0 to negative power");
    b = Rational(denominator(base), numerator(base));
    n = -n;
  }
  while (n > 0) {
    if (n & 1) r *= b;
    b *= b;
    n >>= 1;
  }
  return r;
}

inline std::string rational_str(const Rational& r) {
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

inline double rational_double(const Rational& r) {
  return r.convert_to<double>();
}

// Gaussian rational: exact complex scalar for the symbolic algebra layer.
struct Scalar {
  Rational re;
  Rational im;

  Scalar() : re(0), im(0) {}
  Scalar(int v) : re(v), im(0) {}
  Scalar(Rational r) : re(std::move(r)), im(0) {}
  Scalar(Rational r, Rational i) : re(std::move(r)), im(std::move(i)) {}

  static Scalar i() { return Scalar(Rational(0), Rational(1)); }

  bool is_zero() const { return re == 0 && im == 0; }
  bool is_real() const { return im == 0; }

  Scalar conj() const { return Scalar(re, -im); }
  Rational abs2() const { return re * re + im * im; }

  Scalar operator-() const { return Scalar(-re, -im); }
  Scalar& operator+=(const Scalar& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  Scalar& operator-=(const Scalar& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(const Scalar& a, const Scalar& b) {
    return Scalar(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re);
  }
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }
  Scalar inverse() const {
    Rational d = abs2();
    if (d == 0) throw precondition_error("Scalar: division by zero");
    return Scalar(re / d, -im / d);
  }
  friend Scalar operator/(const Scalar& a, const Scalar& b) { return a * b.inverse(); }
  friend bool operator==(const Scalar& a, const Scalar& b) {
    return a.re == b.re && a.im == b.im;
  }
  friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }
};

// "p/q" for real values, "(re,im)" otherwise; parse_scalar accepts both.
inline std::string scalar_str(const Scalar& s) {
  if (s.im == 0) return rational_str(s.re);
  return "(" + rational_str(s.re) + "," + rational_str(s.im) + ")";
}

inline double scalar_double(const Scalar& s) {
  if (s.im != 0) throw precondition_error("scalar_double: non-real value");
  return rational_double(s.re);
}

}  // namespace ckindex
