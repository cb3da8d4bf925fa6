#pragma once

#include <cmath>
#include <utility>

namespace bifurc {

inline double primal(double x) { return x; }

/// First-order dual number over an arbitrary scalar ring T.
/// Nesting (Dual<Dual<double>>) yields exact second-order directional derivatives.
template <class T>
struct Dual {
  T v{};  // value part
  T d{};  // derivative part

  Dual() = default;
  Dual(double c) : v(c), d() {}  // passive constant, derivative zero
  Dual(T value, T deriv) : v(std::move(value)), d(std::move(deriv)) {}
};

template <class T>
double primal(const Dual<T>& x) {
  return primal(x.v);
}

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.d + b.d};
}
template <class T>
Dual<T> operator+(const Dual<T>& a, double b) {
  return {a.v + b, a.d};
}
template <class T>
Dual<T> operator+(double a, const Dual<T>& b) {
  return {a + b.v, b.d};
}

template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.v, -a.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.d - b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, double b) {
  return {a.v - b, a.d};
}
template <class T>
Dual<T> operator-(double a, const Dual<T>& b) {
  return {a - b.v, -b.d};
}

template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.d * b.v + a.v * b.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, double b) {
  return {a.v * b, a.d * b};
}
template <class T>
Dual<T> operator*(double a, const Dual<T>& b) {
  return {a * b.v, a * b.d};
}

template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T inv_bv = 1.0 / b.v;
  T q = a.v * inv_bv;
  return {q, (a.d - q * b.d) * inv_bv};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, double b) {
  return {a.v / b, a.d / b};
}
template <class T>
Dual<T> operator/(double a, const Dual<T>& b) {
  T inv_bv = 1.0 / b.v;
  T q = a * inv_bv;
  return {q, (-q * b.d) * inv_bv};
}

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;

template <class T>
Dual<T> exp(const Dual<T>& a) {
  T e = exp(a.v);
  return {e, a.d * e};
}

template <class T>
Dual<T> log(const Dual<T>& a) {
  return {log(a.v), a.d / a.v};
}

template <class T>
Dual<T> sin(const Dual<T>& a) {
  return {sin(a.v), a.d * cos(a.v)};
}

template <class T>
Dual<T> cos(const Dual<T>& a) {
  return {cos(a.v), -1.0 * a.d * sin(a.v)};
}

template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}

/// Integer power by repeated squaring; exact at negative bases, works in any ring.
template <class T>
T pow_int(T base, long long e) {
  if (e < 0) return 1.0 / pow_int(base, -e);
  T result(1.0);
  T b = base;
  while (e > 0) {
    if (e & 1) result = result * b;
    b = b * b;
    e >>= 1;
  }
  return result;
}

inline double pow_real(double base, double p) { return std::pow(base, p); }

/// Real power via the chain rule; caller guarantees a positive primal base.
template <class T>
Dual<T> pow_real(const Dual<T>& a, double p) {
  return {pow_real(a.v, p), a.d * (p * pow_real(a.v, p - 1.0))};
}

}  // namespace bifurc
