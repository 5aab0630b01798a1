#pragma once

// Truncated Taylor jets: c[k] is the k-th Taylor coefficient, so the k-th
// derivative is k! c[k]. Used for exact derivatives of the smooth cutoff.

#include <array>
#include <cmath>

namespace homlab {

template <int N>
struct Jet {
  std::array<double, N + 1> c{};

  static Jet constant(double v) {
    Jet j;
    j.c[0] = v;
    return j;
  }
  static Jet variable(double v) {
    Jet j;
    j.c[0] = v;
    if constexpr (N >= 1) j.c[1] = 1.0;
    return j;
  }

  double derivative(int k) const {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f * c[k];
  }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r;
    for (int k = 0; k <= N; ++k) r.c[k] = a.c[k] + b.c[k];
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r;
    for (int k = 0; k <= N; ++k) r.c[k] = a.c[k] - b.c[k];
    return r;
  }
  friend Jet operator*(double s, const Jet& a) {
    Jet r;
    for (int k = 0; k <= N; ++k) r.c[k] = s * a.c[k];
    return r;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int k = 0; k <= N; ++k)
      for (int i = 0; i <= k; ++i) r.c[k] += a.c[i] * b.c[k - i];
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet r;
    for (int k = 0; k <= N; ++k) {
      double s = a.c[k];
      for (int i = 1; i <= k; ++i) s -= b.c[i] * r.c[k - i];
      r.c[k] = s / b.c[0];
    }
    return r;
  }
  friend Jet exp(const Jet& a) {
    Jet r;
    r.c[0] = std::exp(a.c[0]);
    for (int k = 1; k <= N; ++k) {
      double s = 0.0;
      for (int i = 1; i <= k; ++i) s += i * a.c[i] * r.c[k - i];
      r.c[k] = s / k;
    }
    return r;
  }
};

}  // namespace homlab
