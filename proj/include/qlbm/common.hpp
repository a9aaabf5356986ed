#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlbm {

/// Thrown when a requested problem instance would exceed the memory budget.
/// Carries the estimated allocation so callers can report it.
struct capacity_error : std::runtime_error {
  capacity_error(const std::string& what, double bytes)
      : std::runtime_error(what), bytes_needed(bytes) {}
  double bytes_needed = 0.0;  ///< estimated peak allocation in bytes
};

/// Throw std::invalid_argument with `msg` unless `cond` holds.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Ceiling guarded against floating-point noise: values a hair below an
/// integer (e.g. pow(100, 1.5) = 999.9999...) are treated as that integer.
inline long long safe_ceil(double x) {
  return static_cast<long long>(std::ceil(x - 1e-9));
}

/// Smallest p with 2^p >= n (n >= 1).
inline int ilog2_ceil(unsigned long long n) {
  int p = 0;
  unsigned long long v = 1;
  while (v < n) {
    v <<= 1;
    ++p;
  }
  return p;
}

/// Binomial coefficient as a double (exact for the small arguments used here).
inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return std::round(r);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const std::vector<double>& a) {
  return std::sqrt(dot(a, a));
}

/// y += alpha * x
inline void axpy(double alpha, const std::vector<double>& x,
                 std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::vector<double>& a, double s) {
  for (double& v : a) v *= s;
}

}  // namespace qlbm
