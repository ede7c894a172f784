#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cuefield {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

/// Largest admissible modulus for a point of the open disk. Beyond this the
/// hyperbolic metric loses all precision.
inline constexpr double max_disk_modulus = 1.0 - 1e-15;

/// A point of the open unit disk. The invariant |z| <= 1 - 1e-15 is checked on
/// construction, so every function taking a DiskPoint may assume it.
class DiskPoint {
 public:
  constexpr DiskPoint() = default;

  explicit DiskPoint(cplx z) : z_(z) {
    if (!(std::abs(z) <= max_disk_modulus)) {
      throw std::domain_error("DiskPoint: |z| = " + std::to_string(std::abs(z)) +
                              " is not strictly inside the unit disk");
    }
  }

  DiskPoint(double re, double im) : DiskPoint(cplx(re, im)) {}

  static DiskPoint origin() { return DiskPoint(); }

  cplx value() const { return z_; }
  double re() const { return z_.real(); }
  double im() const { return z_.imag(); }
  double modulus() const { return std::abs(z_); }

  /// 1 - |z|^2 without cancellation near the boundary.
  double one_minus_norm() const {
    double r = std::abs(z_);
    return (1.0 - r) * (1.0 + r);
  }

  DiskPoint conj() const { return DiskPoint(std::conj(z_)); }

  friend bool operator==(const DiskPoint& a, const DiskPoint& b) { return a.z_ == b.z_; }

 private:
  cplx z_{0.0, 0.0};
};

/// Principal argument in (-pi, pi]; the negative real axis maps to +pi.
inline double principal_arg(cplx z) {
  double a = std::arg(z);
  return a <= -pi ? pi : a;
}

/// log cosh(x) without overflow for large |x|.
inline double log_cosh(double x) {
  double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

/// A complex number stored as log-modulus and unit phase. Products of many
/// factors with wildly different magnitudes stay representable.
struct LogComplex {
  double log_abs = 0.0;
  cplx phase{1.0, 0.0};

  static LogComplex from(cplx z) {
    double a = std::abs(z);
    if (a == 0.0) return {-std::numeric_limits<double>::infinity(), cplx(1.0, 0.0)};
    return {std::log(a), z / a};
  }

  LogComplex& operator*=(const LogComplex& o) {
    log_abs += o.log_abs;
    phase *= o.phase;
    return *this;
  }
  LogComplex& operator/=(const LogComplex& o) {
    log_abs -= o.log_abs;
    phase /= o.phase;
    return *this;
  }
  LogComplex& operator*=(cplx z) { return *this *= from(z); }
  LogComplex& operator/=(cplx z) { return *this /= from(z); }

  LogComplex pow(long e) const {
    LogComplex r;
    r.log_abs = log_abs * static_cast<double>(e);
    r.phase = std::polar(1.0, std::arg(phase) * static_cast<double>(e));
    return r;
  }

  bool is_zero() const { return std::isinf(log_abs) && log_abs < 0; }

  cplx value() const { return is_zero() ? cplx(0.0, 0.0) : std::exp(log_abs) * phase; }
};

/// Neumaier-compensated complex summation.
class CompensatedSum {
 public:
  void add(cplx v) {
    add_part(v.real(), re_, re_c_);
    add_part(v.imag(), im_, im_c_);
  }
  cplx value() const { return {re_ + re_c_, im_ + im_c_}; }

 private:
  static void add_part(double x, double& sum, double& c) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      c += (sum - t) + x;
    } else {
      c += (x - t) + sum;
    }
    sum = t;
  }
  double re_ = 0.0, re_c_ = 0.0, im_ = 0.0, im_c_ = 0.0;
};

}  // namespace cuefield
