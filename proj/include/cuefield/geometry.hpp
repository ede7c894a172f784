#pragma once

// Hyperbolic geometry of the Poincare disk.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cuefield/core.hpp"

namespace cuefield {

/// Disk automorphism T_y(z) = (z - y) / (1 - z conj(y)); sends y to 0.
inline DiskPoint mobius(DiskPoint center, DiskPoint z) {
  cplx y = center.value();
  cplx w = z.value();
  cplx r = (w - y) / (1.0 - w * std::conj(y));
  // Rounding can push |r| a hair past the admissible bound for points that
  // are astronomically far apart; clamp radially.
  double a = std::abs(r);
  if (a > max_disk_modulus) r *= max_disk_modulus / a;
  return DiskPoint(r);
}

/// Inverse of mobius(center, .), i.e. T_{-y}. Sends 0 to center.
inline DiskPoint mobius_inverse(DiskPoint center, DiskPoint z) {
  return mobius(DiskPoint(-center.value()), z);
}

/// 1 - |T_a(b)|^2, computed from the product form so that it stays accurate
/// when both points approach the boundary.
inline double one_minus_pseudo_norm(DiskPoint a, DiskPoint b) {
  double den = std::norm(1.0 - b.value() * std::conj(a.value()));
  return a.one_minus_norm() * b.one_minus_norm() / den;
}

/// Hyperbolic distance log((1 + |T_a(b)|) / (1 - |T_a(b)|)).
inline double hyp_dist(DiskPoint a, DiskPoint b) {
  if (a == b) return 0.0;
  double rho = std::abs(b.value() - a.value()) / std::abs(1.0 - b.value() * std::conj(a.value()));
  rho = std::min(rho, 1.0);
  double q = one_minus_pseudo_norm(a, b);  // (1 - rho)(1 + rho)
  return std::log((1.0 + rho) * (1.0 + rho) / q);
}

/// Distance from the origin, log((1 + |z|) / (1 - |z|)).
inline double hyp_norm(DiskPoint z) { return 2.0 * std::atanh(z.modulus()); }

/// Point at hyperbolic distance i from the origin in direction `phase`:
/// phase * tanh(i / 2).
inline DiskPoint geodesic_point(double i, cplx phase = cplx(1.0, 0.0)) {
  if (i < 0.0) throw std::domain_error("geodesic_point: negative index");
  return DiskPoint(phase / std::abs(phase) * std::tanh(0.5 * i));
}

/// Unit-speed geodesic ray from 0 in direction `phase`, sampled at integers.
class GeodesicRay {
 public:
  explicit GeodesicRay(cplx phase = cplx(1.0, 0.0), int length = 0)
      : phase_(phase / std::abs(phase)), length_(length) {}

  DiskPoint point(double i) const { return geodesic_point(i, phase_); }
  cplx phase() const { return phase_; }
  int length() const { return length_; }

 private:
  cplx phase_;
  int length_;
};

/// Rotation by theta about the ray point zeta_{n0}:
/// T^{-1}(e^{i theta} T(z)) with T = T_{zeta_{n0}}.
inline DiskPoint rotate_about(double theta, double n0, DiskPoint z) {
  DiskPoint c = geodesic_point(n0);
  DiskPoint moved = mobius(c, z);
  DiskPoint turned(std::polar(1.0, theta) * moved.value());
  return mobius_inverse(c, turned);
}

/// True iff every rotated ray point Q_theta(zeta_j), n0 <= j <= j_max, lies in
/// the wedge |arg z| <= e^{-n0} / 2.
inline bool wedge_check(double theta, double n0, int j_max) {
  double half_width = 0.5 * std::exp(-n0);
  for (int j = static_cast<int>(std::ceil(n0)); j <= j_max; ++j) {
    DiskPoint q = rotate_about(theta, n0, geodesic_point(j));
    if (q.modulus() == 0.0) continue;
    if (std::abs(principal_arg(q.value())) > half_width) return false;
  }
  return true;
}

/// Configured wedge constant Xi; wedge_check is meant for |theta| < Xi.
inline constexpr double default_wedge_xi = 1.0;

/// Largest theta on a grid of the given step such that wedge_check(+-t, n0,
/// j_max) holds for every grid t <= theta and every n0 in the list.
inline double calibrate_wedge_xi(const std::vector<double>& n0_list, int j_max, double step = 1e-3) {
  double theta = 0.0;
  while (theta + step < pi) {
    double next = theta + step;
    for (double n0 : n0_list)
      if (!wedge_check(next, n0, j_max) || !wedge_check(-next, n0, j_max)) return theta;
    theta = next;
  }
  return theta;
}

/// cosh of the third side of a hyperbolic triangle with sides b, c meeting at
/// angle theta.
inline double law_of_cosines_cosh(double b, double c, double theta) {
  return 0.5 * std::cosh(b + c) * (1.0 - std::cos(theta)) +
         0.5 * std::cosh(b - c) * (1.0 + std::cos(theta));
}

/// Branching approximation h + j - 2 min(-log|sin(theta/2)|, h, j) of
/// d_H(zeta_h, e^{i theta} zeta_j).
inline double branch_distance_approx(double h, double j, double theta) {
  double split = -std::log(std::abs(std::sin(0.5 * theta)));
  return h + j - 2.0 * std::min({split, h, j});
}

}  // namespace cuefield
