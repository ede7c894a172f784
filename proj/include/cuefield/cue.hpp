#pragma once

// CUE sampling and the field U(z) = sum_h log|1 - z e^{i theta_h}|.
//
// Two independent Haar samplers:
//  * QR of a complex Ginibre matrix (phase corrected), then eigenphases.
//  * Killip-Nenciu Verblunsky coefficients and the Szego recursion, giving
//    the reversed characteristic polynomial prod_h (1 - z conj(lambda_h))
//    without an eigensolver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cuefield/core.hpp"
#include "cuefield/fft.hpp"
#include "cuefield/rng.hpp"

namespace cuefield {

struct PhaseVector {
  std::vector<double> phases;
  std::size_t size() const { return phases.size(); }
};

class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Ginibre QR sampler

inline Eigen::MatrixXcd haar_unitary(std::size_t n, Engine& eng) {
  NormalSource normal(eng);
  auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXcd g(dim, dim);
  const double s = std::sqrt(0.5);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) {
      double re = normal();
      g(i, j) = cplx(re, normal()) * s;
    }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ();
  const auto& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < dim; ++j) {
    cplx d = r(j, j);
    double a = std::abs(d);
    q.col(j) *= (a > 0.0 ? d / a : cplx(1.0, 0.0));
  }
  return q;
}

inline PhaseVector sample_phases(std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  if (n < 1) throw std::invalid_argument("sample_phases: N must be >= 1");
  Engine eng = make_engine(seed, "sample_phases", stream);
  PhaseVector out;
  out.phases.reserve(n);
  if (n == 1) {
    out.phases.push_back(principal_arg(std::polar(1.0, 2.0 * pi * uniform01(eng))));
    return out;
  }
  Eigen::MatrixXcd u = haar_unitary(n, eng);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    out.phases.push_back(principal_arg(es.eigenvalues()(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Verblunsky sampler

/// alpha_k, k = 0..N-1: |alpha_k|^2 ~ Beta(1, N-k-1) with uniform phase for
/// k <= N-2, and alpha_{N-1} uniform on the unit circle.
inline std::vector<cplx> sample_verblunsky(std::size_t n, Engine& eng) {
  std::vector<cplx> alpha(n);
  for (std::size_t k = 0; k < n; ++k) {
    double phase = 2.0 * pi * uniform01(eng);
    if (k + 1 == n) {
      alpha[k] = std::polar(1.0, phase);
    } else {
      double nu = static_cast<double>(n - k - 1);
      double u = 1.0 - uniform01(eng);  // (0, 1]
      double mod2 = -std::expm1(std::log(u) / nu);
      alpha[k] = std::polar(std::sqrt(mod2), phase);
    }
  }
  return alpha;
}

/// Coefficients of Phi*_N(z) = prod_h (1 - z conj(lambda_h)), from
///   Phi_{k+1}(z) = z Phi_k(z) - conj(alpha_k) Phi*_k(z).
inline std::vector<cplx> reversed_char_poly(const std::vector<cplx>& alpha) {
  std::size_t n = alpha.size();
  std::vector<cplx> phi{cplx(1.0, 0.0)};
  phi.reserve(n + 1);
  std::vector<cplx> next;
  next.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    cplx ca = std::conj(alpha[k]);
    next.assign(k + 2, cplx(0.0, 0.0));
    for (std::size_t j = 0; j <= k + 1; ++j) {
      cplx shifted = j >= 1 ? phi[j - 1] : cplx(0.0, 0.0);
      cplx star = j <= k ? std::conj(phi[k - j]) : cplx(0.0, 0.0);
      next[j] = shifted - ca * star;
    }
    phi.swap(next);
  }
  std::vector<cplx> star(n + 1);
  for (std::size_t j = 0; j <= n; ++j) star[j] = std::conj(phi[n - j]);
  return star;
}

/// Phi*_N at each point by the O(N) recursion.
inline std::vector<cplx> reversed_char_poly_at(const std::vector<cplx>& alpha,
                                               const std::vector<cplx>& points) {
  std::vector<cplx> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    cplx z = points[p];
    cplx phi(1.0, 0.0), star(1.0, 0.0);
    for (cplx a : alpha) {
      cplx zphi = z * phi;
      phi = zphi - std::conj(a) * star;
      star = star - a * zphi;
    }
    out[p] = star;
  }
  return out;
}

/// Power sums p_k = sum_h x_h^k, k = 1..k_max, of the roots-inverse of
/// c(z) = prod_h (1 - x_h z) (Newton identities).
inline std::vector<cplx> power_sums(const std::vector<cplx>& c, std::size_t k_max) {
  std::vector<cplx> p(k_max + 1, cplx(0.0, 0.0));
  auto coef = [&](std::size_t j) { return j < c.size() ? c[j] : cplx(0.0, 0.0); };
  for (std::size_t k = 1; k <= k_max; ++k) {
    cplx s = -static_cast<double>(k) * coef(k);
    for (std::size_t m = 1; m < k; ++m) s -= p[m] * coef(k - m);
    p[k] = s;
  }
  return p;
}

/// |Tr U^k|^2, k = 1..k_max, from eigenphases.
inline std::vector<double> trace_moduli_sq(const PhaseVector& ph, std::size_t k_max) {
  std::vector<double> out(k_max + 1, 0.0);
  for (std::size_t k = 1; k <= k_max; ++k) {
    cplx s(0.0, 0.0);
    for (double t : ph.phases) s += std::polar(1.0, static_cast<double>(k) * t);
    out[k] = std::norm(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exponentially tilted Verblunsky sampler
//
// Samples the law of U under the weight |Phi*_N(r)|^q (q = 2 gives
// e^{2U(r)}) sequentially: Phi*_{k+1}(r) = Phi*_k(r) (1 - alpha_k gamma_k) with
// gamma_k = r Phi_k(r) / Phi*_k(r), |gamma_k| < 1. Each alpha_k is drawn from
// its law tilted by |1 - alpha gamma_k|^q via rejection; the importance weight
// is the product of the normalisers E|1 - alpha gamma_k|^q.

struct TiltedSample {
  double log_weight = 0.0;
  std::vector<double> values;  // U at the requested points
};

namespace detail {

inline double tilt_normaliser(double g2, double nu, int q) {
  // nu = 0 marks the final, circle-uniform coefficient.
  if (q == 2) return nu > 0.0 ? 1.0 + g2 / (nu + 1.0) : 1.0 + g2;
  if (nu > 0.0) return 1.0 + 4.0 * g2 / (nu + 1.0) + 2.0 * g2 * g2 / ((nu + 1.0) * (nu + 2.0));
  return 1.0 + 4.0 * g2 + g2 * g2;
}

}  // namespace detail

inline TiltedSample tilted_field_sample(std::size_t n, double tilt_radius, int q,
                                        const std::vector<cplx>& points, Engine& eng) {
  if (q != 2 && q != 4) throw std::invalid_argument("tilted_field_sample: q must be 2 or 4");
  if (!(tilt_radius >= 0.0 && tilt_radius < 1.0))
    throw std::domain_error("tilted_field_sample: tilt radius must be in [0,1)");
  TiltedSample out;
  std::vector<cplx> phi(points.size(), cplx(1.0, 0.0)), star(points.size(), cplx(1.0, 0.0));
  cplx tphi(1.0, 0.0), tstar(1.0, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    cplx gamma = tilt_radius * tphi / tstar;
    double ag = std::abs(gamma);
    double bound = std::pow(1.0 + ag, q);
    double nu = static_cast<double>(n - k - 1);
    cplx a;
    while (true) {
      double phase = 2.0 * pi * uniform01(eng);
      if (nu > 0.0) {
        double u = 1.0 - uniform01(eng);
        a = std::polar(std::sqrt(-std::expm1(std::log(u) / nu)), phase);
      } else {
        a = std::polar(1.0, phase);
      }
      double acc = std::pow(std::abs(1.0 - a * gamma), q) / bound;
      if (uniform01(eng) < acc) break;
    }
    out.log_weight += std::log(detail::tilt_normaliser(ag * ag, nu, q));
    cplx tz = tilt_radius * tphi;
    tphi = tz - std::conj(a) * tstar;
    tstar = tstar - a * tz;
    for (std::size_t p = 0; p < points.size(); ++p) {
      cplx zphi = points[p] * phi[p];
      phi[p] = zphi - std::conj(a) * star[p];
      star[p] = star[p] - a * zphi;
    }
  }
  out.values.resize(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) out.values[p] = std::log(std::abs(star[p]));
  return out;
}

// ---------------------------------------------------------------------------
// Field evaluation

inline double field_value(const PhaseVector& ph, cplx z) {
  double s = 0.0;
  for (double t : ph.phases) {
    double m = std::abs(1.0 - z * std::polar(1.0, t));
    if (m == 0.0) {
      std::ostringstream os;
      os << "field_eval: point " << z << " coincides with eigenvalue e^{-i" << t << "}";
      throw SingularityError(os.str());
    }
    s += std::log(m);
  }
  return s;
}

inline std::vector<double> field_eval(const PhaseVector& ph, const std::vector<DiskPoint>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& z : points) out.push_back(field_value(ph, z.value()));
  return out;
}

/// Field values at arbitrary points of the closed disk.
inline std::vector<double> field_eval(const PhaseVector& ph, const std::vector<cplx>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& z : points) {
    if (std::abs(z) > 1.0) throw std::domain_error("field_eval: point outside the closed disk");
    out.push_back(field_value(ph, z));
  }
  return out;
}

/// Polynomial sum_k c_k z^k held as e^{log_scale} * coeffs with max|coeffs| = 1.
struct ScaledPoly {
  double log_scale = 0.0;
  std::vector<cplx> coeffs{cplx(1.0, 0.0)};

  void normalise() {
    double m = 0.0;
    for (const auto& c : coeffs) m = std::max(m, std::abs(c));
    if (m == 0.0) return;
    for (auto& c : coeffs) c /= m;
    log_scale += std::log(m);
  }
};

inline ScaledPoly multiply(const ScaledPoly& a, const ScaledPoly& b) {
  ScaledPoly out;
  out.log_scale = a.log_scale + b.log_scale;
  out.coeffs = poly_multiply(a.coeffs, b.coeffs);
  out.normalise();
  return out;
}

namespace detail {
inline ScaledPoly interleaved_product(const std::vector<double>& sorted) {
  if (sorted.size() == 1) {
    ScaledPoly p;
    p.coeffs = {cplx(1.0, 0.0), -std::polar(1.0, sorted[0])};
    return p;
  }
  std::vector<double> even, odd;
  for (std::size_t i = 0; i < sorted.size(); ++i) (i % 2 == 0 ? even : odd).push_back(sorted[i]);
  return multiply(interleaved_product(even), interleaved_product(odd));
}
}  // namespace detail

/// prod_h (1 - z e^{i theta_h}) by a product tree over angularly interleaved
/// subsets, so every partial product has well-spread roots.
inline ScaledPoly char_poly_tree(const PhaseVector& ph) {
  if (ph.size() == 0) return {};
  std::vector<double> sorted = ph.phases;
  std::sort(sorted.begin(), sorted.end());
  return detail::interleaved_product(sorted);
}

enum class GridMethod { direct, fft };

struct FieldGrid {
  double radius = 0.0;
  std::size_t size = 0;
  double offset = 0.0;  // grid angle j is 2 pi (j + offset) / M
  std::vector<double> values;

  cplx point(std::size_t j) const {
    return std::polar(radius, 2.0 * pi * (static_cast<double>(j) + offset) / static_cast<double>(size));
  }
};

/// Half-cell offset if some eigenvalue sits within 1e-12 of a grid point on
/// the unit circle, 0 otherwise.
inline double grid_offset(const PhaseVector& ph, double radius, std::size_t m) {
  if (radius < 1.0) return 0.0;
  double md = static_cast<double>(m);
  for (double t : ph.phases) {
    // Grid point j hits the zero e^{-i t} when 2 pi j / M = -t (mod 2 pi).
    double pos = -t / (2.0 * pi) * md;
    double dist = std::abs(pos - std::round(pos)) * 2.0 * pi / md;
    if (dist < 1e-12) return 0.5;
  }
  return 0.0;
}

inline FieldGrid field_grid(const PhaseVector& ph, double radius, std::size_t m,
                            GridMethod method = GridMethod::fft) {
  if (m < 1) throw std::invalid_argument("field_grid: M must be >= 1");
  if (radius < 0.0 || radius > 1.0) throw std::domain_error("field_grid: radius must be in [0,1]");
  FieldGrid g{radius, m, grid_offset(ph, radius, m), std::vector<double>(m, 0.0)};
  if (radius == 0.0 || ph.size() == 0) return g;
  if (method == GridMethod::direct) {
    for (std::size_t j = 0; j < m; ++j) g.values[j] = field_value(ph, g.point(j));
    return g;
  }
  if (!is_power_of_two(m)) throw std::invalid_argument("field_grid: fft method needs M a power of two");
  ScaledPoly p = char_poly_tree(ph);
  if (g.offset != 0.0) {
    for (std::size_t k = 0; k < p.coeffs.size(); ++k)
      p.coeffs[k] *= std::polar(1.0, 2.0 * pi * g.offset * static_cast<double>(k) / static_cast<double>(m));
  }
  std::vector<cplx> v = eval_on_circle(p.coeffs, radius, m);
  for (std::size_t j = 0; j < m; ++j) {
    if (v[j] == cplx(0.0, 0.0)) throw SingularityError("field_grid: zero of the characteristic polynomial on the grid");
    g.values[j] = p.log_scale + std::log(std::abs(v[j]));
  }
  return g;
}

/// Field on the grid from coefficients of prod (1 - z x_h) (e.g. Verblunsky path).
inline FieldGrid field_grid_from_coeffs(const std::vector<cplx>& coeffs, double radius, std::size_t m) {
  FieldGrid g{radius, m, 0.0, std::vector<double>(m, 0.0)};
  std::vector<cplx> v = eval_on_circle(coeffs, radius, m);
  for (std::size_t j = 0; j < m; ++j) g.values[j] = std::log(std::abs(v[j]));
  return g;
}

struct GridMax {
  std::size_t index = 0;
  double value = -std::numeric_limits<double>::infinity();
};

inline GridMax grid_max(const FieldGrid& g) {
  GridMax out;
  for (std::size_t j = 0; j < g.values.size(); ++j) {
    if (g.values[j] > out.value) {
      out.value = g.values[j];
      out.index = j;
    }
  }
  return out;
}

inline GridMax field_max(const PhaseVector& ph, double radius, std::size_t m) {
  GridMethod method = is_power_of_two(m) ? GridMethod::fft : GridMethod::direct;
  return grid_max(field_grid(ph, radius, m, method));
}

/// Default grid for the maximum on |z| = 1 - 1/N: N ceil(log N) points,
/// rounded up to a power of two.
inline std::size_t default_max_grid(std::size_t n) {
  double ln = std::ceil(std::log(static_cast<double>(n)));
  return next_power_of_two(n * static_cast<std::size_t>(std::max(1.0, ln)));
}

// ---------------------------------------------------------------------------
// Deterministic relaxation

struct RelaxationReport {
  double inner_radius = 0.0;
  double inner_max = 0.0;
  double outer_max = 0.0;
  double max_slack = 0.0;         // inner_max - (outer_max - M)
  bool max_holds = true;
  std::size_t slide_checks = 0;
  std::size_t slide_violations = 0;
  double min_slide_slack = std::numeric_limits<double>::infinity();
};

/// Checks, on a common angular grid,
///   F(r2 w) - F(r1 w) <= N log((1 + r2) / (1 + r1))   for r1 < r2,
///   max_{|z| = 1 - M/N} F >= max_{|z| = 1} F - M.
inline RelaxationReport relaxation_check(const PhaseVector& ph, double m_param, std::size_t grid,
                                         double tol = 1e-8) {
  double n = static_cast<double>(ph.size());
  if (m_param <= 0.0 || m_param >= n) throw std::invalid_argument("relaxation_check: need 0 < M < N");
  RelaxationReport rep;
  rep.inner_radius = 1.0 - m_param / n;
  std::vector<double> radii{0.25, 0.5, 0.9, rep.inner_radius, 1.0};
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  GridMethod method = is_power_of_two(grid) ? GridMethod::fft : GridMethod::direct;
  double offset = grid_offset(ph, 1.0, grid);
  std::vector<FieldGrid> grids;
  for (double r : radii) {
    FieldGrid g = field_grid(ph, r, grid, method);
    if (g.offset != offset) {
      // Keep all radii on the unit-circle grid angles.
      g.offset = offset;
      for (std::size_t j = 0; j < grid; ++j) g.values[j] = field_value(ph, g.point(j));
    }
    grids.push_back(std::move(g));
  }
  for (std::size_t a = 0; a < radii.size(); ++a) {
    for (std::size_t b = a + 1; b < radii.size(); ++b) {
      double cap = n * std::log((1.0 + radii[b]) / (1.0 + radii[a]));
      for (std::size_t j = 0; j < grid; ++j) {
        double slack = cap - (grids[b].values[j] - grids[a].values[j]);
        ++rep.slide_checks;
        rep.min_slide_slack = std::min(rep.min_slide_slack, slack);
        if (slack < -tol) ++rep.slide_violations;
      }
    }
  }
  auto inner = std::find(radii.begin(), radii.end(), rep.inner_radius) - radii.begin();
  rep.inner_max = grid_max(grids[static_cast<std::size_t>(inner)]).value;
  rep.outer_max = grid_max(grids.back()).value;
  rep.max_slack = rep.inner_max - (rep.outer_max - m_param);
  rep.max_holds = rep.max_slack >= -tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Moment formulas

/// Var U(z) = (1/2) sum_k min(k, N) |z|^{2k} / k^2.
inline double cue_field_variance(std::size_t n, double modulus, double tol = 1e-12) {
  double r2 = modulus * modulus;
  double nn = static_cast<double>(n);
  double h1 = 0.0, h2 = 0.0, s = 0.0, pw = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    double kk = static_cast<double>(k);
    pw *= r2;
    h1 += 1.0 / kk;
    h2 += 1.0 / (kk * kk);
    s += pw / kk;
  }
  if (r2 >= 1.0) return 0.5 * (h1 + nn * (pi * pi / 6.0 - h2));
  // Tail N sum_{k>N} r^{2k} / k^2.
  double tail = 0.0;
  for (std::size_t k = n + 1;; ++k) {
    double kk = static_cast<double>(k);
    pw *= r2;
    double term = pw / (kk * kk);
    tail += term;
    if (nn * term * r2 / (1.0 - r2) < tol) break;
  }
  return 0.5 * (s + nn * tail);
}

}  // namespace cuefield
