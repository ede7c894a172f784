#pragma once

// The log-correlated Gaussian field G on the disk with
//   E G(z) G(y) = -log|1 - z conj(y)| / 2,   G(0) = 0,
// its covariance calculus, exponential biases, and two samplers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cuefield/core.hpp"
#include "cuefield/fft.hpp"
#include "cuefield/geometry.hpp"
#include "cuefield/rng.hpp"

namespace cuefield {

// ---------------------------------------------------------------------------
// Covariance kernel

inline double cov_kernel(DiskPoint z, DiskPoint y) {
  return -0.5 * std::log(std::abs(1.0 - z.value() * std::conj(y.value())));
}

/// Var G(z) = -log(1 - |z|^2) / 2.
inline double field_variance(DiskPoint z) { return -0.5 * std::log(z.one_minus_norm()); }

/// Covariance through hyperbolic distances:
/// (1/2) log( cosh(d(0,y)/2) cosh(d(0,z)/2) / cosh(d(z,y)/2) ).
inline double cov_hyperbolic(DiskPoint z, DiskPoint y) {
  return 0.5 * (log_cosh(0.5 * hyp_norm(y)) + log_cosh(0.5 * hyp_norm(z)) -
                log_cosh(0.5 * hyp_dist(z, y)));
}

/// Var(G(z) - G(y)) = log cosh(d_H(z, y) / 2).
inline double var_diff(DiskPoint z, DiskPoint y) { return log_cosh(0.5 * hyp_dist(z, y)); }

/// Var(G(z) - G(y)) from the Euclidean form
/// (1/2) log(|1 - z conj(y)|^2 / ((1 - |z|^2)(1 - |y|^2))).
inline double var_diff_euclidean(DiskPoint z, DiskPoint y) {
  return 0.5 * std::log(std::norm(1.0 - z.value() * std::conj(y.value())) /
                        (z.one_minus_norm() * y.one_minus_norm()));
}

struct CovarianceMatrix {
  std::vector<DiskPoint> points;
  Eigen::MatrixXd entries;
};

inline CovarianceMatrix covariance_matrix(const std::vector<DiskPoint>& points) {
  auto n = static_cast<Eigen::Index>(points.size());
  CovarianceMatrix c{points, Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = cov_kernel(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      c.entries(i, j) = v;
      c.entries(j, i) = v;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Exponential biases B(F) = lambda (sum_plus 2F(z) - sum_minus 2F(y))

class BiasSpec {
 public:
  BiasSpec() = default;

  BiasSpec(std::vector<DiskPoint> plus, std::vector<DiskPoint> minus, double lambda = 1.0,
           double separation_floor = 1e-9)
      : plus_(std::move(plus)), minus_(std::move(minus)), lambda_(lambda) {
    if (minus_.size() > plus_.size()) {
      throw std::invalid_argument("BiasSpec: more minus points than plus points");
    }
    std::vector<DiskPoint> all(plus_);
    all.insert(all.end(), minus_.begin(), minus_.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (hyp_dist(all[i], all[j]) < separation_floor) {
          std::ostringstream os;
          os << "BiasSpec: points " << j << " and " << i
             << " are closer than the separation floor " << separation_floor;
          throw std::invalid_argument(os.str());
        }
      }
    }
  }

  const std::vector<DiskPoint>& plus() const { return plus_; }
  const std::vector<DiskPoint>& minus() const { return minus_; }
  double lambda() const { return lambda_; }
  bool empty() const { return plus_.empty() && minus_.empty(); }

  /// Value of B on a field given by an evaluation function.
  template <typename Field>
  double apply(Field&& field) const {
    double s = 0.0;
    for (const auto& z : plus_) s += 2.0 * field(z);
    for (const auto& y : minus_) s -= 2.0 * field(y);
    return lambda_ * s;
  }

 private:
  std::vector<DiskPoint> plus_;
  std::vector<DiskPoint> minus_;
  double lambda_ = 1.0;
};

/// Mean shift mu(zeta) induced on G by tilting with e^{B(G)}.
inline double bias_mean(const BiasSpec& bias, DiskPoint at) {
  double s = 0.0;
  for (const auto& z : bias.plus()) s += 2.0 * cov_kernel(z, at);
  for (const auto& y : bias.minus()) s -= 2.0 * cov_kernel(y, at);
  return bias.lambda() * s;
}

/// log E e^{B(G)} = Var(B(G)) / 2, accumulated as a sum of log factors.
inline double log_exp_moment_gaussian(const BiasSpec& bias) {
  constexpr double tiny = 1e-300;
  auto log_factor = [&](DiskPoint a, DiskPoint b) {
    double f = std::abs(1.0 - a.value() * std::conj(b.value()));
    if (f < tiny) throw std::overflow_error("exp_moment_gaussian: pairwise factor underflows");
    return std::log(f);
  };
  double acc = 0.0;
  for (const auto& z : bias.plus())
    for (const auto& w : bias.plus()) acc -= log_factor(z, w);
  for (const auto& y : bias.minus())
    for (const auto& w : bias.minus()) acc -= log_factor(y, w);
  for (const auto& z : bias.plus())
    for (const auto& y : bias.minus()) acc += 2.0 * log_factor(z, y);
  return bias.lambda() * bias.lambda() * acc;
}

/// E e^{B(G)} =
///   prod_{z,y} |1 - z conj(y)|^2 / (prod_{y,w} (1 - y conj(w)) prod_{z,w} (1 - z conj(w)))
/// for lambda = 1, and the corresponding power lambda^2 of it in general.
inline double exp_moment_gaussian(const BiasSpec& bias) {
  double v = std::exp(log_exp_moment_gaussian(bias));
  if (!std::isfinite(v)) throw std::overflow_error("exp_moment_gaussian: result overflows");
  return v;
}

// ---------------------------------------------------------------------------
// Samplers

struct FieldSample {
  std::vector<DiskPoint> points;
  std::vector<double> values;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factor of the kernel covariance on a point set. Origin points are
/// kept out of the factorisation and always receive the value 0.
class GaussianFieldSampler {
 public:
  static constexpr double ridges[] = {0.0, 1e-14, 1e-12, 1e-10};

  explicit GaussianFieldSampler(std::vector<DiskPoint> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].modulus() != 0.0) active_.push_back(i);
    }
    std::vector<DiskPoint> act;
    act.reserve(active_.size());
    for (auto i : active_) act.push_back(points_[i]);
    Eigen::MatrixXd cov = covariance_matrix(act).entries;
    auto n = cov.rows();
    if (n == 0) return;
    std::ostringstream tried;
    for (double ridge : ridges) {
      Eigen::LLT<Eigen::MatrixXd> llt(cov + ridge * Eigen::MatrixXd::Identity(n, n));
      tried << ridge << ' ';
      if (llt.info() == Eigen::Success) {
        lower_ = llt.matrixL();
        ridge_ = ridge;
        return;
      }
    }
    throw FactorizationError("GaussianFieldSampler: covariance not factorizable with ridges " +
                             tried.str());
  }

  const std::vector<DiskPoint>& points() const { return points_; }
  double ridge() const { return ridge_; }
  const Eigen::MatrixXd& lower() const { return lower_; }

  /// One joint draw; values aligned with points().
  std::vector<double> draw(NormalSource& normal) const {
    std::vector<double> out(points_.size(), 0.0);
    if (active_.empty()) return out;
    Eigen::VectorXd xi(lower_.rows());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal();
    Eigen::VectorXd v = lower_.triangularView<Eigen::Lower>() * xi;
    for (std::size_t a = 0; a < active_.size(); ++a) out[active_[a]] = v(static_cast<Eigen::Index>(a));
    return out;
  }

  /// `count` draws as the columns of a matrix (rows aligned with points()).
  Eigen::MatrixXd draw_batch(NormalSource& normal, Eigen::Index count) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points_.size()), count);
    if (active_.empty()) return out;
    Eigen::MatrixXd xi(lower_.rows(), count);
    for (Eigen::Index c = 0; c < count; ++c)
      for (Eigen::Index r = 0; r < xi.rows(); ++r) xi(r, c) = normal();
    Eigen::MatrixXd v = lower_.triangularView<Eigen::Lower>() * xi;
    for (std::size_t a = 0; a < active_.size(); ++a)
      out.row(static_cast<Eigen::Index>(active_[a])) = v.row(static_cast<Eigen::Index>(a));
    return out;
  }

 private:
  std::vector<DiskPoint> points_;
  std::vector<std::size_t> active_;
  Eigen::MatrixXd lower_;
  double ridge_ = 0.0;
};

inline FieldSample sample_field(const std::vector<DiskPoint>& points, std::uint64_t seed) {
  GaussianFieldSampler sampler(points);
  Engine eng = make_engine(seed, "sample_field");
  NormalSource normal(eng);
  return {points, sampler.draw(normal)};
}

// Truncated random Fourier series on a circle:
//   G(z) = sum_{k=1}^{K} Re(z^k g_k) / sqrt(2k),
// g_k complex with independent N(0,1) real and imaginary parts.

/// sum_{k>K} r^{2k} / (2k), the covariance error of a K-term truncation.
inline double circle_tail_bound(double radius, int truncation) {
  double r2 = radius * radius;
  double s = 0.0;
  double term = std::pow(r2, truncation + 1);
  for (int k = truncation + 1; term > 1e-300; ++k, term *= r2) {
    double add = term / (2.0 * k);
    s += add;
    if (add < 1e-18 * s) {
      // Remaining geometric tail.
      s += add * r2 / (1.0 - r2);
      break;
    }
  }
  return s;
}

/// K = ceil(log(1/tol) / (2 log(1/radius))).
inline int circle_truncation(double radius, double tol = 1e-12) {
  if (radius <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log(1.0 / tol) / (2.0 * std::log(1.0 / radius)))));
}

/// Field values on the M-point grid radius * e^{2 pi i j / M}, given the
/// complex Gaussian coefficients g_1..g_K.
inline std::vector<double> circle_values_from_coeffs(const std::vector<cplx>& g, double radius,
                                                     std::size_t m) {
  std::vector<cplx> c(g.size() + 1, cplx(0.0, 0.0));
  for (std::size_t k = 1; k <= g.size(); ++k) c[k] = g[k - 1] / std::sqrt(2.0 * static_cast<double>(k));
  std::vector<cplx> v = eval_on_circle(c, radius, m);
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = v[j].real();
  return out;
}

inline std::vector<cplx> draw_series_coeffs(NormalSource& normal, int truncation) {
  std::vector<cplx> g(static_cast<std::size_t>(truncation));
  for (auto& gk : g) {
    double re = normal();
    gk = cplx(re, normal());
  }
  return g;
}

inline FieldSample sample_circle(double radius, std::size_t m, int truncation, std::uint64_t seed,
                                 double tol = 1e-12) {
  if (!(radius > 0.0 && radius < 1.0)) throw std::domain_error("sample_circle: radius must be in (0,1)");
  if (truncation < 1) throw std::invalid_argument("sample_circle: truncation must be >= 1");
  double tail = circle_tail_bound(radius, truncation);
  if (tail > tol) {
    std::ostringstream os;
    os << "sample_circle: truncation " << truncation << " leaves covariance error " << tail
       << " above tolerance " << tol << "; need K >= " << circle_truncation(radius, tol);
    throw std::invalid_argument(os.str());
  }
  Engine eng = make_engine(seed, "sample_circle");
  NormalSource normal(eng);
  auto g = draw_series_coeffs(normal, truncation);
  FieldSample s;
  s.values = circle_values_from_coeffs(g, radius, m);
  s.points.reserve(m);
  for (std::size_t j = 0; j < m; ++j)
    s.points.emplace_back(std::polar(radius, 2.0 * pi * static_cast<double>(j) / static_cast<double>(m)));
  return s;
}

/// Covariance of the K-term series at z, y: sum_{k<=K} Re((z conj(y))^k) / (2k).
inline double truncated_series_cov(DiskPoint z, DiskPoint y, int truncation) {
  cplx q = z.value() * std::conj(y.value());
  cplx p = 1.0;
  double s = 0.0;
  for (int k = 1; k <= truncation; ++k) {
    p *= q;
    s += p.real() / (2.0 * k);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Restricted fields F_r(z) = F(z) - F(anchor(z)) beyond hyperbolic radius r.

class MissingAnchorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sector anchor zeta_r e^{2 pi i h / Q} with Q = floor(e^{n0}) and
/// h = floor(arg(z) Q / (2 pi) + 1/2).
inline DiskPoint restriction_anchor(DiskPoint z, double r, double n0) {
  double q = std::floor(std::exp(n0));
  double h = std::floor(principal_arg(z.value()) * q / (2.0 * pi) + 0.5);
  return geodesic_point(r, std::polar(1.0, 2.0 * pi * h / q));
}

inline FieldSample restricted_transform(const FieldSample& sample, double r, double n0,
                                        double match_tol = 1e-12) {
  FieldSample out{sample.points, std::vector<double>(sample.points.size(), 0.0)};
  for (std::size_t i = 0; i < sample.points.size(); ++i) {
    DiskPoint z = sample.points[i];
    if (hyp_norm(z) < r) continue;
    DiskPoint anchor = restriction_anchor(z, r, n0);
    std::optional<std::size_t> found;
    for (std::size_t j = 0; j < sample.points.size(); ++j) {
      if (std::abs(sample.points[j].value() - anchor.value()) <= match_tol) {
        found = j;
        break;
      }
    }
    if (!found) {
      std::ostringstream os;
      os << "restricted_transform: anchor " << anchor.value() << " for point " << z.value()
         << " is not in the sample";
      throw MissingAnchorError(os.str());
    }
    out.values[i] = sample.values[i] - sample.values[*found];
  }
  return out;
}

}  // namespace cuefield
