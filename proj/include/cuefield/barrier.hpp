#pragma once

// Ballot and barrier probabilities for Gaussian walks and near-walk processes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cuefield/rng.hpp"
#include "cuefield/stats.hpp"

namespace cuefield {

struct MCEstimate {
  double probability = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;

  static MCEstimate from_counts(std::size_t hits, std::size_t samples) {
    MCEstimate e;
    e.samples = samples;
    if (samples == 0) return e;
    double p = static_cast<double>(hits) / static_cast<double>(samples);
    e.probability = p;
    e.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    return e;
  }
};

inline constexpr double no_barrier = std::numeric_limits<double>::infinity();

/// Z_i <= h_i for i = 1..n-1 and Z_n in [t, t + 1]. An empty covariance means
/// the standard Gaussian walk, R(i, j) = min(i, j).
struct BarrierProblem {
  std::size_t n = 1;
  std::vector<double> h;
  double t = 0.0;
  Eigen::MatrixXd covariance;

  bool is_walk() const { return covariance.size() == 0; }

  void validate() const {
    if (n < 1) throw std::invalid_argument("BarrierProblem: n must be >= 1");
    if (h.size() != n - 1) throw std::invalid_argument("BarrierProblem: barrier must have n-1 entries");
    if (!is_walk() && (covariance.rows() != static_cast<Eigen::Index>(n) || covariance.cols() != static_cast<Eigen::Index>(n)))
      throw std::invalid_argument("BarrierProblem: covariance must be n x n");
  }

  static BarrierProblem flat(std::size_t n, double level, double t) {
    return {n, std::vector<double>(n - 1, level), t, {}};
  }

  bool accepts(const double* z) const {
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (z[i] > h[i]) return false;
    return z[n - 1] >= t && z[n - 1] <= t + 1.0;
  }
};

/// R(i, j) = min(i, j), i, j = 1..n.
inline Eigen::MatrixXd walk_covariance(std::size_t n) {
  auto d = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd r(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) r(i, j) = static_cast<double>(std::min(i, j) + 1);
  return r;
}

/// Lower Cholesky factor with escalating ridge.
inline Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
  auto n = cov.rows();
  for (double ridge : {0.0, 1e-14, 1e-12, 1e-10}) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov + ridge * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error("cholesky_factor: covariance not factorizable with ridge <= 1e-10");
}

// ---------------------------------------------------------------------------
// Ballot

/// P(Y_i >= -x, i = 1..n; Y_n in [-x + y, -x + y + 1]) by plain MC, paths
/// abandoned as soon as they cross.
inline MCEstimate ballot_mc(std::size_t n, double x, double y, std::size_t samples, std::uint64_t seed,
                            std::uint64_t stream = 0) {
  if (n < 1) throw std::invalid_argument("ballot_mc: n must be >= 1");
  if (x < 1.0 || y < 1.0) throw std::invalid_argument("ballot_mc: needs x, y >= 1");
  Engine eng = make_engine(seed, "ballot", stream);
  NormalSource normal(eng);
  const double lo = -x + y, hi = lo + 1.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    double w = 0.0;
    bool alive = true;
    for (std::size_t i = 0; i < n; ++i) {
      w += normal();
      if (w < -x) {
        alive = false;
        break;
      }
    }
    if (alive && w >= lo && w <= hi) ++hits;
  }
  return MCEstimate::from_counts(hits, samples);
}

// ---------------------------------------------------------------------------
// Brownian reflection

/// P(W_u <= g, u <= n; W_n in [s, s + 1]) = int_s^{s+1} [p_n(x) - p_n(x - 2g)] dx.
inline double bridge_reflection(double n, double g, double s) {
  if (!(g > 0.0)) throw std::domain_error("bridge_reflection: needs g > 0");
  if (!(s < 0.0)) throw std::domain_error("bridge_reflection: needs s < 0");
  using stats::normal_cdf;
  double sd = std::sqrt(n);
  double window = normal_cdf((s + 1.0) / sd) - normal_cdf(s / sd);
  if (std::isinf(g)) return window;
  double reflected = normal_cdf((s + 1.0 - 2.0 * g) / sd) - normal_cdf((s - 2.0 * g) / sd);
  return window - reflected;
}

/// Brownian MC for bridge_reflection on a grid of `steps` steps. Between grid
/// points the barrier is crossed with the exact bridge probability
/// exp(-2 (g - x)(g - x') / dt), so the estimator carries no discretisation bias.
inline MCEstimate bridge_mc(double n, double g, double s, std::size_t steps, std::size_t samples,
                            std::uint64_t seed, std::uint64_t stream = 0) {
  Engine eng = make_engine(seed, "bridge", stream);
  NormalSource normal(eng);
  const double dt = n / static_cast<double>(steps);
  const double sd = std::sqrt(dt);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    double w = 0.0;
    bool alive = true;
    for (std::size_t i = 0; i < steps; ++i) {
      double next = w + sd * normal();
      if (next > g) {
        alive = false;
        break;
      }
      double cross = std::exp(-2.0 * (g - w) * (g - next) / dt);
      if (uniform01(eng) < cross) {
        alive = false;
        break;
      }
      w = next;
    }
    if (alive && w >= s && w <= s + 1.0) ++hits;
  }
  return MCEstimate::from_counts(hits, samples);
}

// ---------------------------------------------------------------------------
// General barrier MC

/// Draws paths of a centred Gaussian process in blocks.
class PathSampler {
 public:
  explicit PathSampler(std::size_t n, const Eigen::MatrixXd& covariance = {}) : n_(n) {
    if (covariance.size() != 0) lower_ = cholesky_factor(covariance);
  }

  std::size_t n() const { return n_; }

  /// Columns are paths; `noise` receives the underlying standard normals.
  void draw(NormalSource& normal, Eigen::Index count, Eigen::MatrixXd& noise, Eigen::MatrixXd& paths) const {
    auto d = static_cast<Eigen::Index>(n_);
    noise.resize(d, count);
    for (Eigen::Index c = 0; c < count; ++c)
      for (Eigen::Index r = 0; r < d; ++r) noise(r, c) = normal();
    paths_from_noise(noise, paths);
  }

  void paths_from_noise(const Eigen::MatrixXd& noise, Eigen::MatrixXd& paths) const {
    if (lower_.size() == 0) {
      paths = noise;
      for (Eigen::Index r = 1; r < paths.rows(); ++r) paths.row(r) += paths.row(r - 1);
    } else {
      paths.noalias() = lower_.triangularView<Eigen::Lower>() * noise;
    }
  }

 private:
  std::size_t n_;
  Eigen::MatrixXd lower_;
};

inline constexpr Eigen::Index mc_block = 4096;

/// Estimates for several barrier events driven by the same paths. exclusive
/// (a, b) counts samples in event a but not in event b.
struct CoupledEstimate {
  std::vector<MCEstimate> estimates;
  std::vector<std::vector<std::size_t>> exclusive;
};

inline CoupledEstimate barrier_mc_coupled(const std::vector<BarrierProblem>& problems, std::size_t samples,
                                          std::uint64_t seed, std::uint64_t stream = 0) {
  if (problems.empty()) return {};
  for (const auto& p : problems) p.validate();
  const std::size_t n = problems.front().n;
  for (const auto& p : problems)
    if (p.n != n) throw std::invalid_argument("barrier_mc_coupled: problems must share n");
  const std::size_t q = problems.size();
  std::vector<PathSampler> samplers;
  for (const auto& p : problems) samplers.emplace_back(n, p.covariance);

  Engine eng = make_engine(seed, "barrier", stream);
  NormalSource normal(eng);
  std::vector<std::size_t> hits(q, 0);
  std::vector<std::vector<std::size_t>> excl(q, std::vector<std::size_t>(q, 0));
  Eigen::MatrixXd noise, paths;
  std::vector<char> in(q);
  for (std::size_t done = 0; done < samples;) {
    auto count = static_cast<Eigen::Index>(std::min<std::size_t>(mc_block, samples - done));
    auto d = static_cast<Eigen::Index>(n);
    noise.resize(d, count);
    for (Eigen::Index c = 0; c < count; ++c)
      for (Eigen::Index r = 0; r < d; ++r) noise(r, c) = normal();
    std::vector<Eigen::MatrixXd> all(q);
    for (std::size_t a = 0; a < q; ++a) {
      bool reused = false;
      for (std::size_t b = 0; b < a; ++b) {
        if (problems[b].covariance.size() == problems[a].covariance.size() &&
            (problems[a].covariance.size() == 0 || problems[b].covariance == problems[a].covariance)) {
          all[a] = all[b];
          reused = true;
          break;
        }
      }
      if (!reused) samplers[a].paths_from_noise(noise, all[a]);
    }
    for (Eigen::Index c = 0; c < count; ++c) {
      for (std::size_t a = 0; a < q; ++a) {
        in[a] = problems[a].accepts(all[a].col(c).data());
        hits[a] += static_cast<std::size_t>(in[a]);
      }
      for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = 0; b < q; ++b)
          if (in[a] && !in[b]) ++excl[a][b];
    }
    done += static_cast<std::size_t>(count);
  }
  CoupledEstimate out;
  for (std::size_t a = 0; a < q; ++a) out.estimates.push_back(MCEstimate::from_counts(hits[a], samples));
  out.exclusive = std::move(excl);
  return out;
}

inline MCEstimate barrier_mc(const BarrierProblem& problem, std::size_t samples, std::uint64_t seed,
                             std::uint64_t stream = 0) {
  return barrier_mc_coupled({problem}, samples, seed, stream).estimates.front();
}

/// The barrier shift (log n)^{3/4}.
inline double barrier_shift(std::size_t n) { return std::pow(std::log(static_cast<double>(n)), 0.75); }

inline std::vector<double> shifted(const std::vector<double>& h, double by) {
  std::vector<double> out(h);
  for (auto& v : out) v += by;
  return out;
}

struct SandwichReport {
  MCEstimate lower_ref;  // p_Y(h - s)
  MCEstimate target;     // p_G(h)
  MCEstimate upper_ref;  // p_Y(h + s)
  double shift = 0.0;
  double epsilon = 0.0;
  double c1 = 0.0;
  double lower_margin = 0.0;  // in units of the combined SE; >= -4 passes
  double upper_margin = 0.0;
  bool holds = false;
};

/// (1 - eps) p_Y(h - s) - C1 <= p_G(h) <= (1 + eps) p_Y(h + s) + C1 with
/// s = (log n)^{3/4}, all three from common random numbers.
inline SandwichReport slepian_sandwich_check(const BarrierProblem& problem, double epsilon, std::size_t samples,
                                             std::uint64_t seed, double c1 = 0.0, std::uint64_t stream = 0) {
  if (problem.is_walk()) throw std::invalid_argument("slepian_sandwich_check: needs a custom covariance");
  SandwichReport rep;
  rep.shift = barrier_shift(problem.n);
  rep.epsilon = epsilon;
  rep.c1 = c1;
  BarrierProblem lo{problem.n, shifted(problem.h, -rep.shift), problem.t, {}};
  BarrierProblem hi{problem.n, shifted(problem.h, rep.shift), problem.t, {}};
  auto est = barrier_mc_coupled({lo, problem, hi}, samples, seed, stream).estimates;
  rep.lower_ref = est[0];
  rep.target = est[1];
  rep.upper_ref = est[2];
  auto margin = [](double slack, double se1, double se2) {
    double se = std::sqrt(se1 * se1 + se2 * se2);
    return se > 0.0 ? slack / se : (slack >= 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity());
  };
  rep.lower_margin = margin(rep.target.probability - ((1.0 - epsilon) * rep.lower_ref.probability - c1),
                            rep.target.std_error, (1.0 - epsilon) * rep.lower_ref.std_error);
  rep.upper_margin = margin((1.0 + epsilon) * rep.upper_ref.probability + c1 - rep.target.probability,
                            rep.target.std_error, (1.0 + epsilon) * rep.upper_ref.std_error);
  rep.holds = rep.lower_margin >= -4.0 && rep.upper_margin >= -4.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Two rays

/// Two processes of length n with joint covariance [[R11, R12], [R12^T, R22]].
/// For the overlap form, `overlap_k` > 0 enables the anchor Z^{(1)}_k in [z, z+1].
struct TwoRaySpec {
  BarrierProblem base;           // n, h, t; base.covariance unused
  Eigen::MatrixXd joint;         // 2n x 2n; empty means common-trunk walks
  std::size_t overlap_k = 0;     // 0: no anchor
  double z = 0.0;
  std::size_t trim = 0;          // barrier enforced on i = 1 + trim .. n - 1 - trim
};

/// Joint covariance of two walks sharing their first k increments:
/// E Y1_i Y2_j = min(i, j, k).
inline Eigen::MatrixXd common_trunk_covariance(std::size_t n, std::size_t k) {
  auto d = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd r(2 * d, 2 * d);
  Eigen::MatrixXd w = walk_covariance(n);
  Eigen::MatrixXd cross(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      cross(i, j) = static_cast<double>(std::min<std::size_t>({static_cast<std::size_t>(i) + 1, static_cast<std::size_t>(j) + 1, k}));
  r << w, cross, cross.transpose(), w;
  return r;
}

inline MCEstimate two_ray_mc(const TwoRaySpec& spec, std::size_t samples, std::uint64_t seed,
                             std::uint64_t stream = 0) {
  const std::size_t n = spec.base.n;
  if (spec.base.h.size() != n - 1) throw std::invalid_argument("two_ray_mc: barrier must have n-1 entries");
  if (spec.overlap_k >= n) throw std::invalid_argument("two_ray_mc: overlap index must satisfy k < n");
  auto d = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd joint = spec.joint.size() != 0 ? spec.joint : common_trunk_covariance(n, spec.overlap_k);
  if (joint.rows() != 2 * d) throw std::invalid_argument("two_ray_mc: joint covariance must be 2n x 2n");
  Eigen::MatrixXd lower = cholesky_factor(joint);
  Engine eng = make_engine(seed, "two_ray", stream);
  NormalSource normal(eng);
  std::size_t hits = 0;
  Eigen::MatrixXd noise, paths;
  auto ok = [&](const double* z) {
    for (std::size_t i = spec.trim; i + 1 + spec.trim < n; ++i)
      if (z[i] > spec.base.h[i]) return false;
    return z[n - 1] >= spec.base.t && z[n - 1] <= spec.base.t + 1.0;
  };
  for (std::size_t done = 0; done < samples;) {
    auto count = static_cast<Eigen::Index>(std::min<std::size_t>(mc_block, samples - done));
    noise.resize(2 * d, count);
    for (Eigen::Index c = 0; c < count; ++c)
      for (Eigen::Index r = 0; r < 2 * d; ++r) noise(r, c) = normal();
    paths.noalias() = lower.triangularView<Eigen::Lower>() * noise;
    for (Eigen::Index c = 0; c < count; ++c) {
      const double* p = paths.col(c).data();
      if (!ok(p) || !ok(p + n)) continue;
      if (spec.overlap_k > 0) {
        double a = p[spec.overlap_k - 1];
        if (a < spec.z || a > spec.z + 1.0) continue;
      }
      ++hits;
    }
    done += static_cast<std::size_t>(count);
  }
  return MCEstimate::from_counts(hits, samples);
}

// ---------------------------------------------------------------------------
// Ratio stability

struct RatioEstimate {
  double ratio = 0.0;
  double std_error = 0.0;
  MCEstimate numerator;
  MCEstimate denominator;
};

/// p_Y(n, t, h + s) / p_Y(n, t', h - s), s = (log n)^{3/4}, flat barrier h.
inline RatioEstimate ratio_stability(std::size_t n, double t, double t_prime, double h, std::size_t samples,
                                     std::uint64_t seed, std::uint64_t stream = 0) {
  double s = barrier_shift(n);
  BarrierProblem num = BarrierProblem::flat(n, h + s, t);
  BarrierProblem den = BarrierProblem::flat(n, h - s, t_prime);
  auto est = barrier_mc_coupled({num, den}, samples, seed, stream).estimates;
  RatioEstimate r;
  r.numerator = est[0];
  r.denominator = est[1];
  if (est[1].probability > 0.0) {
    r.ratio = est[0].probability / est[1].probability;
    double rel = std::hypot(est[0].std_error / std::max(est[0].probability, 1e-300),
                            est[1].std_error / est[1].probability);
    r.std_error = r.ratio * rel;
  } else {
    r.ratio = std::numeric_limits<double>::infinity();
  }
  return r;
}

}  // namespace cuefield
