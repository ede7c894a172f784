#pragma once

// Experiment harness: configuration, seeded parallel execution, aggregation
// and CSV/JSON output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cuefield/barrier.hpp"
#include "cuefield/cue.hpp"
#include "cuefield/gaussian_field.hpp"
#include "cuefield/geometry.hpp"
#include "cuefield/rng.hpp"
#include "cuefield/stats.hpp"
#include "cuefield/toeplitz.hpp"

namespace cuefield {

using json = nlohmann::json;

struct Row {
  std::string param_json;
  std::string statistic;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct RunContext {
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct RunResult {
  std::string experiment;
  std::vector<Row> rows;
  json manifest = json::object();
  bool failed = false;
  std::string error;

  void add(const json& params, std::string statistic, double value, double se = 0.0, std::size_t samples = 0) {
    rows.push_back({params.dump(), std::move(statistic), value, se, samples});
  }

  /// First row matching statistic and (optionally) a parameter value.
  const Row* find(const std::string& statistic, const std::string& key = "", const json& v = nullptr) const {
    for (const auto& r : rows) {
      if (r.statistic != statistic) continue;
      if (key.empty()) return &r;
      json p = json::parse(r.param_json);
      if (p.contains(key) && p[key] == v) return &r;
    }
    return nullptr;
  }
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Parallel execution

/// f(i) for i = 0..count-1 on `workers` threads; results in index order.
template <typename F>
auto parallel_map(std::size_t count, unsigned workers, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(count);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

/// Split `total` into fixed chunks of at most `chunk`.
inline std::vector<std::size_t> chunk_sizes(std::size_t total, std::size_t chunk) {
  std::vector<std::size_t> out;
  for (std::size_t done = 0; done < total; done += chunk) out.push_back(std::min(chunk, total - done));
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

class Section {
 public:
  Section(const json& j, std::string name) : j_(j.is_null() ? json::object() : j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": parameters must be a JSON object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(name_ + ": unknown key '" + k + "'");
  }

 private:
  json j_;
  std::string name_;
  std::set<std::string> seen_;
};

inline void require_positive(double v, const std::string& what) {
  if (!(v > 0)) throw ConfigError(what + " must be positive");
}

inline void require_n_list(const std::vector<std::size_t>& ns, const std::string& what) {
  if (ns.empty()) throw ConfigError(what + " must be non-empty");
  for (auto n : ns)
    if (n < 2) throw ConfigError(what + ": N values must be >= 2");
}

}  // namespace detail

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"toeplitz-verify", "moments", "domination", "max-law",
                                              "biased-mean", "ballot", "gaussian-max", "relaxation"};
  return names;
}

/// Validates the top-level keys of a configuration document.
inline void validate_config(const json& cfg) {
  if (!cfg.is_object()) throw ConfigError("config: top level must be a JSON object");
  const auto& names = experiment_names();
  for (const auto& [k, v] : cfg.items())
    if (std::find(names.begin(), names.end(), k) == names.end())
      throw ConfigError("config: unknown experiment key '" + k + "'");
}

// ---------------------------------------------------------------------------
// toeplitz-verify

struct ToeplitzVerifyParams {
  std::size_t instances = 200;
  std::size_t n_max = 12;
  double tolerance = 1e-8;
  double baxter_tolerance = 1e-10;
  double max_modulus = 0.9;
  double min_separation = 0.05;

  static ToeplitzVerifyParams from(const json& j) {
    detail::Section s(j, "toeplitz-verify");
    ToeplitzVerifyParams p;
    p.instances = s.get("instances", p.instances);
    p.n_max = s.get("n_max", p.n_max);
    p.tolerance = s.get("tolerance", p.tolerance);
    p.baxter_tolerance = s.get("baxter_tolerance", p.baxter_tolerance);
    p.max_modulus = s.get("max_modulus", p.max_modulus);
    p.min_separation = s.get("min_separation", p.min_separation);
    s.finish();
    detail::require_positive(static_cast<double>(p.instances), "instances");
    if (p.n_max < 2 || p.n_max > direct_det_max_n) throw ConfigError("n_max must be in [2, 64]");
    return p;
  }
};

namespace detail {

inline cplx random_in_disk(Engine& eng, double radius) {
  return std::polar(radius * std::sqrt(uniform01(eng)), 2.0 * pi * uniform01(eng));
}

/// Random symbol with l, m <= 3, k <= 2 and all roots of modulus <= max_modulus,
/// pairwise separated (numerator roots also kept away from 0).
inline RationalSymbol random_symbol(Engine& eng, double max_modulus, double sep) {
  auto pick = [&](int hi) { return static_cast<int>(uniform01(eng) * (hi + 1)); };
  int l = pick(3), m = pick(3), k = pick(2);
  std::vector<cplx> used;
  auto fresh = [&](bool numerator) {
    while (true) {
      cplx c = random_in_disk(eng, max_modulus);
      if (numerator && std::abs(c) < sep) continue;
      bool ok = true;
      for (const auto& u : used) ok = ok && std::abs(u - c) >= sep;
      if (ok) {
        used.push_back(c);
        return c;
      }
    }
  };
  RationalSymbol s;
  for (int i = 0; i < l; ++i) s.a.push_back(fresh(false));
  for (int i = 0; i < m; ++i) s.b.push_back(fresh(false));
  for (int i = 0; i < 2 * k; ++i) s.p_roots.push_back(fresh(true));
  NormalSource normal(eng);
  double re = normal();
  s.lead = cplx(re, normal());
  s.k = k;
  return s;
}

inline double rel_err(cplx got, cplx want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

}  // namespace detail

inline RunResult run_toeplitz_verify(const ToeplitzVerifyParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "toeplitz-verify";
  struct Out {
    std::size_t checks = 0, failures = 0, below_checks = 0, below_failures = 0;
    double max_err = 0.0, below_max_err = 0.0;
    std::size_t baxter_checks = 0, baxter_failures = 0;
    double baxter_max_err = 0.0, baxter_violation_max_dev = 0.0;
    std::size_t p2_checks = 0, p2_failures = 0;
    double p2_max_err = 0.0;
  };
  auto outs = parallel_map(p.instances, ctx.workers, [&](std::size_t i) {
    Out o;
    Engine eng = make_engine(ctx.seed, "toeplitz-verify", i);
    RationalSymbol sym = detail::random_symbol(eng, p.max_modulus, p.min_separation);
    std::size_t l = sym.a.size(), m = sym.b.size(), k = static_cast<std::size_t>(sym.k);
    std::size_t n_lo = l > k ? std::max<std::size_t>(l - k, 1) : 1;
    for (std::size_t n = 1; n <= p.n_max; ++n) {
      cplx d = direct_det(sym, n).value;
      cplx c = corrected_det(sym, n, false).value;
      double e = detail::rel_err(c, d);
      if (n >= n_lo && n + 3 * k >= l + m + 2) {
        ++o.checks;
        o.max_err = std::max(o.max_err, e);
        if (!(e <= p.tolerance)) ++o.failures;
      } else {
        ++o.below_checks;
        o.below_max_err = std::max(o.below_max_err, e);
        if (!(e <= p.tolerance)) ++o.below_failures;
      }
    }
    // Cauchy (Baxter) instance on the same denominator roots.
    RationalSymbol bax;
    bax.a = sym.a;
    bax.b = sym.b;
    for (std::size_t n = 1; n <= p.n_max; ++n) {
      cplx d = direct_det(bax, n).value;
      cplx prod(1.0, 0.0);
      for (const auto& aj : bax.a)
        for (const auto& bi : bax.b) prod /= 1.0 - aj * bi;
      double e = detail::rel_err(prod, d);
      if (n >= l || n >= m) {
        ++o.baxter_checks;
        o.baxter_max_err = std::max(o.baxter_max_err, e);
        if (!(e <= p.baxter_tolerance)) ++o.baxter_failures;
      } else {
        o.baxter_violation_max_dev = std::max(o.baxter_violation_max_dev, e);
      }
    }
    // Two-point closed form.
    cplx z1, z2;
    do {
      z1 = detail::random_in_disk(eng, p.max_modulus);
      z2 = detail::random_in_disk(eng, p.max_modulus);
    } while (std::abs(z1 - z2) < p.min_separation || std::abs(z1) < p.min_separation);
    BiasSpec b2({DiskPoint(z1)}, {DiskPoint(z2)});
    for (std::size_t n = 1; n <= p.n_max; ++n) {
      double den = (1.0 - std::norm(z1)) * (1.0 - std::norm(z2));
      double closed = std::norm(1.0 - std::conj(z1) * z2) / den -
                      std::norm(z1 - z2) * std::pow(std::norm(z1), static_cast<double>(n)) / den;
      cplx d = direct_det(moment_symbol(b2), n).value;
      double e = detail::rel_err(closed, d);
      ++o.p2_checks;
      o.p2_max_err = std::max(o.p2_max_err, e);
      if (!(e <= p.tolerance)) ++o.p2_failures;
    }
    return o;
  });
  Out t;
  for (const auto& o : outs) {
    t.checks += o.checks;
    t.failures += o.failures;
    t.max_err = std::max(t.max_err, o.max_err);
    t.below_checks += o.below_checks;
    t.below_failures += o.below_failures;
    t.below_max_err = std::max(t.below_max_err, o.below_max_err);
    t.baxter_checks += o.baxter_checks;
    t.baxter_failures += o.baxter_failures;
    t.baxter_max_err = std::max(t.baxter_max_err, o.baxter_max_err);
    t.baxter_violation_max_dev = std::max(t.baxter_violation_max_dev, o.baxter_violation_max_dev);
    t.p2_checks += o.p2_checks;
    t.p2_failures += o.p2_failures;
    t.p2_max_err = std::max(t.p2_max_err, o.p2_max_err);
  }
  json prm{{"instances", p.instances}, {"n_max", p.n_max}, {"tolerance", p.tolerance}, {"seed", ctx.seed}};
  res.add(prm, "corrected_checks", static_cast<double>(t.checks), 0, p.instances);
  res.add(prm, "corrected_failures", static_cast<double>(t.failures), 0, p.instances);
  res.add(prm, "corrected_max_rel_error", t.max_err, 0, p.instances);
  res.add(prm, "below_hypothesis_checks", static_cast<double>(t.below_checks), 0, p.instances);
  res.add(prm, "below_hypothesis_failures", static_cast<double>(t.below_failures), 0, p.instances);
  res.add(prm, "below_hypothesis_max_rel_error", t.below_max_err, 0, p.instances);
  json bprm = prm;
  bprm["tolerance"] = p.baxter_tolerance;
  res.add(bprm, "baxter_checks", static_cast<double>(t.baxter_checks), 0, p.instances);
  res.add(bprm, "baxter_failures", static_cast<double>(t.baxter_failures), 0, p.instances);
  res.add(bprm, "baxter_max_rel_error", t.baxter_max_err, 0, p.instances);
  res.add(bprm, "baxter_violation_max_deviation", t.baxter_violation_max_dev, 0, p.instances);
  res.add(prm, "two_point_checks", static_cast<double>(t.p2_checks), 0, p.instances);
  res.add(prm, "two_point_failures", static_cast<double>(t.p2_failures), 0, p.instances);
  res.add(prm, "two_point_max_rel_error", t.p2_max_err, 0, p.instances);
  return res;
}

// ---------------------------------------------------------------------------
// moments

struct MomentsParams {
  std::vector<std::size_t> n_list{2, 4, 8};
  std::size_t samples = 200000;
  std::size_t chunk = 5000;

  static MomentsParams from(const json& j) {
    detail::Section s(j, "moments");
    MomentsParams p;
    p.n_list = s.get("n_list", p.n_list);
    p.samples = s.get("samples", p.samples);
    p.chunk = s.get("chunk", p.chunk);
    s.finish();
    detail::require_n_list(p.n_list, "n_list");
    detail::require_positive(static_cast<double>(p.samples), "samples");
    detail::require_positive(static_cast<double>(p.chunk), "chunk");
    return p;
  }
};

inline RunResult run_moments(const MomentsParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "moments";
  for (std::size_t ni = 0; ni < p.n_list.size(); ++ni) {
    const std::size_t n = p.n_list[ni];
    const std::size_t kmax = 2 * n;
    auto sizes = chunk_sizes(p.samples, p.chunk);
    using Acc = std::pair<std::vector<stats::MeanVar>, std::vector<stats::MeanVar>>;
    auto parts = parallel_map(sizes.size(), ctx.workers, [&](std::size_t c) {
      Acc acc{std::vector<stats::MeanVar>(kmax + 1), std::vector<stats::MeanVar>(kmax + 1)};
      std::uint64_t stream = (static_cast<std::uint64_t>(n) << 32) | c;
      Engine eng = make_engine(ctx.seed, "moments-qr", stream);
      Engine veng = make_engine(ctx.seed, "moments-verblunsky", stream);
      for (std::size_t s = 0; s < sizes[c]; ++s) {
        Eigen::MatrixXcd u = haar_unitary(n, eng);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u, false);
        PhaseVector ph;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ph.phases.push_back(std::arg(es.eigenvalues()(i)));
        auto tr = trace_moduli_sq(ph, kmax);
        for (std::size_t k = 1; k <= kmax; ++k) acc.first[k].add(tr[k]);
        auto ps = power_sums(reversed_char_poly(sample_verblunsky(n, veng)), kmax);
        for (std::size_t k = 1; k <= kmax; ++k) acc.second[k].add(std::norm(ps[k]));
      }
      return acc;
    });
    Acc tot{std::vector<stats::MeanVar>(kmax + 1), std::vector<stats::MeanVar>(kmax + 1)};
    for (const auto& a : parts)
      for (std::size_t k = 1; k <= kmax; ++k) {
        tot.first[k].merge(a.first[k]);
        tot.second[k].merge(a.second[k]);
      }
    for (std::size_t k = 1; k <= kmax; ++k) {
      json prm{{"N", n}, {"k", k}, {"seed", ctx.seed}};
      double want = static_cast<double>(std::min(k, n));
      const auto& q = tot.first[k];
      const auto& v = tot.second[k];
      res.add(prm, "theory", want, 0.0, 0);
      res.add(prm, "qr_mean", q.mean(), q.std_error(), q.count());
      res.add(prm, "verblunsky_mean", v.mean(), v.std_error(), v.count());
      res.add(prm, "qr_z", (q.mean() - want) / q.std_error(), 0.0, q.count());
      res.add(prm, "verblunsky_z", (v.mean() - want) / v.std_error(), 0.0, v.count());
      double se = std::hypot(q.std_error(), v.std_error());
      res.add(prm, "mutual_z", (q.mean() - v.mean()) / se, 0.0, q.count());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// domination

struct DominationParams {
  std::size_t instances = 100;
  std::size_t n_min = 4;
  std::size_t n_max = 32;
  std::size_t direct_n_max = 16;
  std::size_t max_plus = 3;
  double max_modulus = 0.8;
  double min_distance = 0.1;
  double tolerance = 1e-9;

  static DominationParams from(const json& j) {
    detail::Section s(j, "domination");
    DominationParams p;
    p.instances = s.get("instances", p.instances);
    p.n_min = s.get("n_min", p.n_min);
    p.n_max = s.get("n_max", p.n_max);
    p.direct_n_max = s.get("direct_n_max", p.direct_n_max);
    p.max_plus = s.get("max_plus", p.max_plus);
    p.max_modulus = s.get("max_modulus", p.max_modulus);
    p.min_distance = s.get("min_distance", p.min_distance);
    p.tolerance = s.get("tolerance", p.tolerance);
    s.finish();
    if (p.n_min < 2 || p.n_max < p.n_min) throw ConfigError("domination: need 2 <= n_min <= n_max");
    if (p.max_plus < 1 || p.max_plus > 6) throw ConfigError("domination: max_plus must be in [1, 6]");
    return p;
  }
};

/// Random bias with 1..max_plus plus points and up to as many minus points.
inline BiasSpec random_bias(Engine& eng, std::size_t max_plus, double max_modulus, double min_distance) {
  auto kp = 1 + static_cast<std::size_t>(uniform01(eng) * static_cast<double>(max_plus));
  auto km = static_cast<std::size_t>(uniform01(eng) * static_cast<double>(kp + 1));
  std::vector<DiskPoint> pts;
  while (pts.size() < kp + km) {
    DiskPoint c(detail::random_in_disk(eng, max_modulus));
    bool ok = c.modulus() > 1e-3;
    for (const auto& q : pts) ok = ok && hyp_dist(q, c) >= min_distance;
    if (ok) pts.push_back(c);
  }
  return BiasSpec(std::vector<DiskPoint>(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(kp)),
                  std::vector<DiskPoint>(pts.begin() + static_cast<std::ptrdiff_t>(kp), pts.end()));
}

inline RunResult run_domination(const DominationParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "domination";
  struct Out {
    std::size_t monotone_viol = 0, domination_viol = 0, direct_fail = 0, direct_checks = 0, checks = 0;
    double max_direct_err = 0.0, max_ratio = 0.0, min_gap_at_max_n = 1e300;
  };
  auto outs = parallel_map(p.instances, ctx.workers, [&](std::size_t i) {
    Out o;
    Engine eng = make_engine(ctx.seed, "domination", i);
    BiasSpec bias = random_bias(eng, p.max_plus, p.max_modulus, p.min_distance);
    double g = exp_moment_gaussian(bias);
    double prev = -1.0;
    for (std::size_t n = p.n_min; n <= p.n_max; ++n) {
      double v = exp_moment_cue(bias, n);
      ++o.checks;
      if (prev >= 0.0 && v < prev * (1.0 - 1e-12)) ++o.monotone_viol;
      if (v > g * (1.0 + 1e-12)) ++o.domination_viol;
      o.max_ratio = std::max(o.max_ratio, v / g);
      prev = v;
      if (n <= p.direct_n_max) {
        double d = exp_moment_cue_direct(bias, n);
        double e = std::abs(v - d) / std::abs(d);
        ++o.direct_checks;
        o.max_direct_err = std::max(o.max_direct_err, e);
        if (!(e <= p.tolerance)) ++o.direct_fail;
      }
    }
    o.min_gap_at_max_n = 1.0 - prev / g;
    return o;
  });
  Out t;
  for (const auto& o : outs) {
    t.monotone_viol += o.monotone_viol;
    t.domination_viol += o.domination_viol;
    t.direct_fail += o.direct_fail;
    t.direct_checks += o.direct_checks;
    t.checks += o.checks;
    t.max_direct_err = std::max(t.max_direct_err, o.max_direct_err);
    t.max_ratio = std::max(t.max_ratio, o.max_ratio);
    t.min_gap_at_max_n = std::min(t.min_gap_at_max_n, o.min_gap_at_max_n);
  }
  json prm{{"instances", p.instances}, {"n_min", p.n_min}, {"n_max", p.n_max}, {"seed", ctx.seed}};
  res.add(prm, "checks", static_cast<double>(t.checks), 0, p.instances);
  res.add(prm, "monotone_violations", static_cast<double>(t.monotone_viol), 0, p.instances);
  res.add(prm, "domination_violations", static_cast<double>(t.domination_viol), 0, p.instances);
  res.add(prm, "max_cue_over_gaussian", t.max_ratio, 0, p.instances);
  res.add(prm, "min_relative_gap_at_n_max", t.min_gap_at_max_n, 0, p.instances);
  json dprm{{"instances", p.instances}, {"n_max", p.direct_n_max}, {"tolerance", p.tolerance}, {"seed", ctx.seed}};
  res.add(dprm, "direct_checks", static_cast<double>(t.direct_checks), 0, p.instances);
  res.add(dprm, "direct_failures", static_cast<double>(t.direct_fail), 0, p.instances);
  res.add(dprm, "direct_max_rel_error", t.max_direct_err, 0, p.instances);
  return res;
}

// ---------------------------------------------------------------------------
// max-law and gaussian-max

struct MaxLawParams {
  std::vector<std::size_t> n_list{128, 256, 512, 1024, 2048, 4096};
  std::size_t samples = 200;
  double grid_factor = 1.0;   // grid = next_pow2(grid_factor * N ceil(log N))
  double radius_offset = 1.0; // radius = 1 - radius_offset / N
  double tolerance = 1e-12;   // series truncation (gaussian-max)

  static MaxLawParams from(const json& j, const std::string& name) {
    detail::Section s(j, name);
    MaxLawParams p;
    p.n_list = s.get("n_list", p.n_list);
    p.samples = s.get("samples", p.samples);
    p.grid_factor = s.get("grid_factor", p.grid_factor);
    p.radius_offset = s.get("radius_offset", p.radius_offset);
    p.tolerance = s.get("tolerance", p.tolerance);
    s.finish();
    detail::require_n_list(p.n_list, "n_list");
    detail::require_positive(static_cast<double>(p.samples), "samples");
    detail::require_positive(p.grid_factor, "grid_factor");
    detail::require_positive(p.radius_offset, "radius_offset");
    return p;
  }

  std::size_t grid(std::size_t n) const {
    double ln = std::max(1.0, std::ceil(std::log(static_cast<double>(n))));
    return next_power_of_two(static_cast<std::size_t>(std::ceil(grid_factor * static_cast<double>(n) * ln)));
  }
  double radius(std::size_t n) const { return 1.0 - radius_offset / static_cast<double>(n); }
};

namespace detail {

inline void summarize_maxima(RunResult& res, const MaxLawParams& p, const RunContext& ctx,
                             const std::vector<std::vector<double>>& maxima, const std::string& prefix) {
  std::vector<double> xs, ys, ses;
  for (std::size_t ni = 0; ni < p.n_list.size(); ++ni) {
    std::size_t n = p.n_list[ni];
    double ln = std::log(static_cast<double>(n));
    stats::MeanVar mv, ratio, centred;
    for (double v : maxima[ni]) {
      mv.add(v);
      ratio.add(v / ln);
      centred.add(v - ln);
    }
    json prm{{"N", n}, {"samples", p.samples}, {"grid", p.grid(n)}, {"radius", p.radius(n)}, {"seed", ctx.seed}};
    res.add(prm, prefix + "mean_max", mv.mean(), mv.std_error(), mv.count());
    res.add(prm, prefix + "sd_max", std::sqrt(mv.variance()), 0.0, mv.count());
    res.add(prm, prefix + "q10_max", stats::quantile(maxima[ni], 0.1), 0.0, mv.count());
    res.add(prm, prefix + "q50_max", stats::quantile(maxima[ni], 0.5), 0.0, mv.count());
    res.add(prm, prefix + "q90_max", stats::quantile(maxima[ni], 0.9), 0.0, mv.count());
    res.add(prm, prefix + "mean_max_over_log_n", ratio.mean(), ratio.std_error(), ratio.count());
    res.add(prm, prefix + "mean_max_minus_log_n", centred.mean(), centred.std_error(), centred.count());
    xs.push_back(std::log(ln));
    ys.push_back(centred.mean());
    ses.push_back(centred.std_error());
  }
  if (xs.size() >= 2) {
    double beta = stats::ols_slope(xs, ys);
    double mx = 0.0;
    for (double x : xs) mx += x;
    mx /= static_cast<double>(xs.size());
    double sxx = 0.0;
    for (double x : xs) sxx += (x - mx) * (x - mx);
    double var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) var += std::pow((xs[i] - mx) / sxx * ses[i], 2);
    json prm{{"n_list", p.n_list}, {"samples", p.samples}, {"seed", ctx.seed}};
    res.add(prm, prefix + "beta", beta, std::sqrt(var), p.samples * p.n_list.size());
  }
}

}  // namespace detail

/// Maximum of U over the grid on |z| = radius, Verblunsky path.
inline double cue_max_sample(std::size_t n, double radius, std::size_t grid, Engine& eng) {
  auto coeffs = reversed_char_poly(sample_verblunsky(n, eng));
  return grid_max(field_grid_from_coeffs(coeffs, radius, grid)).value;
}

/// Maximum of the series field G over the grid on |z| = radius.
inline double gaussian_max_sample(double radius, std::size_t grid, int truncation, Engine& eng) {
  NormalSource normal(eng);
  auto g = draw_series_coeffs(normal, truncation);
  auto v = circle_values_from_coeffs(g, radius, grid);
  return *std::max_element(v.begin(), v.end());
}

inline RunResult run_max_law(const MaxLawParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "max-law";
  std::vector<std::vector<double>> maxima;
  for (std::size_t n : p.n_list) {
    double r = p.radius(n);
    std::size_t m = p.grid(n);
    maxima.push_back(parallel_map(p.samples, ctx.workers, [&](std::size_t s) {
      Engine eng = make_engine(ctx.seed, "max-law", (static_cast<std::uint64_t>(n) << 32) | s);
      return cue_max_sample(n, r, m, eng);
    }));
  }
  detail::summarize_maxima(res, p, ctx, maxima, "");
  return res;
}

inline RunResult run_gaussian_max(const MaxLawParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "gaussian-max";
  std::vector<std::vector<double>> maxima;
  for (std::size_t n : p.n_list) {
    double r = p.radius(n);
    std::size_t m = p.grid(n);
    int kt = circle_truncation(r, p.tolerance);
    maxima.push_back(parallel_map(p.samples, ctx.workers, [&](std::size_t s) {
      Engine eng = make_engine(ctx.seed, "gaussian-max", (static_cast<std::uint64_t>(n) << 32) | s);
      return gaussian_max_sample(r, m, kt, eng);
    }));
  }
  detail::summarize_maxima(res, p, ctx, maxima, "");
  return res;
}

// ---------------------------------------------------------------------------
// biased-mean

struct BiasedMeanParams {
  std::size_t n = 512;
  double m_param = 4.0;
  std::size_t samples = 50000;
  std::size_t control_samples = 2000000;
  std::size_t chunk = 2500;
  double ess_floor = 500.0;

  static BiasedMeanParams from(const json& j) {
    detail::Section s(j, "biased-mean");
    BiasedMeanParams p;
    p.n = s.get("N", p.n);
    p.m_param = s.get("M", p.m_param);
    p.samples = s.get("samples", p.samples);
    p.control_samples = s.get("control_samples", p.control_samples);
    p.chunk = s.get("chunk", p.chunk);
    p.ess_floor = s.get("ess_floor", p.ess_floor);
    s.finish();
    if (p.n < 2) throw ConfigError("biased-mean: N must be >= 2");
    if (!(p.m_param > 0.0 && p.m_param < static_cast<double>(p.n))) throw ConfigError("biased-mean: need 0 < M < N");
    detail::require_positive(static_cast<double>(p.samples), "samples");
    detail::require_positive(static_cast<double>(p.control_samples), "control_samples");
    detail::require_positive(static_cast<double>(p.chunk), "chunk");
    return p;
  }

  /// Ray depth floor(d_H(0, 1 - M/N)).
  int depth() const { return static_cast<int>(std::floor(hyp_norm(DiskPoint(1.0 - m_param / static_cast<double>(n))))); }
};

class EssError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline RunResult run_biased_mean(const BiasedMeanParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "biased-mean";
  const int depth = p.depth();
  if (depth < 1) throw ConfigError("biased-mean: ray depth below 1; increase N or decrease M");
  std::vector<DiskPoint> ray;
  for (int i = 0; i <= depth; ++i) ray.push_back(geodesic_point(i));
  std::vector<cplx> ray_c;
  for (const auto& z : ray) ray_c.push_back(z.value());
  const double tilt = ray.back().modulus();
  const auto npts = ray.size();

  // CUE under e^{2U(zeta_n)} via the tilted Verblunsky sampler.
  auto sizes = chunk_sizes(p.samples, p.chunk);
  auto cue_parts = parallel_map(sizes.size(), ctx.workers, [&](std::size_t c) {
    std::vector<stats::WeightedMean> acc(npts);
    Engine eng = make_engine(ctx.seed, "biased-mean-cue", c);
    for (std::size_t s = 0; s < sizes[c]; ++s) {
      TiltedSample ts = tilted_field_sample(p.n, tilt, 2, ray_c, eng);
      for (std::size_t i = 0; i < npts; ++i) acc[i].add(ts.log_weight, ts.values[i]);
    }
    return acc;
  });
  std::vector<stats::WeightedMean> cue(npts);
  for (const auto& part : cue_parts)
    for (std::size_t i = 0; i < npts; ++i) cue[i].merge(part[i]);

  // Gaussian control: plain self-normalised IS with weight e^{2G(zeta_n)}.
  GaussianFieldSampler sampler(ray);
  auto csizes = chunk_sizes(p.control_samples, 8192);
  auto ctrl_parts = parallel_map(csizes.size(), ctx.workers, [&](std::size_t c) {
    std::vector<stats::WeightedMean> acc(npts);
    Engine eng = make_engine(ctx.seed, "biased-mean-gaussian", c);
    NormalSource normal(eng);
    Eigen::MatrixXd draws = sampler.draw_batch(normal, static_cast<Eigen::Index>(csizes[c]));
    for (Eigen::Index s = 0; s < draws.cols(); ++s) {
      double lw = 2.0 * draws(static_cast<Eigen::Index>(npts - 1), s);
      for (std::size_t i = 0; i < npts; ++i) acc[i].add(lw, draws(static_cast<Eigen::Index>(i), s));
    }
    return acc;
  });
  std::vector<stats::WeightedMean> ctrl(npts);
  for (const auto& part : ctrl_parts)
    for (std::size_t i = 0; i < npts; ++i) ctrl[i].merge(part[i]);

  json base{{"N", p.n}, {"M", p.m_param}, {"depth", depth}, {"seed", ctx.seed}};
  res.add(base, "cue_ess", cue[0].ess(), 0.0, p.samples);
  res.add(base, "control_ess", ctrl[0].ess(), 0.0, p.control_samples);
  for (std::size_t i = 0; i < npts; ++i) {
    json prm = base;
    prm["i"] = i;
    double exact = bias_mean(BiasSpec({ray.back()}, {}), ray[i]);
    res.add(prm, "gaussian_exact_mean", exact, 0.0, 0);
    res.add(prm, "gaussian_control_mean", ctrl[i].mean(), ctrl[i].std_error(), p.control_samples);
    res.add(prm, "cue_mean", cue[i].mean(), cue[i].std_error(), p.samples);
    res.add(prm, "cue_minus_gaussian", cue[i].mean() - exact, cue[i].std_error(), p.samples);
  }
  if (cue[0].ess() < p.ess_floor || ctrl[0].ess() < p.ess_floor) {
    std::ostringstream os;
    os << "biased-mean: effective sample size below floor " << p.ess_floor << " (cue " << cue[0].ess()
       << ", gaussian control " << ctrl[0].ess() << ")";
    res.failed = true;
    res.error = os.str();
  }
  return res;
}

// ---------------------------------------------------------------------------
// ballot

struct BallotParams {
  std::vector<std::size_t> n_list{64, 256, 1024};
  double x = 3.0;
  double y = 3.0;
  std::size_t samples = 10000000;
  std::size_t chunk = 250000;
  double bridge_n = 4.0;
  double bridge_g = 1.0;
  double bridge_s = -2.0;
  std::size_t bridge_steps = 1024;
  std::size_t bridge_samples = 1000000;

  static BallotParams from(const json& j) {
    detail::Section s(j, "ballot");
    BallotParams p;
    p.n_list = s.get("n_list", p.n_list);
    p.x = s.get("x", p.x);
    p.y = s.get("y", p.y);
    p.samples = s.get("samples", p.samples);
    p.chunk = s.get("chunk", p.chunk);
    p.bridge_n = s.get("bridge_n", p.bridge_n);
    p.bridge_g = s.get("bridge_g", p.bridge_g);
    p.bridge_s = s.get("bridge_s", p.bridge_s);
    p.bridge_steps = s.get("bridge_steps", p.bridge_steps);
    p.bridge_samples = s.get("bridge_samples", p.bridge_samples);
    s.finish();
    detail::require_n_list(p.n_list, "n_list");
    detail::require_positive(static_cast<double>(p.samples), "samples");
    detail::require_positive(static_cast<double>(p.chunk), "chunk");
    return p;
  }
};

inline RunResult run_ballot(const BallotParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "ballot";
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t n : p.n_list) {
    auto sizes = chunk_sizes(p.samples, p.chunk);
    auto parts = parallel_map(sizes.size(), ctx.workers, [&](std::size_t c) {
      MCEstimate e = ballot_mc(n, p.x, p.y, sizes[c], ctx.seed, (static_cast<std::uint64_t>(n) << 32) | c);
      return static_cast<std::size_t>(std::llround(e.probability * static_cast<double>(e.samples)));
    });
    std::size_t hits = 0;
    for (auto h : parts) hits += h;
    MCEstimate e = MCEstimate::from_counts(hits, p.samples);
    double scale = std::pow(static_cast<double>(n), 1.5) / (p.x * p.y);
    json prm{{"n", n}, {"x", p.x}, {"y", p.y}, {"seed", ctx.seed}};
    res.add(prm, "probability", e.probability, e.std_error, e.samples);
    res.add(prm, "scaled_ratio", e.probability * scale, e.std_error * scale, e.samples);
    lo = std::min(lo, e.probability * scale);
    hi = std::max(hi, e.probability * scale);
  }
  json sprm{{"n_list", p.n_list}, {"x", p.x}, {"y", p.y}, {"seed", ctx.seed}};
  res.add(sprm, "scaled_ratio_spread", hi / lo - 1.0, 0.0, p.samples);

  auto bsizes = chunk_sizes(p.bridge_samples, 50000);
  auto bparts = parallel_map(bsizes.size(), ctx.workers, [&](std::size_t c) {
    MCEstimate e = bridge_mc(p.bridge_n, p.bridge_g, p.bridge_s, p.bridge_steps, bsizes[c], ctx.seed, c);
    return static_cast<std::size_t>(std::llround(e.probability * static_cast<double>(e.samples)));
  });
  std::size_t bh = 0;
  for (auto h : bparts) bh += h;
  MCEstimate be = MCEstimate::from_counts(bh, p.bridge_samples);
  double exact = bridge_reflection(p.bridge_n, p.bridge_g, p.bridge_s);
  json bprm{{"n", p.bridge_n}, {"g", p.bridge_g}, {"s", p.bridge_s}, {"steps", p.bridge_steps}, {"seed", ctx.seed}};
  res.add(bprm, "bridge_exact", exact, 0.0, 0);
  res.add(bprm, "bridge_mc", be.probability, be.std_error, be.samples);
  res.add(bprm, "bridge_z", (be.probability - exact) / be.std_error, 0.0, be.samples);
  return res;
}

// ---------------------------------------------------------------------------
// relaxation

struct RelaxationParams {
  std::vector<std::size_t> n_list{64, 256};
  std::size_t configs = 100;
  double m_param = 2.0;
  std::size_t grid = 16384;

  static RelaxationParams from(const json& j) {
    detail::Section s(j, "relaxation");
    RelaxationParams p;
    p.n_list = s.get("n_list", p.n_list);
    p.configs = s.get("configs", p.configs);
    p.m_param = s.get("M", p.m_param);
    p.grid = s.get("grid", p.grid);
    s.finish();
    detail::require_n_list(p.n_list, "n_list");
    detail::require_positive(static_cast<double>(p.configs), "configs");
    detail::require_positive(p.m_param, "M");
    detail::require_positive(static_cast<double>(p.grid), "grid");
    return p;
  }
};

inline RunResult run_relaxation(const RelaxationParams& p, const RunContext& ctx) {
  RunResult res;
  res.experiment = "relaxation";
  for (std::size_t n : p.n_list) {
    if (static_cast<double>(n) < 10.0 * p.m_param) throw ConfigError("relaxation: needs N >= 10 M");
    auto reps = parallel_map(p.configs, ctx.workers, [&](std::size_t c) {
      PhaseVector ph = sample_phases(n, ctx.seed, (static_cast<std::uint64_t>(n) << 32) | c);
      return relaxation_check(ph, p.m_param, p.grid);
    });
    std::size_t slide_checks = 0, slide_viol = 0, max_viol = 0;
    double min_slack = std::numeric_limits<double>::infinity(), min_slide = min_slack;
    for (const auto& r : reps) {
      slide_checks += r.slide_checks;
      slide_viol += r.slide_violations;
      max_viol += r.max_holds ? 0 : 1;
      min_slack = std::min(min_slack, r.max_slack);
      min_slide = std::min(min_slide, r.min_slide_slack);
    }
    json prm{{"N", n}, {"M", p.m_param}, {"grid", p.grid}, {"configs", p.configs}, {"seed", ctx.seed}};
    res.add(prm, "radial_slide_checks", static_cast<double>(slide_checks), 0, p.configs);
    res.add(prm, "radial_slide_violations", static_cast<double>(slide_viol), 0, p.configs);
    res.add(prm, "radial_slide_min_slack", min_slide, 0, p.configs);
    res.add(prm, "max_inequality_violations", static_cast<double>(max_viol), 0, p.configs);
    res.add(prm, "max_inequality_min_slack", min_slack, 0, p.configs);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Dispatch and output

inline RunResult run_experiment(const std::string& name, const json& config, const RunContext& ctx) {
  validate_config(config);
  json section = config.contains(name) ? config.at(name) : json::object();
  auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  if (name == "toeplitz-verify") res = run_toeplitz_verify(ToeplitzVerifyParams::from(section), ctx);
  else if (name == "moments") res = run_moments(MomentsParams::from(section), ctx);
  else if (name == "domination") res = run_domination(DominationParams::from(section), ctx);
  else if (name == "max-law") res = run_max_law(MaxLawParams::from(section, name), ctx);
  else if (name == "gaussian-max") res = run_gaussian_max(MaxLawParams::from(section, name), ctx);
  else if (name == "biased-mean") res = run_biased_mean(BiasedMeanParams::from(section), ctx);
  else if (name == "ballot") res = run_ballot(BallotParams::from(section), ctx);
  else if (name == "relaxation") res = run_relaxation(RelaxationParams::from(section), ctx);
  else throw ConfigError("unknown experiment '" + name + "'");
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.manifest = json{{"experiment", name},  {"config", config}, {"seed", ctx.seed},
                      {"workers", ctx.workers}, {"wall_time_seconds", wall}, {"rows", res.rows.size()},
                      {"status", res.failed ? "failed" : "ok"}};
  if (res.failed) res.manifest["error"] = res.error;
  return res;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(const RunResult& res) {
  std::ostringstream os;
  os << "experiment,param_json,statistic,value,std_error,samples\n";
  for (const auto& r : res.rows) {
    os << res.experiment << ',' << csv_quote(r.param_json) << ',' << r.statistic << ',' << format_double(r.value)
       << ',' << format_double(r.std_error) << ',' << r.samples << '\n';
  }
  return os.str();
}

inline void write_outputs(const RunResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / (res.experiment + ".csv"), std::ios::binary);
    f << to_csv(res);
  }
  std::ofstream m(dir / (res.experiment + ".manifest.json"), std::ios::binary);
  m << res.manifest.dump(2) << '\n';
}

}  // namespace cuefield
