#pragma once

// Toeplitz determinants D_N(f) = det(f^(j - k)) for rational symbols
//   f(x) = p(x) x^{-k} / (U(1/x) V(x)),   U(z) = prod (1 - a_j z),  V(z) = prod (1 - b_i z),
// their closed forms, and the subset expansion of E e^{B(U)} for the CUE field.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cuefield/core.hpp"
#include "cuefield/gaussian_field.hpp"
#include "cuefield/geometry.hpp"

namespace cuefield {

struct RationalSymbol {
  std::vector<cplx> a;        // roots of U, |a_j| < 1
  std::vector<cplx> b;        // roots of V, |b_i| < 1
  std::vector<cplx> p_roots;  // numerator roots c_j
  cplx lead{1.0, 0.0};        // p(x) = lead * prod (x - c_j)
  int k = 0;                  // shift e^{-ik theta}

  cplx p(cplx x) const {
    cplx v = lead;
    for (const auto& c : p_roots) v *= x - c;
    return v;
  }
  cplx u(cplx x) const {
    cplx v(1.0, 0.0);
    for (const auto& r : a) v *= 1.0 - r * x;
    return v;
  }
  cplx v(cplx x) const {
    cplx w(1.0, 0.0);
    for (const auto& r : b) w *= 1.0 - r * x;
    return w;
  }
  /// f(e^{i theta}).
  cplx operator()(double theta) const {
    cplx x = std::polar(1.0, theta);
    return p(x) * std::polar(1.0, -k * theta) / (u(std::conj(x)) * v(x));
  }

  void validate() const {
    for (const auto& r : a)
      if (!(std::abs(r) < 1.0)) throw std::domain_error("RationalSymbol: |a_j| must be < 1");
    for (const auto& r : b)
      if (!(std::abs(r) < 1.0)) throw std::domain_error("RationalSymbol: |b_i| must be < 1");
    if (k < 0) throw std::invalid_argument("RationalSymbol: shift k must be >= 0");
  }
};

namespace detail {

/// Coefficients of prod_r 1/(1 - r x) up to degree len - 1.
inline std::vector<cplx> inverse_product_series(const std::vector<cplx>& roots, std::size_t len) {
  std::vector<cplx> s(len, cplx(0.0, 0.0));
  if (len == 0) return s;
  s[0] = 1.0;
  for (const auto& r : roots)
    for (std::size_t j = 1; j < len; ++j) s[j] += r * s[j - 1];
  return s;
}

/// Coefficients of lead * prod (x - c_j), lowest degree first.
inline std::vector<cplx> poly_from_roots(const std::vector<cplx>& roots, cplx lead) {
  std::vector<cplx> c{lead};
  for (const auto& r : roots) {
    std::vector<cplx> next(c.size() + 1, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < c.size(); ++j) {
      next[j + 1] += c[j];
      next[j] -= r * c[j];
    }
    c.swap(next);
  }
  return c;
}

/// Series length beyond which rho^n n^mult drops under 1e-18.
inline std::size_t geometric_tail_length(double rho, std::size_t mult) {
  if (rho == 0.0) return 1;
  std::size_t n = 1;
  double lr = std::log(rho);
  while (n < 10'000'000) {
    double lg = static_cast<double>(n) * lr + static_cast<double>(mult) * std::log(static_cast<double>(n) + 1.0);
    if (lg < std::log(1e-18)) break;
    n += 8;
  }
  return n;
}

inline LogComplex log_sum(const std::vector<LogComplex>& terms) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) top = std::max(top, t.log_abs);
  if (std::isinf(top)) return LogComplex::from(cplx(0.0, 0.0));
  CompensatedSum s;
  for (const auto& t : terms)
    if (!t.is_zero()) s.add(std::exp(t.log_abs - top) * t.phase);
  LogComplex r = LogComplex::from(s.value());
  r.log_abs += top;
  return r;
}

}  // namespace detail

/// f^(n) for n = lo..hi by exact series convolution.
inline std::vector<cplx> fourier_coeffs(const RationalSymbol& sym, long lo, long hi) {
  sym.validate();
  if (hi < lo) return {};
  double rho = 0.0;
  for (const auto& r : sym.a) rho = std::max(rho, std::abs(r));
  for (const auto& r : sym.b) rho = std::max(rho, std::abs(r));
  std::vector<cplx> pc = detail::poly_from_roots(sym.p_roots, sym.lead);
  long deg = static_cast<long>(pc.size()) - 1;
  // g = 1/(U(1/x) V(x)) is needed at lags lo - deg + k .. hi + k.
  long glo = lo - deg + sym.k, ghi = hi + sym.k;
  std::size_t tail = detail::geometric_tail_length(rho, sym.a.size() + sym.b.size());
  std::size_t len = static_cast<std::size_t>(std::max(std::abs(glo), std::abs(ghi))) + tail + 1;
  std::vector<cplx> beta = detail::inverse_product_series(sym.b, len);
  std::vector<cplx> alpha = detail::inverse_product_series(sym.a, len);
  auto ghat = [&](long m) {
    CompensatedSum s;
    if (m >= 0) {
      for (std::size_t j = 0; j + static_cast<std::size_t>(m) < len; ++j) s.add(beta[j + static_cast<std::size_t>(m)] * alpha[j]);
    } else {
      auto mm = static_cast<std::size_t>(-m);
      for (std::size_t i = 0; i + mm < len; ++i) s.add(beta[i] * alpha[i + mm]);
    }
    return s.value();
  };
  std::vector<cplx> g(static_cast<std::size_t>(ghi - glo + 1));
  for (long m = glo; m <= ghi; ++m) g[static_cast<std::size_t>(m - glo)] = ghat(m);
  std::vector<cplx> out(static_cast<std::size_t>(hi - lo + 1), cplx(0.0, 0.0));
  for (long n = lo; n <= hi; ++n) {
    cplx s(0.0, 0.0);
    for (long j = 0; j <= deg; ++j) s += pc[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(n - j + sym.k - glo)];
    out[static_cast<std::size_t>(n - lo)] = s;
  }
  return out;
}

struct DetResult {
  cplx value;
  double rcond;
};

inline constexpr std::size_t direct_det_max_n = 64;

/// det of the N x N Toeplitz matrix T(j, l) = coeff(j - l), with coeffs
/// indexed from -(N-1).
inline DetResult toeplitz_det(const std::vector<cplx>& coeffs, std::size_t n) {
  if (n == 0) return {cplx(1.0, 0.0), 1.0};
  auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXcd t(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index l = 0; l < dim; ++l) t(j, l) = coeffs[static_cast<std::size_t>(j - l + dim - 1)];
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(t);
  return {lu.determinant(), lu.rcond()};
}

inline DetResult direct_det(const RationalSymbol& sym, std::size_t n) {
  if (n > direct_det_max_n) throw std::invalid_argument("direct_det: N above the oracle cap of 64");
  auto nn = static_cast<long>(n);
  return toeplitz_det(fourier_coeffs(sym, -(nn - 1), nn - 1), n);
}

/// prod_{i,j} 1 / (1 - a_j b_i), valid when N >= l or N >= m.
inline cplx baxter_det(const std::vector<cplx>& a, const std::vector<cplx>& b, std::size_t n) {
  if (!(n >= a.size() || n >= b.size()))
    throw std::invalid_argument("baxter_det: needs N >= l or N >= m");
  cplx v(1.0, 0.0);
  for (const auto& aj : a)
    for (const auto& bi : b) v /= 1.0 - aj * bi;
  return v;
}

struct CorrectedDet {
  cplx value;
  bool perturbed = false;
  std::string warning;
};

inline constexpr double root_separation_floor = 1e-6;

/// Closed form for deg p = 2k with distinct nonzero roots c_1..c_{2k}:
///   (-1)^{kN} p(0)^{N+k} prod_j p(a_j) / (p(0) V(a_j))
///   * sum_{|S| = k} prod_{i in S} V(c_i) / (lead c_i^{N+k} U(1/c_i) prod_{j not in S} (c_j - c_i)).
inline CorrectedDet corrected_det(const RationalSymbol& sym, std::size_t n,
                                  bool enforce_hypothesis = true) {
  sym.validate();
  const std::size_t kk = static_cast<std::size_t>(sym.k);
  if (sym.p_roots.size() != 2 * kk)
    throw std::invalid_argument("corrected_det: numerator degree must be 2k");
  if (enforce_hypothesis && n + 3 * kk < sym.a.size() + sym.b.size() + 2) {
    std::ostringstream os;
    os << "corrected_det: hypothesis N + 3k >= l + m + 2 fails (N=" << n << ", k=" << kk
       << ", l=" << sym.a.size() << ", m=" << sym.b.size() << ")";
    throw std::invalid_argument(os.str());
  }
  CorrectedDet out;
  std::vector<cplx> c = sym.p_roots;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == cplx(0.0, 0.0)) throw std::domain_error("corrected_det: p vanishes at 0");
    for (std::size_t j = 0; j < i; ++j) {
      double d = std::abs(c[i] - c[j]);
      if (d == 0.0) {
        std::ostringstream os;
        os << "corrected_det: numerator roots " << j << " and " << i << " coincide at " << c[i];
        throw std::domain_error(os.str());
      }
      if (d < root_separation_floor) {
        cplx dir = (c[i] - c[j]) / d;
        c[i] = c[j] + dir * root_separation_floor;
        out.perturbed = true;
        out.warning = "corrected_det: nearly coincident numerator roots perturbed to separation 1e-6";
      }
    }
  }
  RationalSymbol s = sym;
  s.p_roots = c;
  for (const auto& aj : s.a)
    if (std::abs(s.p(aj)) == 0.0) throw std::domain_error("corrected_det: p vanishes at some a_j");

  const cplx p0 = s.p(0.0);
  LogComplex pre = LogComplex::from(p0).pow(static_cast<long>(n + kk));
  if ((kk * n) % 2 == 1) pre *= cplx(-1.0, 0.0);
  for (const auto& aj : s.a) {
    pre *= s.p(aj);
    pre /= p0 * s.v(aj);
  }

  std::vector<LogComplex> terms;
  const std::size_t deg = c.size();
  const auto n_plus_k = static_cast<long>(n + kk);
  for (std::uint32_t mask = 0; mask < (1u << deg); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != kk) continue;
    LogComplex t;
    for (std::size_t i = 0; i < deg; ++i) {
      if (!(mask >> i & 1u)) continue;
      t *= s.v(c[i]);
      t /= s.lead;
      t /= LogComplex::from(c[i]).pow(n_plus_k);
      t /= s.u(1.0 / c[i]);
      for (std::size_t j = 0; j < deg; ++j)
        if (!(mask >> j & 1u)) t /= c[j] - c[i];
    }
    terms.push_back(t);
  }
  LogComplex total = detail::log_sum(terms);
  total *= pre;
  out.value = total.value();
  return out;
}

// ---------------------------------------------------------------------------
// Exponential moments of the CUE field

/// Symbol prod_z |1 - z x|^2 / prod_y |1 - y x|^2 in rational form:
/// p(x) = prod (1 - z x)(x - conj z), k = |plus|, a = conj(y), b = y.
/// Plus points at the origin contribute the factor 1 and are dropped.
inline RationalSymbol moment_symbol(const BiasSpec& bias) {
  if (bias.lambda() != 1.0) throw std::invalid_argument("moment_symbol: only lambda = 1 has a rational symbol");
  RationalSymbol s;
  for (const auto& z : bias.plus()) {
    if (z.modulus() == 0.0) continue;
    s.p_roots.push_back(1.0 / z.value());
    s.p_roots.push_back(std::conj(z.value()));
    s.lead *= -z.value();
    ++s.k;
  }
  for (const auto& y : bias.minus()) {
    if (y.modulus() == 0.0) continue;
    s.a.push_back(std::conj(y.value()));
    s.b.push_back(y.value());
  }
  return s;
}

struct ExpansionTerm {
  std::uint32_t s1 = 0;  // bitmask over plus points
  std::uint32_t s2 = 0;
  cplx value;
  cplx cz;
  cplx cy;
};

struct BiasExpansion {
  std::vector<ExpansionTerm> terms;
  double max_abs_cz = 0.0;
  bool ill_conditioned = false;

  cplx sum() const {
    CompensatedSum s;
    for (const auto& t : terms) s.add(t.value);
    return s.value();
  }
};

inline constexpr double expansion_conditioning_limit = 1e8;

/// Terms of E e^{B(U)} / E e^{B(G)} = sum_{|S1| = |S2|} (-1)^{|S1|}
///   prod_{S1} z^N prod_{S2} conj(z)^N c^y(S1, S2) c_z(S1, S2).
inline BiasExpansion bias_expansion(const BiasSpec& bias, std::size_t n) {
  if (bias.lambda() != 1.0) throw std::invalid_argument("bias_expansion: requires lambda = 1");
  const auto& pl = bias.plus();
  const std::size_t kk = pl.size();
  if (kk > 12) throw std::invalid_argument("bias_expansion: at most 12 plus points");
  std::vector<cplx> z(kk);
  for (std::size_t i = 0; i < kk; ++i) z[i] = pl[i].value();
  std::vector<cplx> ypad;
  for (const auto& y : bias.minus()) ypad.push_back(y.value());
  ypad.resize(kk, cplx(0.0, 0.0));

  LogComplex num;
  for (std::size_t i = 0; i < kk; ++i)
    for (std::size_t j = 0; j < kk; ++j) num *= 1.0 - z[i] * std::conj(z[j]);

  // T_y(z_i) for every pair, shared across subsets.
  std::vector<LogComplex> ty(kk);
  for (std::size_t i = 0; i < kk; ++i)
    for (const auto& y : ypad) ty[i] *= (z[i] - y) / (1.0 - z[i] * std::conj(y));

  BiasExpansion out;
  const std::uint32_t full = kk == 0 ? 0u : (1u << kk) - 1u;
  for (std::uint32_t s1 = 0; s1 <= full; ++s1) {
    for (std::uint32_t s2 = 0; s2 <= full; ++s2) {
      int s = std::popcount(s1);
      if (s != std::popcount(s2)) continue;
      auto in1 = [&](std::size_t i) { return (s1 >> i & 1u) != 0; };
      auto in2 = [&](std::size_t i) { return (s2 >> i & 1u) != 0; };
      LogComplex den;
      for (std::size_t i = 0; i < kk; ++i) {
        if (in1(i)) {
          for (std::size_t j = 0; j < kk; ++j) {
            if (!in1(j)) den *= z[j] - z[i];
            if (in2(j)) den *= 1.0 - z[i] * std::conj(z[j]);
          }
        }
        if (!in2(i)) {
          for (std::size_t j = 0; j < kk; ++j) {
            if (!in1(j)) den *= 1.0 - z[j] * std::conj(z[i]);
            if (in2(j)) den *= std::conj(z[j]) - std::conj(z[i]);
          }
        }
      }
      LogComplex cz = num;
      cz /= den;
      if ((s * (static_cast<int>(kk) - s)) % 2 == 1) cz *= cplx(-1.0, 0.0);

      LogComplex cy;
      LogComplex zpow;
      for (std::size_t i = 0; i < kk; ++i) {
        if (in1(i)) {
          cy *= ty[i];
          zpow *= LogComplex::from(z[i]).pow(static_cast<long>(n));
        }
        if (in2(i)) {
          cy *= LogComplex{ty[i].log_abs, std::conj(ty[i].phase)};
          zpow *= LogComplex::from(std::conj(z[i])).pow(static_cast<long>(n));
        }
      }
      LogComplex v = zpow;
      v *= cy;
      v *= cz;
      if (s % 2 == 1) v *= cplx(-1.0, 0.0);

      ExpansionTerm t{s1, s2, v.value(), cz.value(), cy.value()};
      out.max_abs_cz = std::max(out.max_abs_cz, std::exp(cz.log_abs));
      out.terms.push_back(t);
    }
  }
  out.ill_conditioned = out.max_abs_cz > expansion_conditioning_limit;
  return out;
}

/// E e^{B(U)} for N x N CUE, as E e^{B(G)} times the expansion sum.
inline double exp_moment_cue(const BiasSpec& bias, std::size_t n) {
  cplx s = bias_expansion(bias, n).sum();
  if (std::abs(s.imag()) > 1e-9 * std::max(1.0, std::abs(s.real()))) {
    std::ostringstream os;
    os << "exp_moment_cue: imaginary residue " << s.imag() << " on real part " << s.real();
    throw std::runtime_error(os.str());
  }
  return exp_moment_gaussian(bias) * s.real();
}

/// E e^{B(U)} from the determinant oracle.
inline double exp_moment_cue_direct(const BiasSpec& bias, std::size_t n) {
  return direct_det(moment_symbol(bias), n).value.real();
}

struct DeltaBound {
  double delta = 0.0;
  double delta_prime = 0.0;
  double first_correction = std::numeric_limits<double>::quiet_NaN();
};

/// Delta = max_z e^{-N e^{-d(0,z)}} prod_{x != z} coth(d(x,z)/2), x over all
/// bias points; Delta' takes the max over z != w. With w given, also the
/// first-order ratio
///   1 - |w|^{2N} prod_{y} tanh^2(d(w,y)/2) / prod_{z != w} tanh^2(d(w,z)/2),
/// y over the minus points padded with zeros.
inline DeltaBound delta_bound(const BiasSpec& bias, std::size_t n,
                              std::optional<DiskPoint> w = std::nullopt) {
  std::vector<DiskPoint> all(bias.plus());
  all.insert(all.end(), bias.minus().begin(), bias.minus().end());
  auto log_term = [&](DiskPoint z) {
    double v = -static_cast<double>(n) * std::exp(-hyp_norm(z));
    for (const auto& x : all) {
      if (x == z) continue;
      v -= std::log(std::tanh(0.5 * hyp_dist(x, z)));
    }
    return v;
  };
  DeltaBound out;
  double best = -std::numeric_limits<double>::infinity();
  double best_prime = -std::numeric_limits<double>::infinity();
  for (const auto& z : bias.plus()) {
    double lt = log_term(z);
    best = std::max(best, lt);
    if (!w || !(z == *w)) best_prime = std::max(best_prime, lt);
  }
  out.delta = std::exp(best);
  out.delta_prime = std::exp(best_prime);
  if (w) {
    double lr = 2.0 * static_cast<double>(n) * std::log(w->modulus());
    std::size_t pad = bias.plus().size() - bias.minus().size();
    for (const auto& y : bias.minus()) lr += 2.0 * std::log(std::tanh(0.5 * hyp_dist(*w, y)));
    lr += 2.0 * static_cast<double>(pad) * std::log(w->modulus());
    for (const auto& z : bias.plus()) {
      if (z == *w) continue;
      lr -= 2.0 * std::log(std::tanh(0.5 * hyp_dist(*w, z)));
    }
    out.first_correction = 1.0 - std::exp(lr);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Biased characteristic function and its Taylor truncation

struct CharFnProbe {
  std::vector<std::vector<double>> xi;  // xi[h-1][j], h = 1..d
  std::vector<cplx> phases;             // omega_j
  BiasSpec bias;

  int depth() const { return static_cast<int>(xi.size()); }

  /// The points c_{h,j} = zeta_h omega_j with their coefficients.
  std::vector<std::pair<cplx, double>> nodes() const {
    std::vector<std::pair<cplx, double>> out;
    for (std::size_t h = 0; h < xi.size(); ++h)
      for (std::size_t j = 0; j < xi[h].size(); ++j)
        out.emplace_back(geodesic_point(static_cast<double>(h + 1), phases.at(j)).value(), xi[h][j]);
    return out;
  }

  double xi_l1() const {
    double s = 0.0;
    for (const auto& row : xi)
      for (double v : row) s += std::abs(v);
    return s;
  }
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// phi(xi) = E exp(i sum xi U(zeta_h omega_j) + B(U)) as a Toeplitz determinant
/// with Fourier coefficients from trapezoidal quadrature.
inline cplx cf_probe(const CharFnProbe& probe, std::size_t n, std::size_t nodes_log2 = 12,
                     double tol = 1e-10) {
  if (n > 16) throw std::invalid_argument("cf_probe: oracle limited to N <= 16");
  auto pts = probe.nodes();
  auto symbol = [&](double theta) {
    cplx x = std::polar(1.0, theta);
    double logmod = 0.0;
    double ph = 0.0;
    for (const auto& [c, xi] : pts) ph += xi * std::log(std::abs(1.0 - c * x));
    for (const auto& z : probe.bias.plus()) logmod += 2.0 * std::log(std::abs(1.0 - z.value() * x));
    for (const auto& y : probe.bias.minus()) logmod -= 2.0 * std::log(std::abs(1.0 - y.value() * x));
    return std::polar(std::exp(probe.bias.lambda() * logmod), ph);
  };
  auto coeffs = [&](std::size_t m) {
    std::vector<cplx> samples(m);
    for (std::size_t i = 0; i < m; ++i) samples[i] = symbol(2.0 * pi * static_cast<double>(i) / static_cast<double>(m));
    Eigen::FFT<double> fft;
    std::vector<cplx> spec;
    fft.fwd(spec, samples);
    auto nn = static_cast<long>(n);
    std::vector<cplx> out(static_cast<std::size_t>(2 * nn - 1));
    for (long l = -(nn - 1); l <= nn - 1; ++l) {
      auto idx = static_cast<std::size_t>((l + static_cast<long>(m)) % static_cast<long>(m));
      out[static_cast<std::size_t>(l + nn - 1)] = spec[idx] / static_cast<double>(m);
    }
    return out;
  };
  std::size_t m = std::size_t{1} << nodes_log2;
  std::vector<cplx> cur = coeffs(m);
  for (; m <= (std::size_t{1} << 20); m *= 2) {
    std::vector<cplx> fine = coeffs(2 * m);
    double diff = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) diff = std::max(diff, std::abs(fine[i] - cur[i]));
    if (diff <= tol) return toeplitz_det(fine, n).value;
    cur.swap(fine);
  }
  throw QuadratureError("cf_probe: Fourier coefficients failed the doubling check at 1e-10");
}

struct TruncationTail {
  double bound;
  double empirical;
};

/// Taylor coefficients of e^{-iL(x)}, L(x) = (1/2) sum xi log(1 - c x), up to
/// degree len - 1.
inline std::vector<cplx> exp_series_coeffs(const CharFnProbe& probe, std::size_t len) {
  auto pts = probe.nodes();
  std::vector<cplx> ell(len, cplx(0.0, 0.0));
  for (std::size_t m = 1; m < len; ++m) {
    cplx s(0.0, 0.0);
    for (const auto& [c, xi] : pts) s += xi * std::pow(c, static_cast<double>(m));
    ell[m] = cplx(0.0, 0.5) * s / static_cast<double>(m);
  }
  std::vector<cplx> e(len, cplx(0.0, 0.0));
  e[0] = 1.0;
  for (std::size_t k = 1; k < len; ++k) {
    cplx s(0.0, 0.0);
    for (std::size_t m = 1; m <= k; ++m) s += static_cast<double>(m) * ell[m] * e[k - m];
    e[k] = s / static_cast<double>(k);
  }
  return e;
}

/// Bound sinh(sum |xi|) (r zeta_d)^A against the measured sup over 2^10
/// points of |x| = r of the tail sum_{n >= A} e_n x^n.
inline TruncationTail truncation_tail(const CharFnProbe& probe, double r, std::size_t a,
                                      std::size_t circle_points = 1024) {
  double zd = std::tanh(0.5 * probe.depth());
  double q = r * zd;
  if (!(q < 1.0)) throw std::domain_error("truncation_tail: needs r zeta_d < 1");
  TruncationTail out{std::sinh(probe.xi_l1()) * std::pow(q, static_cast<double>(a)), 0.0};
  if (probe.xi_l1() == 0.0) return out;
  std::size_t extra = q > 0.0 ? static_cast<std::size_t>(std::ceil(std::log(1e-22) / std::log(q))) + 64 : 1;
  std::size_t len = a + extra;
  std::vector<cplx> e = exp_series_coeffs(probe, len);
  for (std::size_t i = 0; i < circle_points; ++i) {
    cplx x = std::polar(r, 2.0 * pi * static_cast<double>(i) / static_cast<double>(circle_points));
    cplx s(0.0, 0.0);
    for (std::size_t nidx = len; nidx-- > a;) s = s * x + e[nidx];
    s *= std::pow(x, static_cast<double>(a));
    out.empirical = std::max(out.empirical, std::abs(s));
  }
  return out;
}

}  // namespace cuefield
