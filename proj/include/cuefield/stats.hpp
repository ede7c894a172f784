#pragma once

// Small statistics toolkit: accumulators, normal CDF, Kolmogorov-Smirnov
// tests and self-normalised importance weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace cuefield::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Welford mean/variance, mergeable in a fixed order.
class MeanVar {
 public:
  void add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  void merge(const MeanVar& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    double n = static_cast<double>(n_ + o.n_);
    double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_error() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Self-normalised importance sampling of E_w[f] with weights given in log
/// form. Keeps a running max so exponentials never overflow.
class WeightedMean {
 public:
  void add(double log_w, double f) {
    if (log_w > shift_) {
      double s = std::exp(shift_ - log_w);
      sw_ *= s;
      sw2_ *= s * s;
      swf_ *= s;
      swf2_ *= s;
      sw2f_ *= s * s;
      sw2f2_ *= s * s;
      shift_ = log_w;
    }
    double w = std::exp(log_w - shift_);
    sw_ += w;
    sw2_ += w * w;
    swf_ += w * f;
    swf2_ += w * f * f;
    sw2f_ += w * w * f;
    sw2f2_ += w * w * f * f;
    ++n_;
  }

  void merge(const WeightedMean& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    double shift = std::max(shift_, o.shift_);
    double a = std::exp(shift_ - shift), b = std::exp(o.shift_ - shift);
    sw_ = sw_ * a + o.sw_ * b;
    sw2_ = sw2_ * a * a + o.sw2_ * b * b;
    swf_ = swf_ * a + o.swf_ * b;
    swf2_ = swf2_ * a + o.swf2_ * b;
    sw2f_ = sw2f_ * a * a + o.sw2f_ * b * b;
    sw2f2_ = sw2f2_ * a * a + o.sw2f2_ * b * b;
    shift_ = shift;
    n_ += o.n_;
  }

  double mean() const { return swf_ / sw_; }

  /// Delta-method standard error sqrt(sum w^2 (f - m)^2) / sum w.
  double std_error() const {
    double m = mean();
    double num = sw2f2_ - 2.0 * m * sw2f_ + m * m * sw2_;
    return std::sqrt(std::max(num, 0.0)) / sw_;
  }

  double ess() const { return sw_ * sw_ / sw2_; }
  std::size_t count() const { return n_; }

  /// log of the plain average of the weights, log(sum w / n).
  double log_mean_weight() const {
    return shift_ + std::log(sw_ / static_cast<double>(n_));
  }

 private:
  double shift_ = -std::numeric_limits<double>::infinity();
  double sw_ = 0.0, sw2_ = 0.0, swf_ = 0.0, swf2_ = 0.0, sw2f_ = 0.0, sw2f2_ = 0.0;
  std::size_t n_ = 0;
};

/// Asymptotic Kolmogorov distribution tail P(K > x).
inline double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample K-S test of `xs` against the continuous CDF `cdf`.
inline KsResult ks_test(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  double sn = std::sqrt(n);
  // Stephens' small-sample correction.
  double p = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
  return {d, p};
}

/// Ordinary least-squares slope of y against x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// Empirical quantile with linear interpolation; `xs` need not be sorted.
inline double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  double pos = q * static_cast<double>(xs.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

}  // namespace cuefield::stats
