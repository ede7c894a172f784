#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cuefield/gaussian_field.hpp"
#include "cuefield/stats.hpp"

using namespace cuefield;

namespace {

DiskPoint random_point(std::mt19937_64& eng, double max_depth = 12.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return geodesic_point(max_depth * u(eng), std::polar(1.0, 2.0 * pi * u(eng)));
}

// Mean of x_a x_b over draws (the field is centred) with its standard error.
std::pair<double, double> product_moment(const Eigen::MatrixXd& draws, Eigen::Index a, Eigen::Index b) {
  stats::MeanVar mv;
  for (Eigen::Index c = 0; c < draws.cols(); ++c) mv.add(draws(a, c) * draws(b, c));
  return {mv.mean(), mv.std_error()};
}

}  // namespace

TEST(CovKernel, Examples) {
  EXPECT_EQ(cov_kernel(DiskPoint(0.4, 0.3), DiskPoint()), 0.0);
  EXPECT_NEAR(cov_kernel(DiskPoint(0.5, 0), DiskPoint(0.5, 0)), -std::log(0.75) / 2.0, 1e-15);
  EXPECT_NEAR(cov_kernel(DiskPoint(0.5, 0), DiskPoint(-0.5, 0)), -std::log(1.25) / 2.0, 1e-15);
  EXPECT_NEAR(-std::log(0.75) / 2.0, 0.143841, 1e-6);
  EXPECT_NEAR(-std::log(1.25) / 2.0, -0.111572, 1e-6);
}

TEST(CovKernel, Symmetric) {
  std::mt19937_64 eng(1);
  for (int i = 0; i < 1000; ++i) {
    DiskPoint z = random_point(eng), y = random_point(eng);
    EXPECT_NEAR(cov_kernel(z, y), cov_kernel(y, z), 1e-14 * std::max(1.0, std::abs(cov_kernel(z, y))));
  }
}

TEST(CovHyperbolic, Examples) {
  DiskPoint z(0.3, -0.6);
  EXPECT_NEAR(cov_hyperbolic(z, z), log_cosh(0.5 * hyp_norm(z)), 1e-14);
  EXPECT_NEAR(cov_hyperbolic(z, z), field_variance(z), 1e-12);
  EXPECT_NEAR(cov_hyperbolic(DiskPoint(0.5, 0), DiskPoint(0.5, 0)), 0.143841, 1e-6);
  DiskPoint a = geodesic_point(3.0), b = geodesic_point(3.0, std::polar(1.0, 0.2));
  EXPECT_NEAR(cov_hyperbolic(a, b), cov_kernel(a, b), 1e-12);
}

TEST(KernelIdentities, RandomPairs) {
  std::mt19937_64 eng(2);
  for (int i = 0; i < 10000; ++i) {
    DiskPoint z = random_point(eng), y = random_point(eng);
    EXPECT_NEAR(cov_hyperbolic(z, y), cov_kernel(z, y), 1e-10);
    EXPECT_NEAR(var_diff(z, y), var_diff_euclidean(z, y), 1e-10);
    // Var(G(z) - G(y)) from the kernel.
    double direct = field_variance(z) + field_variance(y) - 2.0 * cov_kernel(z, y);
    EXPECT_NEAR(var_diff(z, y), direct, 1e-9);
  }
}

TEST(VarDiff, Examples) {
  DiskPoint y(0.2, 0.55);
  EXPECT_NEAR(var_diff(y, y), 0.0, 1e-15);
  EXPECT_NEAR(var_diff(DiskPoint(), y), -std::log(1.0 - std::norm(y.value())) / 2.0, 1e-14);
  EXPECT_NEAR(var_diff(geodesic_point(2), geodesic_point(5)), std::log(std::cosh(1.5)), 1e-12);
}

TEST(CorrelationBound, HoldsWithZeroConstant) {
  std::mt19937_64 eng(3);
  double worst = -1.0;
  for (int i = 0; i < 100000; ++i) {
    DiskPoint x = random_point(eng, 25), y = random_point(eng, 25), z = random_point(eng, 25);
    worst = std::max(worst, std::abs(cov_kernel(x, y) - cov_kernel(x, z)) - 0.5 * hyp_dist(y, z));
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(BranchCovariance, CalibratedConstant) {
  double worst = 0.0;
  for (int h = 1; h <= 30; ++h)
    for (int j = 1; j <= 30; ++j)
      for (double lt = -6.0 * std::log(10.0); lt <= std::log(pi); lt += 0.05) {
        double theta = std::exp(lt);
        double cov = cov_kernel(geodesic_point(h), geodesic_point(j, std::polar(1.0, theta)));
        double approx = 0.5 * std::min({-std::log(std::abs(std::sin(0.5 * theta))), double(h), double(j)}) -
                        0.5 * std::log(2.0);
        double scale = std::min(std::exp(-std::min(h, j)) / theta, 1.0);
        worst = std::max(worst, std::abs(cov - approx) / scale);
      }
  EXPECT_LE(worst, 3.5);
}

TEST(BranchCovariance, RotatedRaysBranchAtCentre) {
  double worst = 0.0;
  for (double n0 : {1.0, 3.0, 5.0})
    for (int h = 0; h <= 20; ++h)
      for (int j = 0; j <= 20; ++j)
        for (double theta = -0.45; theta <= 0.45; theta += 0.01) {
          if (std::abs(theta) < 1e-9) continue;
          DiskPoint q = rotate_about(theta, n0, geodesic_point(n0 + h));
          DiskPoint p = geodesic_point(n0 + j);
          double branch = 0.5 * (n0 + std::min({-std::log(std::abs(std::sin(0.5 * theta))), double(h), double(j)}));
          worst = std::max(worst, std::abs(cov_kernel(q, p) - branch));
        }
  EXPECT_LE(worst, 0.8);
}

TEST(Invariance, RecentredFieldHasTheSameCovariance) {
  // G_hat(z) = G(T^{-1} z) - G(zeta_{n0}), T = T_{zeta_{n0}}.
  std::mt19937_64 eng(4);
  for (double n0 : {0.5, 2.0, 4.0}) {
    DiskPoint c = geodesic_point(n0);
    for (int i = 0; i < 3000; ++i) {
      DiskPoint z = random_point(eng, 8), w = random_point(eng, 8);
      DiskPoint tz = mobius_inverse(c, z), tw = mobius_inverse(c, w);
      double hat = cov_kernel(tz, tw) - cov_kernel(tz, c) - cov_kernel(c, tw) + field_variance(c);
      EXPECT_NEAR(hat, cov_kernel(z, w), 1e-10);
    }
  }
}

TEST(BiasSpec, Invariants) {
  DiskPoint z = geodesic_point(3);
  EXPECT_THROW(BiasSpec({z}, {z}), std::invalid_argument);
  EXPECT_THROW(BiasSpec({z}, {DiskPoint(0.1, 0), DiskPoint(0.2, 0)}), std::invalid_argument);
  EXPECT_NO_THROW(BiasSpec({z, DiskPoint(0.1, 0)}, {DiskPoint(-0.3, 0)}));
}

TEST(BiasMean, Examples) {
  BiasSpec empty;
  EXPECT_EQ(bias_mean(empty, DiskPoint(0.3, 0.3)), 0.0);
  const int d = 12;
  BiasSpec bias({geodesic_point(d)}, {});
  for (int i = 0; i <= d; ++i) {
    double mu = bias_mean(bias, geodesic_point(i));
    EXPECT_NEAR(mu, 2.0 * cov_kernel(geodesic_point(i), geodesic_point(d)), 1e-14);
    // Mean i + O(1): 2 cov = -log(1 - tanh(i/2) tanh(d/2)) stays within 2 log 2 of i.
    EXPECT_LE(std::abs(mu - i), 2.0 * std::log(2.0) + 1e-9) << i;
  }
}

TEST(ExpMomentGaussian, Examples) {
  EXPECT_EQ(exp_moment_gaussian(BiasSpec()), 1.0);
  // E e^{2 G(r)} = e^{2 Var G(r)} = 1 / (1 - r^2).
  EXPECT_NEAR(exp_moment_gaussian(BiasSpec({DiskPoint(0.5, 0)}, {})), 4.0 / 3.0, 1e-14);
  DiskPoint z1(0.3, 0.4), z2(-0.2, 0.5);
  double want = std::norm(1.0 - std::conj(z1.value()) * z2.value()) / (z1.one_minus_norm() * z2.one_minus_norm());
  EXPECT_NEAR(exp_moment_gaussian(BiasSpec({z1}, {z2})), want, 1e-13);
}

TEST(ExpMomentGaussian, OverflowSignal) {
  DiskPoint z(max_disk_modulus, 0.0);
  BiasSpec near_boundary(std::vector<DiskPoint>(1, z), {}, 400.0);
  EXPECT_THROW(exp_moment_gaussian(near_boundary), std::overflow_error);
}

TEST(ExpMomentGaussian, JensenLowerBound) {
  std::mt19937_64 eng(5);
  for (int i = 0; i < 500; ++i) {
    std::vector<DiskPoint> plus, minus;
    int np = 1 + static_cast<int>(eng() % 3), nm = static_cast<int>(eng() % (np + 1));
    for (int k = 0; k < np; ++k) plus.push_back(random_point(eng, 4));
    for (int k = 0; k < nm; ++k) minus.push_back(random_point(eng, 4));
    EXPECT_GE(exp_moment_gaussian(BiasSpec(plus, minus)), 1.0 - 1e-12);
  }
}

TEST(ExpMomentGaussian, MatchesMonteCarlo) {
  DiskPoint z1(0.5, 0.0), z2(-0.3, 0.4);
  BiasSpec bias({z1}, {z2});
  GaussianFieldSampler s({z1, z2});
  Engine eng = make_engine(7, "test");
  NormalSource normal(eng);
  Eigen::MatrixXd d = s.draw_batch(normal, 200000);
  stats::MeanVar mv;
  for (Eigen::Index c = 0; c < d.cols(); ++c) mv.add(std::exp(2.0 * d(0, c) - 2.0 * d(1, c)));
  EXPECT_LE(std::abs(mv.mean() - exp_moment_gaussian(bias)), 4.0 * mv.std_error());
  stats::MeanVar sv;
  for (Eigen::Index c = 0; c < d.cols(); ++c) sv.add(std::exp(2.0 * d(0, c)));
  EXPECT_LE(std::abs(sv.mean() - 4.0 / 3.0), 4.0 * sv.std_error());
}

TEST(CovarianceMatrix, EntriesAndPositivity) {
  std::vector<DiskPoint> pts;
  for (int i = 1; i <= 10; ++i) pts.push_back(geodesic_point(i, std::polar(1.0, 0.3 * i)));
  auto c = covariance_matrix(pts);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) EXPECT_NEAR(c.entries(i, j), cov_kernel(pts[i], pts[j]), 1e-14);
  EXPECT_NO_THROW(GaussianFieldSampler{pts});
}

TEST(SampleField, OriginIsExactlyZero) {
  auto s = sample_field({DiskPoint()}, 3);
  ASSERT_EQ(s.values.size(), 1u);
  EXPECT_EQ(s.values[0], 0.0);
  auto t = sample_field({DiskPoint(0.4, 0), DiskPoint(), DiskPoint(-0.2, 0.1)}, 3);
  EXPECT_EQ(t.values[1], 0.0);
  EXPECT_NE(t.values[0], 0.0);
}

TEST(SampleField, DeterministicGivenSeed) {
  std::vector<DiskPoint> pts{DiskPoint(0.4, 0), DiskPoint(-0.2, 0.1)};
  EXPECT_EQ(sample_field(pts, 9).values, sample_field(pts, 9).values);
  EXPECT_NE(sample_field(pts, 9).values, sample_field(pts, 10).values);
}

TEST(SampleField, NearCoincidentPointsUseRidge) {
  std::vector<DiskPoint> pts{DiskPoint(0.9, 0), DiskPoint(0.9 + 1e-13, 0)};
  GaussianFieldSampler s(pts);
  EXPECT_GT(s.ridge(), 0.0);
}

TEST(SampleField, CovarianceMatchesKernel) {
  std::vector<DiskPoint> pts{DiskPoint(0.5, 0), DiskPoint(-0.5, 0), DiskPoint(0.9, 0)};
  GaussianFieldSampler s(pts);
  Engine eng = make_engine(11, "test");
  NormalSource normal(eng);
  Eigen::MatrixXd d = s.draw_batch(normal, 100000);
  for (Eigen::Index a = 0; a < 3; ++a)
    for (Eigen::Index b = 0; b <= a; ++b) {
      auto [m, se] = product_moment(d, a, b);
      EXPECT_LE(std::abs(m - cov_kernel(pts[a], pts[b])), 4.0 * se) << a << " " << b;
    }
  EXPECT_NEAR(-std::log(0.19) / 2.0, 0.8304, 1e-4);
}

TEST(SampleCircle, TruncationAndTail) {
  EXPECT_EQ(circle_truncation(0.5), static_cast<int>(std::ceil(std::log(1e12) / (2.0 * std::log(2.0)))));
  EXPECT_LE(circle_tail_bound(0.5, 60), std::pow(0.5, 122) / 120.0 * 4.0 / 3.0 * 1.0001);
  EXPECT_THROW(sample_circle(0.9, 16, 5, 1), std::invalid_argument);
  EXPECT_THROW(sample_circle(1.0, 16, 5, 1), std::domain_error);
  EXPECT_NO_THROW(sample_circle(0.5, 16, 60, 1));
}

TEST(SampleCircle, TruncatedCovarianceIsPartialLogSeries) {
  DiskPoint z(std::polar(0.7, 0.3)), y(std::polar(0.7, -1.1));
  int k = 200;
  double tail = circle_tail_bound(0.7, k);
  EXPECT_NEAR(truncated_series_cov(z, y, k), cov_kernel(z, y), tail + 1e-15);
  EXPECT_NEAR(truncated_series_cov(z, y, 3),
              std::real(z.value() * std::conj(y.value())) / 2.0 +
                  std::real(std::pow(z.value() * std::conj(y.value()), 2)) / 4.0 +
                  std::real(std::pow(z.value() * std::conj(y.value()), 3)) / 6.0,
              1e-15);
}

TEST(SampleCircle, SmallRadiusValuesVanish) {
  auto s = sample_circle(1e-6, 8, 2, 5);
  for (double v : s.values) EXPECT_LT(std::abs(v), 1e-5);
}

TEST(SampleCircle, CovarianceMatchesKernel) {
  const double r = 0.5;
  const std::size_t m = 8;
  const int k = 60;
  Engine eng = make_engine(13, "test");
  NormalSource normal(eng);
  Eigen::MatrixXd d(m, 100000);
  for (Eigen::Index c = 0; c < d.cols(); ++c) {
    auto v = circle_values_from_coeffs(draw_series_coeffs(normal, k), r, m);
    for (std::size_t j = 0; j < m; ++j) d(static_cast<Eigen::Index>(j), c) = v[j];
  }
  for (Eigen::Index a : {0, 1, 3})
    for (Eigen::Index b : {0, 2, 4}) {
      DiskPoint za(std::polar(r, 2.0 * pi * a / m)), zb(std::polar(r, 2.0 * pi * b / m));
      auto [mom, se] = product_moment(d, a, b);
      EXPECT_LE(std::abs(mom - cov_kernel(za, zb)), 4.0 * se) << a << " " << b;
    }
}

TEST(SampleCircle, GridPointsMatchSeriesValues) {
  auto s = sample_circle(0.6, 16, circle_truncation(0.6), 21);
  ASSERT_EQ(s.points.size(), 16u);
  EXPECT_NEAR(s.points[4].value().imag(), 0.6, 1e-15);
}

TEST(RestrictedTransform, Examples) {
  FieldSample ray;
  for (int i = 1; i <= 10; ++i) {
    ray.points.push_back(geodesic_point(i));
    ray.values.push_back(0.37 * i * i - 1.0);
  }
  // n0 = 0.5 gives a single sector, so every anchor is zeta_3 itself.
  auto out = restricted_transform(ray, 3.0, 0.5);
  for (int i = 1; i <= 10; ++i) {
    double want = i < 3 ? 0.0 : ray.values[i - 1] - ray.values[2];
    EXPECT_NEAR(out.values[i - 1], want, 1e-15) << i;
  }
  EXPECT_EQ(out.values[2], 0.0);
}

TEST(RestrictedTransform, MissingAnchor) {
  FieldSample s{{geodesic_point(5)}, {1.0}};
  EXPECT_THROW(restricted_transform(s, 3.0, 0.5), MissingAnchorError);
  FieldSample inner{{geodesic_point(1)}, {1.0}};
  EXPECT_EQ(restricted_transform(inner, 3.0, 0.5).values[0], 0.0);
}

TEST(ChangeOfMeasure, WeightedMeanMatchesShiftedField) {
  // E[F(G) e^{B}] / E[e^{B}] = E[F(G + mu)] with F an indicator.
  std::vector<DiskPoint> pts{geodesic_point(2), geodesic_point(4), geodesic_point(3, std::polar(1.0, 1.0))};
  BiasSpec bias({pts[1]}, {pts[2]});
  GaussianFieldSampler s(pts);
  Engine eng = make_engine(17, "test");
  NormalSource normal(eng);
  Eigen::MatrixXd d = s.draw_batch(normal, 100000);
  const double c = 1.5;
  stats::WeightedMean wm;
  for (Eigen::Index k = 0; k < d.cols(); ++k) {
    double b = 2.0 * d(1, k) - 2.0 * d(2, k);
    wm.add(b, d(0, k) <= c ? 1.0 : 0.0);
  }
  double mu = bias_mean(bias, pts[0]);
  double want = stats::normal_cdf((c - mu) / std::sqrt(field_variance(pts[0])));
  EXPECT_LE(std::abs(wm.mean() - want), 4.0 * wm.std_error());
}
