#include <gtest/gtest.h>

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "pathdrift/closedforms.hpp"
#include "pathdrift/parametrix.hpp"

using namespace pathdrift;
using testing_helpers::gauss;
using testing_helpers::model_1d;
using testing_helpers::v1;

TEST(Hermite, FirstWeightIsGaussianGradient) {
  Matrix a(2, 2);
  a << 1.3, 0.4, 0.4, 0.8;
  const SpdMatrix A(a);
  Vector x(2);
  x << 0.2, -0.1;
  Vector y(2);
  y << 0.9, 0.5;
  const double h = 1e-5;
  const Vector h1 = hermite_first(A, y - x);
  const Matrix h2 = hermite_second(A, y - x);
  const double g = gaussian_density(A, x, y);
  for (int i = 0; i < 2; ++i) {
    Vector yp = y;
    Vector ym = y;
    yp[i] += h;
    ym[i] -= h;
    const double d1 = (gaussian_density(A, x, yp) - gaussian_density(A, x, ym)) / (2 * h);
    EXPECT_NEAR(h1[i] * g, d1, 1e-8);
    for (int j = 0; j < 2; ++j) {
      Vector ypp = yp;
      Vector ypm = yp;
      Vector ymp = ym;
      Vector ymm = ym;
      ypp[j] += h;
      ypm[j] -= h;
      ymp[j] += h;
      ymm[j] -= h;
      const double d2 = (gaussian_density(A, x, ypp) - gaussian_density(A, x, ypm) - gaussian_density(A, x, ymp) +
                         gaussian_density(A, x, ymm)) /
                        (4 * h * h);
      EXPECT_NEAR(h2(i, j) * g, d2, 1e-4);
    }
  }
}

TEST(FrozenChain, Examples) {
  Rng rng(SeedSpec{1, 0});
  EXPECT_EQ(frozen_chain(Diffusion(), v1(0.4), {}, rng).size(), 1u);

  // One jump, sigma(z) = 1 + 0.1 z, y = 1: X_1 = 1 + 1.1 dW.
  Rng r1(SeedSpec{3, 0});
  Rng r2(SeedSpec{3, 0});
  const auto s = frozen_chain(Diffusion(AffineDiffusion{1.0, 0.1}), v1(1.0), {0.25}, r1);
  const double dw = std::sqrt(0.25) * r2.normal();
  EXPECT_NEAR(s[1][0], 1.0 + 1.1 * dw, 1e-14);

  // Constant sigma: telescoping to y + sigma W_tau.
  Rng r3(SeedSpec{4, 0});
  Rng r4(SeedSpec{4, 0});
  const auto c = frozen_chain(Diffusion(ConstantDiffusion{Matrix::Constant(1, 1, 2.0)}), v1(0.0), {0.1, 0.4, 0.5}, r3);
  double w = 0.0;
  double prev = 0.0;
  for (double tau : {0.1, 0.4, 0.5}) {
    w += std::sqrt(tau - prev) * r4.normal();
    prev = tau;
  }
  EXPECT_NEAR(c[3][0], 2.0 * w, 1e-14);
}

TEST(Counting, LawsAndSurvival) {
  const auto e = CountingSpec::exponential(2.0);
  EXPECT_NEAR(e.cdf(0.5), 1.0 - std::exp(-1.0), 1e-15);
  const auto b = CountingSpec::beta_law(0.5, 1.0);
  EXPECT_NEAR(b.cdf(2.0), 1.0, 1e-15);
  const double integral = boost::math::quadrature::tanh_sinh<double>().integrate(
      [&](double s) { return b.pdf(s); }, 0.0, 2.0);
  EXPECT_NEAR(integral, 1.0, 1e-8);
  // Mean number of jumps of a Poisson process.
  double jumps = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) jumps += sample_counting(e, 1.5, SeedSpec{8, static_cast<std::uint64_t>(i)}).jumps();
  EXPECT_NEAR(jumps / n, 3.0, 4.0 * std::sqrt(3.0 / n));
}

TEST(Unbiased, NullModelSamplesAreZeroOrScaledGaussian) {
  const auto m = model_1d(Drift());
  const auto spec = CountingSpec::exponential(1.0);
  const double g = gauss(0.3, -0.2, 0.8);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const auto c = unbiased_density_chain(m, v1(-0.2), v1(0.3), 0.8, spec, {9, i});
    if (c.jump_times.empty()) {
      EXPECT_NEAR(c.value, g / std::exp(-0.8), 1e-14);
    } else {
      EXPECT_EQ(c.value, 0.0);
    }
  }
  const auto est = unbiased_density(m, v1(-0.2), v1(0.3), 0.8, spec, 20000, 9);
  EXPECT_NEAR(est.estimate.value, g, 3.0 * est.estimate.stderr_);
}

TEST(Unbiased, OuDensity) {
  const auto m = model_1d(Drift(LinearDrift{Matrix::Constant(1, 1, -1.0), v1(0.0)}));
  const double exact = ou_density(1.0, 0.0, 0.5, 1.0, 1.0);
  const auto est = unbiased_density(m, v1(1.0), v1(0.0), 0.5, CountingSpec::beta_law(0.5, 0.5), 100000, 21);
  EXPECT_NEAR(est.estimate.value, exact, 3.0 * est.estimate.stderr_);
}

TEST(Unbiased, ExpectationFunctionals) {
  const auto null = model_1d(Drift());
  const auto imp = gaussian_importance(v1(0.0), 1.0);
  const auto spec = CountingSpec::exponential(1.0);
  const auto one = unbiased_expectation(null, [](ConstVectorRef) { return 1.0; }, imp, v1(0.0), 1.0, spec, 50000, 2);
  EXPECT_NEAR(one.estimate.value, 1.0, 3.0 * one.estimate.stderr_);
  const auto half = unbiased_expectation(
      null, [](ConstVectorRef z) { return z[0] >= 0.0 ? 1.0 : 0.0; }, imp, v1(0.0), 1.0, spec, 50000, 3);
  EXPECT_NEAR(half.estimate.value, 0.5, 3.0 * half.estimate.stderr_);
  const auto ou = model_1d(Drift(LinearDrift{Matrix::Constant(1, 1, -1.0), v1(0.0)}));
  const auto mean = unbiased_expectation(ou, [](ConstVectorRef z) { return z[0]; }, gaussian_importance(v1(0.6), 1.0),
                                         v1(1.0), 0.5, CountingSpec::beta_law(0.5, 0.5), 100000, 4);
  EXPECT_NEAR(mean.estimate.value, std::exp(-0.5), 3.0 * mean.estimate.stderr_);
}

TEST(Bounds, TermBoundExamples) {
  EXPECT_NEAR(parametrix_term_bound(1, 2.0, 1.5, 1, 0.25), 3.0 / 0.5, 1e-12);
  EXPECT_NEAR(parametrix_term_bound(2, 1.0, 1.0, 1, 1.0), std::numbers::pi, 1e-12);
  for (std::size_t n = 1; n < 6; ++n) {
    const double ratio = parametrix_term_bound(n + 1, 0.7, 1.3, 2, 0.6) / parametrix_term_bound(n, 0.7, 1.3, 2, 0.6);
    const double expect = std::sqrt(2.0) * 0.7 * 1.3 * std::sqrt(0.6) * std::tgamma(0.5) * std::tgamma(n / 2.0) /
                          std::tgamma((n + 1) / 2.0);
    EXPECT_NEAR(ratio, expect, 1e-12 * expect);
  }
  EXPECT_THROW(parametrix_term_bound(0, 1, 1, 1, 1), DomainError);
}

TEST(Bounds, BetaIntegralExamples) {
  EXPECT_NEAR(beta_convolution(1, 0.0, 0.0, 1.0), 1.0, 1e-14);
  EXPECT_NEAR(beta_convolution(1, 0.5, 0.5, 1.0), std::numbers::pi / 2.0, 1e-14);
  EXPECT_THROW(beta_convolution(1, 1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(beta_convolution(1, 0.0, -1.0, 1.0), DomainError);
}
