#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "pathdrift/schemes.hpp"

using namespace pathdrift;
using testing_helpers::model_1d;
using testing_helpers::v1;

TEST(Euler, ExactCases) {
  const TimeGrid g = uniform_grid(1.0, 16);
  const auto x = euler_maruyama(model_1d(Drift()), v1(0.3), g, SeedSpec{5, 2});
  const auto w = brownian_path(1, g, SeedSpec{5, 2});
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(x.state(k)[0], 0.3 + w.state(k)[0], 1e-14);

  const auto c = euler_maruyama(model_1d(Drift(ConstantDrift{v1(1.0)}), 0.0), v1(0.5), uniform_grid(1.0, 7), {1, 0});
  EXPECT_NEAR(c.state(7)[0], 1.5, 1e-14);

  const auto ou = euler_maruyama(model_1d(Drift(LinearDrift{Matrix::Constant(1, 1, -1.0), v1(0.0)}), 0.0), v1(2.0),
                                 uniform_grid(0.5, 1), {1, 0});
  EXPECT_EQ(ou.state(1)[0], 1.0);
}

TEST(Euler, NonFiniteStateReportsStep) {
  auto m = model_1d(Drift(Heston32Drift{1.0, 1.0}), 0.0);
  try {
    euler_maruyama(m, v1(1e6), uniform_grid(1.0, 50), {1, 0});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(PathDependentEuler, ReducesToMarkovEuler) {
  FunctionalSpec spec;
  spec.nu.state = -0.7;
  const auto base = model_1d(Drift(LinearDrift{Matrix::Constant(1, 1, -0.7), v1(0.0)}));
  const auto a = em_path_dependent(spec, base, v1(0.4), 1.0, 32, 0, {3, 1});
  const auto b = euler_maruyama(base, v1(0.4), uniform_grid(1.0, 32), {3, 1});
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.state(k)[0], b.state(k)[0], 1e-14);
}

TEST(PathDependentEuler, ConstantNuIsIndependentOfN) {
  FunctionalSpec spec;
  spec.nu.offset = 0.3;
  const auto m = model_1d(Drift());
  const auto coarse = em_path_dependent(spec, m, v1(0.0), 1.0, 4, 0, {8, 0}, 8);
  const auto fine = em_path_dependent(spec, m, v1(0.0), 1.0, 32, 0, {8, 0}, 1);
  EXPECT_NEAR(coarse.state(32)[0], fine.state(32)[0], 1e-13);
  EXPECT_NEAR(coarse.state(32)[0], 0.3 + brownian_path(1, uniform_grid(1.0, 32), {8, 0}).state(32)[0], 1e-13);
}

TEST(PathDependentEuler, TruncatedDelaySlotsContributeZero) {
  // nu = sum_i theta_i u_i with the third delay beyond m = 2: its weight
  // must not matter.
  FunctionalSpec spec;
  spec.delays = {{0.1, 1.0}, {0.2, 1.0}, {0.3, 1.0}};
  spec.nu.delay = 1.0;
  FunctionalSpec heavier = spec;
  heavier.delays[2].theta = 50.0;
  const auto m = model_1d(Drift());
  const auto a = em_path_dependent(spec, m, v1(1.0), 1.0, 16, 2, {9, 0});
  const auto b = em_path_dependent(heavier, m, v1(1.0), 1.0, 16, 2, {9, 0});
  EXPECT_EQ(a.state(16)[0], b.state(16)[0]);
  const auto c = em_path_dependent(heavier, m, v1(1.0), 1.0, 16, 3, {9, 0});
  EXPECT_NE(a.state(16)[0], c.state(16)[0]);
}

TEST(PathDependentEuler, RefinementApproachesContinuousFunctional) {
  FunctionalSpec spec;
  spec.nu.state = -1.0;
  spec.nu.max = 0.5;
  const auto m = model_1d(Drift(FunctionalDrift{spec}));
  const std::size_t fine = 512;
  double prev = 1e9;
  for (std::size_t n : {8u, 32u, 128u}) {
    double mse = 0.0;
    for (std::uint64_t i = 0; i < 400; ++i) {
      const auto ref = euler_maruyama(m, v1(0.2), uniform_grid(1.0, fine), {6, i});
      const auto dis = em_path_dependent(spec, m, v1(0.2), 1.0, n, 0, {6, i}, fine / n);
      mse += std::pow(ref.state(fine)[0] - dis.state(fine)[0], 2);
    }
    EXPECT_LT(mse, prev);
    prev = mse;
  }
}

TEST(Taming, ArithmeticExamples) {
  EXPECT_EQ(tame_drift(-2.0, 0.0, 1.0, 0.25), -2.0);
  EXPECT_DOUBLE_EQ(tame_drift(-2.0, 2.0, 1.0, 0.25), -1.0);
  EXPECT_DOUBLE_EQ(tame_diffusion(8.0, 4.0, 1.0, 1.0), 8.0 / 3.0);
  for (double x : {-5.0, -0.3, 0.0, 0.7, 12.0}) {
    EXPECT_LE(std::abs(tame_drift(3.0, x, 0.5, 0.1)), 3.0);
    EXPECT_LE(std::abs(tame_diffusion(-2.0, x, 0.5, 0.1)), 2.0);
  }
}

TEST(Tamed, LayoutResolvesFineStep) {
  const TamedLayout lay = TamedLayout::make(1.0, {0.125, 0.0625, 0.0078125}, 4096);
  EXPECT_LE(lay.fine_h, 0.0078125 * 0.0078125 / 10.0);
  EXPECT_NEAR(lay.fine_h * static_cast<double>(lay.fine_steps), 0.125, 1e-15);
  EXPECT_EQ(lay.window_start[0], 0u);
  EXPECT_NO_THROW(TamedLayout::make(1.0, {0.3}, 16));
  EXPECT_THROW(TamedLayout::make(1.0, {0.3, 0.125, 0.07}, 16), DomainError);
  EXPECT_THROW(TamedLayout::make(0.1, {0.125}, 16), DomainError);
}

TEST(Tamed, NullDynamicsHaveZeroError) {
  const auto s = strong_error_sweep(model_1d(Drift(), 0.0), 1.0, 1.0, {0.5, 0.25}, 8, 1, 0.25, 16);
  for (const auto& r : s.rows) EXPECT_EQ(r.mean_square_error, 0.0);
  const auto [ref, tamed] = one_step_tamed_terminal(model_1d(Drift(), 0.0), 0.0, 1.0, 0.25, 16, {1, 0});
  EXPECT_EQ(ref, tamed);
}

TEST(Tamed, ConstantDriftMeanGapMatchesOracle) {
  // X_t - X^(eps)_t = eps (c - c / (1 + sqrt(eps) |X_{t-eps}|^ell)); with b = c
  // and sigma = 1 the window start is X_{t-eps} = c (t - eps) + W_{t-eps}.
  const double c = 0.8;
  const double eps = 0.25;
  const double ell = 1.0;
  const auto model = model_1d(Drift(ConstantDrift{v1(c)}));
  const int n = 20000;
  double gap = 0.0;
  double oracle = 0.0;
  Rng ro(SeedSpec{77, 0});
  for (int i = 0; i < n; ++i) {
    const auto [ref, tamed] = one_step_tamed_terminal(model, 0.0, 1.0, eps, 64, {13, static_cast<std::uint64_t>(i)}, ell);
    gap += ref - tamed;
    const double xa = c * (1.0 - eps) + std::sqrt(1.0 - eps) * ro.normal();
    oracle += eps * (c - c / (1.0 + std::sqrt(eps) * std::abs(xa)));
  }
  // The diffusion is constant and untamed-equal only at x = 0, so the gap
  // also carries a mean-zero (sigma - sigma_eps) dW term.
  EXPECT_NEAR(gap / n, oracle / n, 0.01);
}

TEST(Tamed, HestonErrorShrinksWithEpsilon) {
  PathDependentModel m = model_1d(Drift(Heston32Drift{1.0, 1.0}));
  m.diffusion = PowerDiffusion{1.0, 1.5};
  const auto s = strong_error_sweep(m, 1.0, 1.0, {0.125, 0.03125}, 2000, 4, 0.25, 1024);
  EXPECT_GT(s.rows[0].mean_square_error, 4.0 * s.rows[1].mean_square_error);
}
