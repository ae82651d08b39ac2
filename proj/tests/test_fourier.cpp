#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "pathdrift/fourier.hpp"

using namespace pathdrift;
using testing_helpers::model_1d;

TEST(Fourier, RampShape) {
  EXPECT_EQ(f_delta(0.3, 0.5), 0.0);
  EXPECT_EQ(f_delta(1.0, 0.5), 0.5);
  EXPECT_EQ(f_delta(9.0, 0.5), 1.0);
}

TEST(Fourier, BrownianOracle) {
  const std::vector<double> xi{0.0, 0.5, 1.0, 2.0};
  const auto d = cf_decay_diagnostic(model_1d(Drift()), 0.0, 1.0, 0.5, xi, 20000, 4, 5);
  for (const auto& r : d.rows) {
    EXPECT_NEAR(r.modulus, 0.5 * std::exp(-0.5 * r.xi * r.xi), 3.0 * r.stderr_ + 1e-12) << r.xi;
  }
  EXPECT_FALSE(d.tamed);
}

TEST(Fourier, SmallSigmaIsKilled) {
  const std::vector<double> xi{0.0, 1.0, 3.0};
  const auto d = cf_decay_diagnostic(model_1d(Drift(), 0.25), 0.0, 1.0, 0.5, xi, 100, 4, 5);
  for (const auto& r : d.rows) EXPECT_EQ(r.modulus, 0.0);
  EXPECT_EQ(d.l2_integral, 0.0);
}

TEST(Fourier, HestonModulusDecreases) {
  PathDependentModel m = model_1d(Drift(Heston32Drift{1.0, 1.0}));
  m.diffusion = PowerDiffusion{1.0, 1.5};
  const std::vector<double> xi{0.0, 1.0, 2.0, 4.0, 8.0};
  const auto d = cf_decay_diagnostic(m, 1.0, 1.0, 0.1, xi, 20000, 256, 6);
  EXPECT_TRUE(d.tamed);
  for (std::size_t j = 1; j < d.rows.size(); ++j) EXPECT_LT(d.rows[j].modulus, d.rows[j - 1].modulus);
}

TEST(Fourier, RejectsMultidimensionalModels) {
  PathDependentModel m;
  m.dim = 2;
  m.diffusion = ConstantDiffusion{Matrix::Identity(2, 2)};
  const std::vector<double> xi{1.0};
  EXPECT_THROW(cf_decay_diagnostic(m, 0.0, 1.0, 0.5, xi, 10, 4, 1), UnsupportedError);
}
