#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "pathdrift/convergence.hpp"

using namespace pathdrift;
using testing_helpers::model_1d;
using testing_helpers::v1;

namespace {
const Matrix kSigma = Matrix::Identity(1, 1);
}

TEST(DriftGap, ConstantNuHasNoGap) {
  FunctionalSpec spec;
  spec.nu.offset = 2.0;
  const std::vector<std::size_t> levels{8, 16};
  for (const auto& r : drift_discretization_error(spec, kSigma, v1(0.0), 1.0, levels, 0, 2.0, 200, 1)) {
    EXPECT_EQ(r.error, 0.0);
  }
}

TEST(DriftGap, StateOnlyGapFollowsBrownianModulus) {
  FunctionalSpec spec;
  spec.nu.state = 1.0;
  const std::vector<std::size_t> levels{16, 64, 256};
  const auto rows = drift_discretization_error(spec, kSigma, v1(0.0), 1.0, levels, 0, 2.0, 4000, 2);
  // E|W_s - W_eta(s)|^2 at the node just before a mark is about 1/n.
  for (std::size_t j = 0; j < rows.size(); ++j) {
    EXPECT_LT(rows[j].error, 1.3 / std::sqrt(static_cast<double>(levels[j])));
    if (j > 0) {
      EXPECT_NEAR(rows[j - 1].error / rows[j].error, 2.0, 0.4);
    }
  }
}

TEST(DriftGap, TailFloorTracksTailMass) {
  FunctionalSpec spec;
  spec.nu.delay = 1.0;
  for (int i = 1; i <= 6; ++i) spec.delays.push_back({0.1 * i, std::pow(0.5, i)});
  const std::vector<std::size_t> ms{1, 2, 3, 4, 5};
  const auto sweep = tail_floor_sweep(spec, kSigma, v1(1.0), 1.0, 256, ms, 2.0, 2000, 3);
  for (std::size_t j = 1; j < sweep.rows.size(); ++j) EXPECT_LT(sweep.rows[j].error, sweep.rows[j - 1].error);
  EXPECT_GT(sweep.log_correlation, 0.9);
}

TEST(RateExperiment, ZeroNuGivesZeroDifferences) {
  FunctionalSpec spec;
  const auto model = model_1d(Drift(FunctionalDrift{spec}));
  const std::vector<std::size_t> levels{8, 16};
  const auto fit = density_rate_experiment(spec, model, v1(0.0), v1(0.0), 1.0, levels, 0, 500, 0.2, 1,
                                           RateOptions{0, 20, {}});
  for (const auto& l : fit.levels) EXPECT_EQ(l.signed_difference, 0.0);
}

TEST(RateExperiment, RunningMaxLevelsDecrease) {
  FunctionalSpec spec;
  spec.nu.max = 1.0;
  spec.nu.saturate = 1.0;
  const auto model = model_1d(Drift(FunctionalDrift{spec}));
  const std::vector<std::size_t> levels{4, 16, 64};
  const auto fit = density_rate_experiment(spec, model, v1(0.0), v1(0.5), 1.0, levels, 0, 20000, 0.2, 4,
                                           RateOptions{256, 50, {}});
  EXPECT_TRUE(fit.strictly_decreasing);
}
