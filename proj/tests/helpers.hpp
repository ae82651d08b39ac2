#pragma once

#include <cmath>
#include <numbers>

#include "pathdrift/model.hpp"

namespace testing_helpers {

using pathdrift::Drift;
using pathdrift::Matrix;
using pathdrift::PathDependentModel;
using pathdrift::Vector;

inline PathDependentModel model_1d(Drift drift, double sigma = 1.0) {
  PathDependentModel m;
  m.dim = 1;
  m.drift = std::move(drift);
  m.diffusion = pathdrift::ConstantDiffusion{Matrix::Constant(1, 1, sigma)};
  return m;
}

inline Vector v1(double a) { return Vector::Constant(1, a); }

/// Scalar N(mean, var) density written out independently of the library.
inline double gauss(double z, double mean, double var) {
  return std::exp(-(z - mean) * (z - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace testing_helpers
