#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "pathdrift/errors.hpp"
#include "pathdrift/girsanov.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

// ---------------------------------------------------------------------------
// Bang-bang diffusion dY = beta sgn(alpha - Y) dt + dW
// ---------------------------------------------------------------------------

/// int_a^inf z exp(-(z - c)^2 / 2) dz.
inline double bangbang_tail_integral(double a, double c) {
  const double u = a - c;
  return std::exp(-0.5 * u * u) + c * std::sqrt(0.5 * std::numbers::pi) * std::erfc(u / std::numbers::sqrt2);
}

/// prod_i 2 / sqrt(2 pi t) int_{|x_i - alpha_i| / sqrt t}^inf z exp(-(z - beta_i sqrt t)^2 / 2) dz.
///
/// This product is the density of |Y - alpha| at the origin, which is 2^d
/// times the density of Y at alpha (it gives 2 g_t at beta = 0). Use
/// bangbang_peak_density for the density of Y itself.
inline double bangbang_peak_formula(ConstVectorRef x, ConstVectorRef alpha, ConstVectorRef beta, double t) {
  if (!(t > 0.0)) throw DomainError("bangbang: t must be positive");
  if (x.size() != alpha.size() || x.size() != beta.size()) throw DomainError("bangbang: dimension mismatch");
  const double st = std::sqrt(t);
  double out = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out *= 2.0 / std::sqrt(2.0 * std::numbers::pi * t) *
           bangbang_tail_integral(std::abs(x[i] - alpha[i]) / st, beta[i] * st);
  }
  return out;
}

/// Density of Y_t at alpha started from x:
/// prod_i [ phi(u_i) / sqrt t + beta_i Phi(-u_i) ], u_i = (|x_i - alpha_i| - beta_i t) / sqrt t.
/// Continuous in beta, equal to g_t(x, alpha) at beta = 0.
inline double bangbang_peak_density(ConstVectorRef x, ConstVectorRef alpha, ConstVectorRef beta, double t) {
  if (!(t > 0.0)) throw DomainError("bangbang: t must be positive");
  if (x.size() != alpha.size() || x.size() != beta.size()) throw DomainError("bangbang: dimension mismatch");
  const double st = std::sqrt(t);
  double out = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = (std::abs(x[i] - alpha[i]) - beta[i] * t) / st;
    const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    out *= phi / st + beta[i] * 0.5 * std::erfc(u / std::numbers::sqrt2);
  }
  return out;
}

/// (q^{y, -B}_t(x, y), q^{y, +B}_t(x, y)) with every beta_i = +-b_sup.
inline std::pair<double, double> sharp_bracket(ConstVectorRef x, ConstVectorRef y, double t, double b_sup) {
  const Vector beta = Vector::Constant(x.size(), b_sup);
  return {bangbang_peak_density(x, y, -beta, t), bangbang_peak_density(x, y, beta, t)};
}

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

/// pass if [est - 3 SE, est + 3 SE] lies inside the bracket, fail if it
/// lies entirely outside, inconclusive otherwise.
inline Verdict interval_verdict(double estimate, double se, double lower, double upper) {
  const double lo = estimate - 3.0 * se;
  const double hi = estimate + 3.0 * se;
  if (lo >= lower && hi <= upper) return Verdict::pass;
  if (hi < lower || lo > upper) return Verdict::fail;
  return Verdict::inconclusive;
}

inline Verdict sharp_bound_verdict(const DensityEstimate& p_hat, ConstVectorRef x, ConstVectorRef y, double t,
                                   double b_sup) {
  const auto [lower, upper] = sharp_bracket(x, y, t, b_sup);
  return interval_verdict(p_hat.value, p_hat.stderr_, lower, upper);
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck dX = -kappa X dt + sigma dW
// ---------------------------------------------------------------------------

inline double ou_variance(double t, double kappa, double sigma) {
  // sigma^2 (1 - e^{-2 kappa t}) / (2 kappa), with the kappa -> 0 limit sigma^2 t.
  if (kappa == 0.0) return sigma * sigma * t;
  return -sigma * sigma * std::expm1(-2.0 * kappa * t) / (2.0 * kappa);
}

inline double ou_density(double x, double y, double t, double kappa, double sigma) {
  if (!(t > 0.0)) throw DomainError("ou_density: t must be positive");
  if (!(sigma > 0.0)) throw DomainError("ou_density: sigma must be positive");
  return normal_pdf(y, x * std::exp(-kappa * t), ou_variance(t, kappa, sigma));
}

// ---------------------------------------------------------------------------
// Gaussian envelopes C- g_{c- t} <= p_t <= C+ g_{c+ t}
// ---------------------------------------------------------------------------

struct GaussianEnvelope {
  double C_minus = 1.0;
  double c_minus = 1.0;
  double C_plus = 1.0;
  double c_plus = 1.0;

  void validate() const {
    if (!(C_minus > 0.0 && c_minus > 0.0 && C_plus > 0.0 && c_plus > 0.0)) {
      throw DomainError("envelope: constants must be positive");
    }
  }
};

/// g_{ct}(x, y) for the isotropic covariance c t I.
inline double isotropic_gaussian(ConstVectorRef x, ConstVectorRef y, double variance) {
  const double d = static_cast<double>(x.size());
  return std::exp(-0.5 * (y - x).squaredNorm() / variance - 0.5 * d * std::log(2.0 * std::numbers::pi * variance));
}

inline std::pair<double, double> envelope_bracket(const GaussianEnvelope& env, ConstVectorRef x, ConstVectorRef y,
                                                  double t) {
  env.validate();
  if (!(t > 0.0)) throw DomainError("envelope_bracket: t must be positive");
  return {env.C_minus * isotropic_gaussian(x, y, env.c_minus * t),
          env.C_plus * isotropic_gaussian(x, y, env.c_plus * t)};
}

struct EnvelopePoint {
  Vector x;
  Vector y;
  double t = 1.0;
  DensityEstimate estimate;
};

struct EnvelopeFit {
  GaussianEnvelope envelope;
  double c_fit = 0.0;  // least-squares spread
  double C_fit = 0.0;  // least-squares amplitude
};

/// Least-squares fit of log p = log C - (d/2) log(2 pi c t) - |y - x|^2 / (2 c t),
/// then widening to c+- = c (1 + spread)^{+-1} with amplitudes chosen so every
/// calibration point's 3 SE interval lies inside the bracket.
inline EnvelopeFit calibrate_envelope(std::span<const EnvelopePoint> points, double spread = 0.25) {
  if (points.size() < 2) throw DomainError("calibrate_envelope: need at least 2 points");
  std::vector<double> u;
  std::vector<double> v;
  for (const auto& p : points) {
    if (!(p.estimate.value > 0.0)) continue;
    const double d = static_cast<double>(p.x.size());
    u.push_back((p.y - p.x).squaredNorm() / p.t);
    v.push_back(std::log(p.estimate.value) + 0.5 * d * std::log(2.0 * std::numbers::pi * p.t));
  }
  if (u.size() < 2) throw NumericError("calibrate_envelope: fewer than 2 positive estimates");
  const double slope = ols_slope(u, v);
  if (!(slope < 0.0)) throw NumericError("calibrate_envelope: estimates do not decay with distance");
  double mu = 0.0;
  double mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(u.size());
  mv /= static_cast<double>(u.size());
  const double intercept = mv - slope * mu;
  EnvelopeFit fit;
  fit.c_fit = -0.5 / slope;
  const double d0 = static_cast<double>(points.front().x.size());
  fit.C_fit = std::exp(intercept + 0.5 * d0 * std::log(fit.c_fit));
  GaussianEnvelope& env = fit.envelope;
  env.c_plus = fit.c_fit * (1.0 + spread);
  env.c_minus = fit.c_fit / (1.0 + spread);
  double cp = 0.0;
  double cm = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    const double hi = p.estimate.value + 3.0 * p.estimate.stderr_;
    const double lo = p.estimate.value - 3.0 * p.estimate.stderr_;
    cp = std::max(cp, hi / isotropic_gaussian(p.x, p.y, env.c_plus * p.t));
    if (lo > 0.0) cm = std::min(cm, lo / isotropic_gaussian(p.x, p.y, env.c_minus * p.t));
  }
  env.C_plus = cp;
  env.C_minus = std::isfinite(cm) ? cm : fit.C_fit * 1e-3;
  return fit;
}

}  // namespace pathdrift
