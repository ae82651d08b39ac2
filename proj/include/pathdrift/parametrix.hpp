#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pathdrift/errors.hpp"
#include "pathdrift/girsanov.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/model.hpp"
#include "pathdrift/rng.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

// ---------------------------------------------------------------------------
// Gaussian kernel and Hermite weights
// ---------------------------------------------------------------------------

/// H_A^i(v) = -(A^{-1} v)^i.
inline Vector hermite_first(const SpdMatrix& a, ConstVectorRef v) { return -a.solve(v); }

/// H_A^{ij}(v) = (A^{-1} v)^i (A^{-1} v)^j - (A^{-1})_{ij}.
inline Matrix hermite_second(const SpdMatrix& a, ConstVectorRef v) {
  const Vector u = a.solve(v);
  return u * u.transpose() - a.inverse();
}

/// theta_t(x, y) = -sum_i b_i(x) H^i_{t a(y)}(y - x)
///                 + sum_ij (a_ij(x) - a_ij(y)) / 2 H^{ij}_{t a(y)}(y - x).
inline double theta_weight(ConstVectorRef b_at_x, ConstMatrixRef a_at_x, ConstMatrixRef a_at_y, double t,
                           ConstVectorRef x, ConstVectorRef y) {
  if (!(t > 0.0)) throw DomainError("theta_weight: elapsed time must be positive");
  const SpdMatrix cov(t * Matrix(a_at_y));
  const Vector v = y - x;
  const Vector u = cov.solve(v);
  // -b . H^1 = b . A^{-1} v
  double out = b_at_x.dot(u);
  const Matrix diff = a_at_x - a_at_y;
  if (diff.cwiseAbs().maxCoeff() > 0.0) {
    const Matrix h2 = u * u.transpose() - cov.inverse();
    out += 0.5 * diff.cwiseProduct(h2).sum();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Counting process
// ---------------------------------------------------------------------------

/// Inter-arrival law zeta: exponential(lambda) or zeta(s) = A s^{-beta} on
/// (0, 2T] with A = (1 - beta) / (2T)^{1 - beta}.
struct CountingSpec {
  enum class Kind { exponential, beta };
  Kind kind = Kind::exponential;
  double lambda = 1.0;
  double beta = 0.5;
  double horizon = 1.0;  // T of the beta law

  static CountingSpec exponential(double lambda) { return {Kind::exponential, lambda, 0.5, 1.0}; }
  static CountingSpec beta_law(double beta, double horizon) { return {Kind::beta, 1.0, beta, horizon}; }

  void validate() const {
    if (kind == Kind::exponential && !(lambda > 0.0)) throw DomainError("counting: lambda must be positive");
    if (kind == Kind::beta) {
      if (!(beta > 0.0 && beta < 1.0)) throw DomainError("counting: beta must lie in (0, 1)");
      if (!(horizon > 0.0)) throw DomainError("counting: horizon must be positive");
    }
  }

  [[nodiscard]] double normalizer() const { return (1.0 - beta) / std::pow(2.0 * horizon, 1.0 - beta); }

  [[nodiscard]] double pdf(double s) const {
    if (s <= 0.0) return 0.0;
    if (kind == Kind::exponential) return lambda * std::exp(-lambda * s);
    if (s > 2.0 * horizon) return 0.0;
    return normalizer() * std::pow(s, -beta);
  }

  [[nodiscard]] double cdf(double s) const {
    if (s <= 0.0) return 0.0;
    if (kind == Kind::exponential) return -std::expm1(-lambda * s);
    if (s >= 2.0 * horizon) return 1.0;
    return std::pow(s / (2.0 * horizon), 1.0 - beta);
  }

  /// 1 - F(s), computed without cancellation for the exponential law.
  [[nodiscard]] double survival(double s) const {
    if (kind == Kind::exponential) return std::exp(-lambda * std::max(0.0, s));
    return 1.0 - cdf(s);
  }

  [[nodiscard]] double draw(Rng& rng) const {
    const double u = rng.uniform();
    if (kind == Kind::exponential) return -std::log(u) / lambda;
    return 2.0 * horizon * std::pow(u, 1.0 / (1.0 - beta));
  }

  [[nodiscard]] std::string tag() const {
    if (kind == Kind::exponential) return "exp:" + format_short(lambda);
    return "beta:" + format_short(beta);
  }

 private:
  static std::string format_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }
};

struct CountingDraw {
  std::vector<double> jump_times;  // tau_1 < ... < tau_R <= t
  double survival = 1.0;           // 1 - F(t - tau_R)
  [[nodiscard]] std::size_t jumps() const { return jump_times.size(); }
};

inline CountingDraw sample_counting(const CountingSpec& spec, double t, Rng& rng) {
  spec.validate();
  if (!(t > 0.0)) throw DomainError("sample_counting: t must be positive");
  if (spec.kind == CountingSpec::Kind::beta && t > 2.0 * spec.horizon) {
    throw DomainError("sample_counting: t exceeds the support of the beta law");
  }
  CountingDraw out;
  double tau = 0.0;
  for (;;) {
    const double next = tau + spec.draw(rng);
    if (next > t) break;
    if (!(next > tau)) throw NumericError("sample_counting: repeated jump time");
    out.jump_times.push_back(next);
    tau = next;
  }
  out.survival = spec.survival(t - tau);
  return out;
}

inline CountingDraw sample_counting(const CountingSpec& spec, double t, SeedSpec seed) {
  Rng rng(seed);
  return sample_counting(spec, t, rng);
}

// ---------------------------------------------------------------------------
// Frozen chain and the unbiased estimator
// ---------------------------------------------------------------------------

/// X_0 = y, X_j = X_{j-1} + sigma(X_{j-1}) (W_{tau_j} - W_{tau_{j-1}}).
inline std::vector<Vector> frozen_chain(const Diffusion& diffusion, ConstVectorRef y,
                                        const std::vector<double>& jump_times, Rng& rng) {
  const auto d = y.size();
  std::vector<Vector> states{Vector(y)};
  states.reserve(jump_times.size() + 1);
  Matrix sigma(d, d);
  Vector dw(d);
  double prev = 0.0;
  for (double tau : jump_times) {
    if (!(tau > prev)) throw DomainError("frozen_chain: jump times must be increasing");
    const double sd = std::sqrt(tau - prev);
    for (Eigen::Index i = 0; i < d; ++i) dw[i] = sd * rng.normal();
    diffusion.eval(prev, states.back(), sigma);
    states.push_back(states.back() + sigma * dw);
    prev = tau;
  }
  return states;
}

struct ParametrixChain {
  std::vector<double> jump_times;
  std::vector<Vector> states;
  double gamma = 1.0;
  double survival = 1.0;
  double value = 0.0;  // frozen Gaussian / survival * gamma
};

namespace detail {

inline void require_markov(const PathDependentModel& model) {
  if (!model.drift.is_markov()) throw UnsupportedError("unbiased estimator requires a Markov drift");
}

inline SpdMatrix spd_or_throw(const Matrix& a, ConstVectorRef at) {
  try {
    return SpdMatrix(a);
  } catch (const DomainError&) {
    std::string where;
    for (Eigen::Index i = 0; i < at.size(); ++i) where += (i ? "," : "") + std::to_string(at[i]);
    throw NumericError("unbiased: diffusion covariance not positive definite at state (" + where + ")");
  }
}

}  // namespace detail

/// One chain of the counting-process representation. Stream substream 0
/// drives the counting process, substream 1 the Gaussian increments.
inline ParametrixChain unbiased_density_chain(const PathDependentModel& model, ConstVectorRef x, ConstVectorRef y,
                                              double t, const CountingSpec& spec, SeedSpec seed) {
  detail::require_markov(model);
  Rng counting_rng(seed, 0);
  Rng gauss_rng(seed, 1);
  const CountingDraw draw = sample_counting(spec, t, counting_rng);
  ParametrixChain chain;
  chain.jump_times = draw.jump_times;
  chain.survival = draw.survival;
  chain.states = frozen_chain(model.diffusion, y, draw.jump_times, gauss_rng);
  const auto d = static_cast<Eigen::Index>(model.dim);
  Vector b(d);
  double prev = 0.0;
  for (std::size_t j = 0; j < chain.jump_times.size(); ++j) {
    const double dtau = chain.jump_times[j] - prev;
    const Vector& xn = chain.states[j + 1];
    const Vector& xo = chain.states[j];
    model.drift.eval_state(xn, b);
    const Matrix a_new = model.diffusion.covariance(chain.jump_times[j], xn);
    const Matrix a_old = model.diffusion.covariance(prev, xo);
    detail::spd_or_throw(a_old, xo);
    chain.gamma *= theta_weight(b, a_new, a_old, dtau, xn, xo) / spec.pdf(dtau);
    prev = chain.jump_times[j];
  }
  const Vector& last = chain.states.back();
  const SpdMatrix cov = detail::spd_or_throw((t - prev) * model.diffusion.covariance(prev, last), last);
  chain.value = gaussian_density(cov, x, last) / chain.survival * chain.gamma;
  if (!std::isfinite(chain.value)) throw NumericError("unbiased: non-finite sample");
  return chain;
}

inline double unbiased_density_sample(const PathDependentModel& model, ConstVectorRef x, ConstVectorRef y, double t,
                                      const CountingSpec& spec, SeedSpec seed) {
  return unbiased_density_chain(model, x, y, t, spec, seed).value;
}

struct UnbiasedEstimate {
  DensityEstimate estimate;
  double kurtosis = 0.0;
  double large_fraction = 0.0;  // share of |sample| > 10 |mean|
  double mean_jumps = 0.0;
  double sample_variance = 0.0;
};

namespace detail {

struct UnbiasedPartial {
  Aggregate values;
  Aggregate jumps;
  std::vector<double> samples;
};

inline UnbiasedEstimate finish_unbiased(const std::vector<UnbiasedPartial>& parts, std::uint64_t seed,
                                        const char* method) {
  Aggregate values;
  Aggregate jumps;
  for (const auto& p : parts) {
    values.merge(p.values);
    jumps.merge(p.jumps);
  }
  UnbiasedEstimate out;
  out.estimate = {values.mean(), values.stderr_or_zero(), values.count(), method, std::nullopt, {seed, 0}};
  out.kurtosis = values.kurtosis();
  out.mean_jumps = jumps.mean();
  out.sample_variance = values.variance();
  const double threshold = 10.0 * std::abs(values.mean());
  std::size_t large = 0;
  for (const auto& p : parts) {
    for (double s : p.samples) large += std::abs(s) > threshold ? 1 : 0;
  }
  out.large_fraction = values.count() ? static_cast<double>(large) / static_cast<double>(values.count()) : 0.0;
  return out;
}

}  // namespace detail

/// Mean of N unbiased density samples; chain i uses stream i.
inline UnbiasedEstimate unbiased_density(const PathDependentModel& model, ConstVectorRef x, ConstVectorRef y,
                                         double t, const CountingSpec& spec, std::size_t samples,
                                         std::uint64_t seed, const ExecPolicy& exec = {}) {
  if (samples == 0) throw DomainError("unbiased_density: need samples");
  auto parts = run_blocks(samples, exec, [&](std::size_t begin, std::size_t end) {
    detail::UnbiasedPartial p;
    p.samples.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      const ParametrixChain c = unbiased_density_chain(model, x, y, t, spec, SeedSpec{seed, i});
      p.values.push(c.value);
      p.jumps.push(static_cast<double>(c.jump_times.size()));
      p.samples.push_back(c.value);
    }
    return p;
  });
  return detail::finish_unbiased(parts, seed, "unbiased");
}

/// Importance density for unbiased_expectation.
struct ImportanceDensity {
  std::function<double(ConstVectorRef)> pdf;
  std::function<void(Rng&, VectorRef)> sample;
};

/// N(mean, scale^2 I).
inline ImportanceDensity gaussian_importance(Vector mean, double scale) {
  const auto d = mean.size();
  ImportanceDensity g;
  g.pdf = [mean, scale, d](ConstVectorRef z) {
    return std::exp(-0.5 * (z - mean).squaredNorm() / (scale * scale) -
                    static_cast<double>(d) * std::log(scale * std::sqrt(2.0 * std::numbers::pi)));
  };
  g.sample = [mean, scale, d](Rng& rng, VectorRef z) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = mean[i] + scale * rng.normal();
  };
  return g;
}

/// E[f(X_t^x)] = E[f(Z)/g(Z) * chain value at target Z]. The target Z is
/// drawn from substream 2 of each chain's stream.
inline UnbiasedEstimate unbiased_expectation(const PathDependentModel& model,
                                             const std::function<double(ConstVectorRef)>& f,
                                             const ImportanceDensity& g, ConstVectorRef x, double t,
                                             const CountingSpec& spec, std::size_t samples, std::uint64_t seed,
                                             const ExecPolicy& exec = {}) {
  if (samples == 0) throw DomainError("unbiased_expectation: need samples");
  const auto d = static_cast<Eigen::Index>(model.dim);
  auto parts = run_blocks(samples, exec, [&](std::size_t begin, std::size_t end) {
    detail::UnbiasedPartial p;
    p.samples.reserve(end - begin);
    Vector z(d);
    for (std::size_t i = begin; i < end; ++i) {
      Rng zr(SeedSpec{seed, i}, 2);
      g.sample(zr, z);
      const double fz = f(z);
      const double gz = g.pdf(z);
      double value = 0.0;
      std::size_t jumps = 0;
      if (fz != 0.0) {
        if (!(gz > 0.0)) throw NumericError("unbiased_expectation: importance density vanishes where f does not");
        const ParametrixChain c = unbiased_density_chain(model, x, z, t, spec, SeedSpec{seed, i});
        value = fz / gz * c.value;
        jumps = c.jump_times.size();
      }
      p.values.push(value);
      p.jumps.push(static_cast<double>(jumps));
      p.samples.push_back(value);
    }
    return p;
  });
  return detail::finish_unbiased(parts, seed, "unbiased");
}

// ---------------------------------------------------------------------------
// Analytic bounds
// ---------------------------------------------------------------------------

/// Coefficient of g_{c(t-s)} in the n-fold bound
/// (sqrt(d) |b| C)^n (t-s)^{(n-2)/2} Gamma(1/2)^n / Gamma(n/2).
inline double parametrix_term_bound(std::size_t n, double b_sup, double C_hat_plus, std::size_t dim,
                                    double elapsed) {
  if (n == 0) throw DomainError("parametrix_term_bound: n must be >= 1");
  if (!(elapsed > 0.0)) throw DomainError("parametrix_term_bound: elapsed time must be positive");
  const double nn = static_cast<double>(n);
  const double base = std::sqrt(static_cast<double>(dim)) * b_sup * C_hat_plus;
  const double log_val = nn * std::log(base) + 0.5 * (nn - 2.0) * std::log(elapsed) +
                         nn * std::lgamma(0.5) - std::lgamma(0.5 * nn);
  if (base == 0.0) return 0.0;
  return std::exp(log_val);
}

/// int over 0 < s_1 < ... < s_m < t0 of the iterated kernel
/// = t0^{b + m(1-a)} Gamma(1-a)^m Gamma(1+b) / Gamma(1 + b + m(1-a)).
inline double beta_convolution(std::size_t m, double a, double b, double t0) {
  if (m == 0) throw DomainError("beta_convolution: m must be >= 1");
  if (!(a >= 0.0 && a < 1.0)) throw DomainError("beta_convolution: a must lie in [0, 1)");
  if (!(b > -1.0)) throw DomainError("beta_convolution: b must exceed -1");
  if (!(t0 > 0.0)) throw DomainError("beta_convolution: t0 must be positive");
  const double mm = static_cast<double>(m);
  const double expo = b + mm * (1.0 - a);
  return std::exp(expo * std::log(t0) + mm * std::lgamma(1.0 - a) + std::lgamma(1.0 + b) - std::lgamma(1.0 + expo));
}

}  // namespace pathdrift
