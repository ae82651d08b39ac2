#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "pathdrift/errors.hpp"
#include "pathdrift/girsanov.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/model.hpp"
#include "pathdrift/path.hpp"
#include "pathdrift/rng.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

namespace detail {

// Least common multiple of the levels, scaled up until it reaches `minimum`.
inline std::size_t fine_steps_for(std::span<const std::size_t> levels, std::size_t minimum) {
  std::size_t l = 1;
  for (std::size_t n : levels) {
    if (n == 0) throw DomainError("convergence: levels must be >= 1");
    l = std::lcm(l, n);
  }
  std::size_t f = l;
  while (f < minimum) f += l;
  return f;
}

inline void check_levels(std::span<const std::size_t> levels) {
  if (levels.empty()) throw DomainError("convergence: need at least one level");
  for (std::size_t j = 1; j < levels.size(); ++j) {
    if (!(levels[j] > levels[j - 1])) throw DomainError("convergence: levels must be increasing");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Drift discretization gap along x + sigma W
// ---------------------------------------------------------------------------

struct DriftGapRow {
  std::size_t n = 0;
  double error = 0.0;  // sup over the s-grid of E[|gap|^p]^{1/p}
  double stderr_ = 0.0;
  double s_at_sup = 0.0;
};

struct DriftGapOptions {
  std::size_t fine_steps = 0;  // 0 = 4 * max level (rounded to a common multiple)
  std::size_t s_points = 64;
  ExecPolicy exec;
};

/// Per level n, sup_s E[|nu(A_s(x + sigma W)) - nu(A^(n,m)_s(x + sigma W))|^p]^{1/p}
/// on an s-grid of the fine nodes immediately before t j / s_points
/// (j = 1..s_points), where the flooring error of A^(n,m) is largest.
/// The reference A uses the fine grid and all stored delays.
inline std::vector<DriftGapRow> drift_discretization_error(const FunctionalSpec& spec, const Matrix& sigma,
                                                           ConstVectorRef x, double t,
                                                           std::span<const std::size_t> levels, std::size_t m,
                                                           double p, std::size_t samples, std::uint64_t seed,
                                                           const DriftGapOptions& opt = {}) {
  spec.validate();
  detail::check_levels(levels);
  if (!(p >= 1.0)) throw DomainError("drift_discretization_error: p must be >= 1");
  if (samples < 2) throw DomainError("drift_discretization_error: need at least 2 samples");
  const std::size_t d = static_cast<std::size_t>(x.size());
  if (sigma.rows() != x.size() || sigma.cols() != x.size()) throw DomainError("drift_discretization_error: sigma shape");
  std::vector<std::size_t> all(levels.begin(), levels.end());
  all.push_back(opt.s_points);
  const std::size_t fine = detail::fine_steps_for(all, opt.fine_steps ? opt.fine_steps : 4 * levels.back());
  if (opt.fine_steps && fine != opt.fine_steps) {
    throw DomainError("drift_discretization_error: fine steps must be a multiple of every level");
  }
  const TimeGrid grid = uniform_grid(t, fine);
  std::vector<std::size_t> s_nodes;
  for (std::size_t j = 1; j <= opt.s_points; ++j) s_nodes.push_back(j * fine / opt.s_points - 1);
  const Drift drift(FunctionalDrift{spec});
  const std::size_t nl = levels.size();
  const std::size_t ns = s_nodes.size();

  auto parts = run_blocks(samples, opt.exec, [&](std::size_t begin, std::size_t end) {
    std::vector<Aggregate> acc(nl * ns);
    std::vector<double> states((fine + 1) * d);
    Vector dw(static_cast<Eigen::Index>(d));
    Vector ref(static_cast<Eigen::Index>(d));
    Vector disc(static_cast<Eigen::Index>(d));
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      for (std::size_t r = 0; r < d; ++r) states[r] = x[static_cast<Eigen::Index>(r)];
      const double sd = std::sqrt(t / static_cast<double>(fine));
      for (std::size_t k = 0; k < fine; ++k) {
        for (std::size_t r = 0; r < d; ++r) dw[static_cast<Eigen::Index>(r)] = sd * rng.normal();
        Eigen::Map<const Vector> cur(states.data() + k * d, static_cast<Eigen::Index>(d));
        Eigen::Map<Vector> nxt(states.data() + (k + 1) * d, static_cast<Eigen::Index>(d));
        nxt.noalias() = sigma * dw;
        nxt = cur + nxt;
      }
      DriftEvaluator reference(drift, d, grid, Discretization{});
      std::vector<DriftEvaluator> discrete;
      discrete.reserve(nl);
      for (std::size_t n : levels) discrete.emplace_back(drift, d, grid, Discretization{n, m});
      std::size_t next_s = 0;
      for (std::size_t k = 0; k <= s_nodes.back(); ++k) {
        const bool wanted = k == s_nodes[next_s];
        reference.eval(k, states, ref);
        for (std::size_t l = 0; l < nl; ++l) {
          discrete[l].eval(k, states, disc);
          if (wanted) acc[l * ns + next_s].push(std::pow((ref - disc).norm(), p));
        }
        if (wanted) ++next_s;
      }
    }
    return acc;
  });
  std::vector<Aggregate> total(nl * ns);
  for (const auto& part : parts) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j].merge(part[j]);
  }
  std::vector<DriftGapRow> rows;
  for (std::size_t l = 0; l < nl; ++l) {
    DriftGapRow row{levels[l], 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < ns; ++j) {
      const Aggregate& a = total[l * ns + j];
      const double mp = std::max(0.0, a.mean());
      const double err = std::pow(mp, 1.0 / p);
      if (err > row.error || j == 0) {
        row.error = err;
        // Delta method for M^{1/p}.
        row.stderr_ = mp > 0.0 ? a.stderr_or_zero() * std::pow(mp, 1.0 / p - 1.0) / p : 0.0;
        row.s_at_sup = grid[s_nodes[j]];
      }
    }
    rows.push_back(row);
  }
  return rows;
}

struct TailFloorRow {
  std::size_t m = 0;
  double tail_mass = 0.0;
  double error = 0.0;
  double stderr_ = 0.0;
};

struct TailFloorSweep {
  std::vector<TailFloorRow> rows;
  double log_correlation = std::numeric_limits<double>::quiet_NaN();  // corr(log error, log tail mass)
};

/// Fixed large n, delay truncation m swept: the gap should track sum_{i>m} theta_i.
inline TailFloorSweep tail_floor_sweep(const FunctionalSpec& spec, const Matrix& sigma, ConstVectorRef x, double t,
                                       std::size_t n, std::span<const std::size_t> ms, double p, std::size_t samples,
                                       std::uint64_t seed, const DriftGapOptions& opt = {}) {
  TailFloorSweep out;
  std::vector<double> le;
  std::vector<double> lt;
  const std::size_t levels[] = {n};
  for (std::size_t m : ms) {
    const auto rows = drift_discretization_error(spec, sigma, x, t, levels, m, p, samples, seed, opt);
    TailFloorRow r{m, spec.tail_mass(m), rows.front().error, rows.front().stderr_};
    if (r.error > 0.0 && r.tail_mass > 0.0) {
      le.push_back(std::log(r.error));
      lt.push_back(std::log(r.tail_mass));
    }
    out.rows.push_back(r);
  }
  if (le.size() >= 3) out.log_correlation = correlation(le, lt);
  return out;
}

// ---------------------------------------------------------------------------
// Density rate |p_t - p_t^(n,m)|
// ---------------------------------------------------------------------------

struct RateLevel {
  std::size_t n = 0;
  double error = 0.0;
  double stderr_ = 0.0;
  double signed_difference = 0.0;
};

struct RateFitResult {
  std::vector<RateLevel> levels;
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();  // rate r in error ~ (n / log n)^{-r}
  std::pair<double, double> slope_ci{std::numeric_limits<double>::quiet_NaN(),
                                     std::numeric_limits<double>::quiet_NaN()};
  double tail_mass = 0.0;
  double reference_density = 0.0;
  double reference_stderr = 0.0;
  bool strictly_decreasing = false;
  std::size_t fine_steps = 0;
};

struct RateOptions {
  std::size_t fine_steps = 0;  // 0 = 4 * max level
  std::size_t bootstrap = 200;
  ExecPolicy exec;
};

namespace detail {

inline double rate_slope(std::span<const std::size_t> levels, std::span<const double> errors) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (!(errors[j] > 0.0)) continue;
    const double n = static_cast<double>(levels[j]);
    lx.push_back(std::log(n / std::log(n)));
    ly.push_back(std::log(errors[j]));
  }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return -ols_slope(lx, ly);
}

}  // namespace detail

/// Kernel-Girsanov densities of the reference functional drift and of its
/// A^(n,m) discretizations on one driftless path per sample, so every level
/// shares Y_t and the Brownian increments. The slope is fitted to
/// log error against log(n / log n); its CI is a percentile bootstrap over
/// samples.
inline RateFitResult density_rate_experiment(const FunctionalSpec& spec, const PathDependentModel& model,
                                             ConstVectorRef x, ConstVectorRef y, double t,
                                             std::span<const std::size_t> levels, std::size_t m,
                                             std::size_t samples, double h, std::uint64_t seed,
                                             const RateOptions& opt = {}) {
  spec.validate();
  detail::check_levels(levels);
  if (!model.diffusion_constant()) throw UnsupportedError("density_rate_experiment: requires constant diffusion");
  if (!(h > 0.0)) throw DomainError("density_rate_experiment: bandwidth must be positive");
  if (samples < 2) throw DomainError("density_rate_experiment: need at least 2 samples");
  const std::size_t d = model.dim;
  const std::size_t fine = detail::fine_steps_for(levels, opt.fine_steps ? opt.fine_steps : 4 * levels.back());
  if (opt.fine_steps && fine != opt.fine_steps) {
    throw DomainError("density_rate_experiment: fine steps must be a multiple of every level");
  }
  const TimeGrid grid = uniform_grid(t, fine);
  const Drift drift(FunctionalDrift{spec});
  const Matrix& sigma = model.diffusion.constant_matrix();
  Eigen::FullPivLU<Matrix> lu(sigma);
  if (!lu.isInvertible()) throw NumericError("density_rate_experiment: singular diffusion");
  const Matrix sigma_inv = lu.inverse();
  const std::size_t nl = levels.size();

  struct Partial {
    Aggregate reference;
    std::vector<Aggregate> diff;
    std::vector<double> samples;  // per sample: nl differences
  };
  auto parts = run_blocks(samples, opt.exec, [&](std::size_t begin, std::size_t end) {
    Partial part;
    part.diff.resize(nl);
    part.samples.reserve((end - begin) * nl);
    std::vector<double> states((fine + 1) * d);
    const auto dd = static_cast<Eigen::Index>(d);
    Vector dw(dd);
    Vector b(dd);
    Vector mu(dd);
    std::vector<double> logw(nl + 1);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      for (std::size_t r = 0; r < d; ++r) states[r] = x[static_cast<Eigen::Index>(r)];
      DriftEvaluator reference(drift, d, grid, Discretization{});
      std::vector<DriftEvaluator> discrete;
      discrete.reserve(nl);
      for (std::size_t n : levels) discrete.emplace_back(drift, d, grid, Discretization{n, m});
      std::fill(logw.begin(), logw.end(), 0.0);
      const double dt = t / static_cast<double>(fine);
      const double sd = std::sqrt(dt);
      for (std::size_t k = 0; k < fine; ++k) {
        for (Eigen::Index r = 0; r < dd; ++r) dw[r] = sd * rng.normal();
        const auto push = [&](DriftEvaluator& ev, double& lw) {
          ev.eval(k, states, b);
          mu.noalias() = sigma_inv * b;
          lw += mu.dot(dw) - 0.5 * mu.squaredNorm() * dt;
        };
        push(reference, logw[0]);
        for (std::size_t l = 0; l < nl; ++l) push(discrete[l], logw[l + 1]);
        Eigen::Map<const Vector> cur(states.data() + k * d, dd);
        Eigen::Map<Vector> nxt(states.data() + (k + 1) * d, dd);
        nxt.noalias() = sigma * dw;
        nxt = cur + nxt;
      }
      const Eigen::Map<const Vector> yt(states.data() + fine * d, dd);
      const double kern = product_kernel(yt - y, h);
      const double ref = kern * std::exp(logw[0]);
      part.reference.push(ref);
      for (std::size_t l = 0; l < nl; ++l) {
        const double diff = ref - kern * std::exp(logw[l + 1]);
        part.diff[l].push(diff);
        part.samples.push_back(diff);
      }
    }
    return part;
  });

  RateFitResult out;
  out.fine_steps = fine;
  out.tail_mass = spec.tail_mass(m);
  Aggregate reference;
  std::vector<Aggregate> diff(nl);
  std::vector<double> all;
  all.reserve(samples * nl);
  for (const auto& part : parts) {
    reference.merge(part.reference);
    for (std::size_t l = 0; l < nl; ++l) diff[l].merge(part.diff[l]);
    all.insert(all.end(), part.samples.begin(), part.samples.end());
  }
  out.reference_density = reference.mean();
  out.reference_stderr = reference.stderr_or_zero();
  std::vector<double> errors;
  for (std::size_t l = 0; l < nl; ++l) {
    out.levels.push_back({levels[l], std::abs(diff[l].mean()), diff[l].stderr_or_zero(), diff[l].mean()});
    errors.push_back(std::abs(diff[l].mean()));
  }
  out.strictly_decreasing = true;
  for (std::size_t l = 1; l < nl; ++l) out.strictly_decreasing &= errors[l] < errors[l - 1];
  out.fitted_slope = detail::rate_slope(levels, errors);

  if (opt.bootstrap > 0) {
    Rng boot(SeedSpec{seed, samples}, 3);
    std::vector<double> slopes;
    std::vector<double> sums(nl);
    for (std::size_t b = 0; b < opt.bootstrap; ++b) {
      std::fill(sums.begin(), sums.end(), 0.0);
      for (std::size_t i = 0; i < samples; ++i) {
        const auto pick = static_cast<std::size_t>(boot.uniform() * static_cast<double>(samples));
        const std::size_t row = std::min(pick, samples - 1);
        for (std::size_t l = 0; l < nl; ++l) sums[l] += all[row * nl + l];
      }
      for (double& s : sums) s = std::abs(s / static_cast<double>(samples));
      const double s = detail::rate_slope(levels, sums);
      if (std::isfinite(s)) slopes.push_back(s);
    }
    if (slopes.size() >= 10) {
      std::sort(slopes.begin(), slopes.end());
      const auto at = [&](double q) {
        const double pos = q * static_cast<double>(slopes.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, slopes.size() - 1);
        return slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);
      };
      out.slope_ci = {at(0.025), at(0.975)};
    }
  }
  return out;
}

}  // namespace pathdrift
