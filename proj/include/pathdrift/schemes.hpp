#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathdrift/errors.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/model.hpp"
#include "pathdrift/path.hpp"
#include "pathdrift/rng.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

// ---------------------------------------------------------------------------
// Euler-Maruyama
// ---------------------------------------------------------------------------

/// Reusable buffers for simulating many paths of one model on one grid.
class EulerSimulator {
 public:
  EulerSimulator(const PathDependentModel& model, std::span<const double> grid, Discretization disc = {})
      : model_(&model), grid_(grid), disc_(disc) {
    validate_grid(grid);
    const auto d = static_cast<Eigen::Index>(model.dim);
    states_.resize(grid.size() * model.dim);
    increments_.resize((grid.size() - 1) * model.dim);
    b_.resize(d);
    dw_.resize(d);
    sigma_.resize(d, d);
  }

  /// Keep b(t_k, X) for every step k (drift_values(), row-major by step).
  void record_drift(bool on) {
    record_ = on;
    if (on) drift_values_.assign((grid_.size() - 1) * model_->dim, 0.0);
  }

  /// One path started at x0. With `with_drift == false` the drift is
  /// ignored (the driftless process Y).
  void simulate(ConstVectorRef x0, Rng& rng, bool with_drift = true) {
    const std::size_t d = model_->dim;
    if (static_cast<std::size_t>(x0.size()) != d) throw DomainError("euler_maruyama: x0 has wrong dimension");
    for (std::size_t i = 0; i < d; ++i) states_[i] = x0[static_cast<Eigen::Index>(i)];
    DriftEvaluator ev(model_->drift, d, grid_, disc_);
    const bool drift_on = with_drift && !model_->drift.is_zero();
    const bool constant_sigma = model_->diffusion.is_constant();
    if (constant_sigma) sigma_ = model_->diffusion.constant_matrix();
    for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
      const double dt = grid_[k + 1] - grid_[k];
      const double sd = std::sqrt(dt);
      for (std::size_t i = 0; i < d; ++i) {
        dw_[static_cast<Eigen::Index>(i)] = sd * rng.normal();
        increments_[k * d + i] = dw_[static_cast<Eigen::Index>(i)];
      }
      Eigen::Map<const Vector> xk(states_.data() + k * d, static_cast<Eigen::Index>(d));
      Eigen::Map<Vector> xn(states_.data() + (k + 1) * d, static_cast<Eigen::Index>(d));
      if (!constant_sigma) model_->diffusion.eval(grid_[k], xk, sigma_);
      if (drift_on) {
        ev.eval(k, states_, b_);
        if (record_) std::copy(b_.data(), b_.data() + d, drift_values_.data() + k * d);
        xn.noalias() = sigma_ * dw_;  // no heap temporary
        xn = xk + dt * b_ + xn;
      } else {
        xn.noalias() = sigma_ * dw_;
        xn = xk + xn;
      }
      if (!xn.allFinite()) {
        throw NumericError("euler_maruyama: non-finite state at step " + std::to_string(k + 1));
      }
    }
  }

  [[nodiscard]] std::span<const double> states() const { return states_; }
  [[nodiscard]] std::span<const double> increments() const { return increments_; }
  [[nodiscard]] std::span<const double> drift_values() const { return drift_values_; }
  [[nodiscard]] Eigen::Map<const Vector> state(std::size_t k) const {
    return {states_.data() + k * model_->dim, static_cast<Eigen::Index>(model_->dim)};
  }
  [[nodiscard]] Eigen::Map<const Vector> terminal() const { return state(grid_.size() - 1); }

  [[nodiscard]] DiscretePath to_path() const {
    return DiscretePath(TimeGrid(grid_.begin(), grid_.end()), model_->dim, states_, increments_);
  }

 private:
  const PathDependentModel* model_;
  std::span<const double> grid_;
  Discretization disc_;
  std::vector<double> states_;
  std::vector<double> increments_;
  std::vector<double> drift_values_;
  bool record_ = false;
  Vector b_;
  Vector dw_;
  Matrix sigma_;
};

/// X_{k+1} = X_k + b(t_k, X_{<=k}) dt + sigma(t_k, X_k) dW_k.
inline DiscretePath euler_maruyama(const PathDependentModel& model, ConstVectorRef x0, const TimeGrid& grid,
                                   SeedSpec seed) {
  EulerSimulator sim(model, grid);
  Rng rng(seed);
  sim.simulate(x0, rng);
  return sim.to_path();
}

/// Euler-Maruyama scheme whose drift reads the discretized functional
/// A^(n,m): eta_n flooring and delay slots beyond m set to 0. The
/// simulation grid is uniform with n * refine steps on [0, horizon].
inline DiscretePath em_path_dependent(const FunctionalSpec& spec, const PathDependentModel& model,
                                      ConstVectorRef x0, double horizon, std::size_t n, std::size_t m,
                                      SeedSpec seed, std::size_t refine = 1) {
  if (n == 0) throw DomainError("em_path_dependent: n must be >= 1");
  if (refine == 0) throw DomainError("em_path_dependent: refine must be >= 1");
  spec.validate();
  PathDependentModel scheme = model;
  scheme.drift = Drift(FunctionalDrift{spec});
  const TimeGrid grid = uniform_grid(horizon, n * refine);
  EulerSimulator sim(scheme, grid, Discretization{n, m});
  Rng rng(seed);
  sim.simulate(x0, rng);
  return sim.to_path();
}

// ---------------------------------------------------------------------------
// One-step tamed scheme (one-dimensional)
// ---------------------------------------------------------------------------

/// Taming exponent and parameter with the Khasminskii exponents they must
/// respect: ell <= (p0 - 2) / 4 and epsilon in (0, 1).
struct TamedCoefficients {
  double ell = 0.25;
  double epsilon = 0.1;
  double p0 = 3.0;
  double p1 = 2.0;
  double k = 1.0;

  void validate() const {
    if (!(p0 > 2.0) || !(p1 > 2.0 || p1 == 2.0)) throw DomainError("tamed: Khasminskii exponents must exceed 2");
    if (!(ell > 0.0) || ell > (p0 - 2.0) / 4.0 + 1e-15) throw DomainError("tamed: ell must lie in (0, (p0-2)/4]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("tamed: epsilon must lie in (0, 1)");
  }
};

/// b_eps = b / (1 + eps^{1/2} |x|^ell).
inline double tame_drift(double b_val, double x, double ell, double epsilon) {
  return b_val / (1.0 + std::sqrt(epsilon) * std::pow(std::abs(x), ell));
}

/// sigma_eps = sigma / (1 + eps^{1/2} |x|^{ell/2}).
inline double tame_diffusion(double sigma_val, double x, double ell, double epsilon) {
  return sigma_val / (1.0 + std::sqrt(epsilon) * std::pow(std::abs(x), 0.5 * ell));
}

/// Scalar view of a one-dimensional Markov model, allocation-free.
class ScalarCoefficients {
 public:
  explicit ScalarCoefficients(const PathDependentModel& model)
      : model_(&model), x_(1), b_(1), s_(1, 1) {
    if (model.dim != 1) throw UnsupportedError("scalar coefficients require dim = 1");
    if (!model.drift.is_markov()) throw UnsupportedError("scalar coefficients require a Markov drift");
  }
  double drift(double x) {
    x_[0] = x;
    model_->drift.eval_state(x_, b_);
    return b_[0];
  }
  double sigma(double t, double x) {
    x_[0] = x;
    model_->diffusion.eval(t, x_, s_);
    return s_(0, 0);
  }

 private:
  const PathDependentModel* model_;
  Vector x_;
  Vector b_;
  Matrix s_;
};

/// Time layout of a coupled tamed-error replication: coarse Euler steps on
/// [0, t - eps_max], then a fine uniform step h_fine on [t - eps_max, t]
/// that divides every eps and satisfies h_fine <= min(eps)^2 / 10.
struct TamedLayout {
  double t = 1.0;
  std::vector<double> epsilons;
  std::size_t coarse_steps = 0;
  double coarse_h = 0.0;
  std::size_t fine_steps = 0;  // over the window of length eps_max
  double fine_h = 0.0;
  std::vector<std::size_t> window_start;  // fine index of t - eps_j

  static TamedLayout make(double t, std::vector<double> epsilons, std::size_t steps_per_unit) {
    if (epsilons.empty()) throw DomainError("tamed: need at least one epsilon");
    if (steps_per_unit == 0) throw DomainError("tamed: fine steps must be >= 1");
    double eps_max = 0.0;
    double eps_min = std::numeric_limits<double>::infinity();
    for (double e : epsilons) {
      if (!(e > 0.0 && e < 1.0)) throw DomainError("tamed: epsilon must lie in (0, 1)");
      if (!(e < t)) throw DomainError("tamed: epsilon must be smaller than t");
      eps_max = std::max(eps_max, e);
      eps_min = std::min(eps_min, e);
    }
    TamedLayout lay;
    lay.t = t;
    lay.epsilons = std::move(epsilons);
    const double h_cap = std::min(1.0 / static_cast<double>(steps_per_unit), eps_min * eps_min / 10.0);
    lay.fine_steps = static_cast<std::size_t>(std::ceil(eps_max / h_cap - 1e-9));
    lay.fine_h = eps_max / static_cast<double>(lay.fine_steps);
    for (double e : lay.epsilons) {
      const double cells = e / lay.fine_h;
      const double rounded = std::round(cells);
      if (std::abs(cells - rounded) > 1e-6 * std::max(1.0, cells)) {
        throw DomainError("tamed: every epsilon must be a multiple of the fine step (use dyadic epsilons)");
      }
      lay.window_start.push_back(lay.fine_steps - static_cast<std::size_t>(rounded));
    }
    const double head = t - eps_max;
    lay.coarse_steps = static_cast<std::size_t>(std::ceil(head * static_cast<double>(steps_per_unit) - 1e-9));
    lay.coarse_h = lay.coarse_steps > 0 ? head / static_cast<double>(lay.coarse_steps) : 0.0;
    return lay;
  }
};

struct TamedSample {
  double reference = 0.0;          // fine-EM value at t
  std::vector<double> tamed;       // one-step tamed terminal per epsilon
  bool blown_up = false;           // fine path became non-finite
};

/// One coupled replication: both members share X on [0, t - eps] and the
/// Brownian increment over (t - eps, t].
inline TamedSample tamed_replication(ScalarCoefficients& coef, double x0, const TamedLayout& lay, double ell,
                                     Rng& rng) {
  TamedSample out;
  out.tamed.assign(lay.epsilons.size(), std::numeric_limits<double>::quiet_NaN());
  double x = x0;
  double time = 0.0;
  const double sc = std::sqrt(lay.coarse_h);
  for (std::size_t k = 0; k < lay.coarse_steps; ++k) {
    const double dw = sc * rng.normal();
    x += coef.drift(x) * lay.coarse_h + coef.sigma(time, x) * dw;
    time += lay.coarse_h;
  }
  const double sf = std::sqrt(lay.fine_h);
  // Window starts sorted descending by epsilon are not assumed; track each.
  std::vector<double> anchor(lay.epsilons.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> w_at_anchor(lay.epsilons.size(), 0.0);
  double w = 0.0;
  const double window_origin = lay.t - lay.fine_h * static_cast<double>(lay.fine_steps);
  for (std::size_t k = 0; k <= lay.fine_steps; ++k) {
    for (std::size_t j = 0; j < lay.epsilons.size(); ++j) {
      if (lay.window_start[j] == k) {
        anchor[j] = x;
        w_at_anchor[j] = w;
      }
    }
    if (k == lay.fine_steps) break;
    const double dw = sf * rng.normal();
    const double tk = window_origin + lay.fine_h * static_cast<double>(k);
    x += coef.drift(x) * lay.fine_h + coef.sigma(tk, x) * dw;
    w += dw;
    if (!std::isfinite(x)) {
      out.blown_up = true;
      return out;
    }
  }
  out.reference = x;
  for (std::size_t j = 0; j < lay.epsilons.size(); ++j) {
    const double eps = lay.epsilons[j];
    const double xa = anchor[j];
    const double start = lay.t - eps;
    out.tamed[j] = xa + tame_drift(coef.drift(xa), xa, ell, eps) * eps +
                   tame_diffusion(coef.sigma(start, xa), xa, ell, eps) * (w - w_at_anchor[j]);
  }
  return out;
}

/// Pair (fine-EM proxy of X_t, one-step tamed X^(eps)_t) on one Brownian path.
inline std::pair<double, double> one_step_tamed_terminal(const PathDependentModel& model, double x0, double t,
                                                         double epsilon, std::size_t fine_steps, SeedSpec seed,
                                                         double ell = 0.25) {
  if (!(epsilon < t)) throw DomainError("one_step_tamed_terminal: epsilon must be smaller than t");
  ScalarCoefficients coef(model);
  const TamedLayout lay = TamedLayout::make(t, {epsilon}, fine_steps);
  Rng rng(seed);
  const TamedSample s = tamed_replication(coef, x0, lay, ell, rng);
  if (s.blown_up) throw NumericError("one_step_tamed_terminal: fine path blew up");
  return {s.reference, s.tamed[0]};
}

struct StrongErrorRow {
  double epsilon = 0.0;
  double mean_square_error = 0.0;
  double stderr_ = 0.0;
  std::size_t replications = 0;
  std::size_t blowups = 0;
};

struct StrongErrorSweep {
  std::vector<StrongErrorRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();  // d log MSE / d log eps
  double fine_h = 0.0;
};

/// Coupled estimate of E|X_t - X^(eps)_t|^2 per epsilon; one fine path per
/// replication serves all epsilons. Replication r uses stream r.
inline StrongErrorSweep strong_error_sweep(const PathDependentModel& model, double x0, double t,
                                           std::vector<double> epsilons, std::size_t replications,
                                           std::uint64_t seed, double ell = 0.25,
                                           std::size_t fine_steps = 4096, const ExecPolicy& exec = {}) {
  for (std::size_t j = 1; j < epsilons.size(); ++j) {
    if (!(epsilons[j] < epsilons[j - 1])) throw DomainError("strong_error_sweep: epsilons must be decreasing");
  }
  if (replications < 2) throw DomainError("strong_error_sweep: need at least 2 replications");
  const TamedLayout lay = TamedLayout::make(t, epsilons, fine_steps);
  const std::size_t levels = epsilons.size();
  struct Partial {
    std::vector<Aggregate> sq;
    std::vector<std::size_t> blown;
  };
  auto partials = run_blocks(replications, exec, [&](std::size_t begin, std::size_t end) {
    Partial p{std::vector<Aggregate>(levels), std::vector<std::size_t>(levels, 0)};
    ScalarCoefficients coef(model);
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(SeedSpec{seed, r});
      const TamedSample s = tamed_replication(coef, x0, lay, ell, rng);
      for (std::size_t j = 0; j < levels; ++j) {
        const double diff = s.reference - s.tamed[j];
        if (s.blown_up || !std::isfinite(diff)) {
          ++p.blown[j];
        } else {
          p.sq[j].push(diff * diff);
        }
      }
    }
    return p;
  });
  StrongErrorSweep out;
  out.fine_h = lay.fine_h;
  std::vector<Aggregate> total(levels);
  std::vector<std::size_t> blown(levels, 0);
  for (const auto& p : partials) {
    for (std::size_t j = 0; j < levels; ++j) {
      total[j].merge(p.sq[j]);
      blown[j] += p.blown[j];
    }
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t j = 0; j < levels; ++j) {
    StrongErrorRow row{epsilons[j], total[j].mean(), total[j].stderr_or_zero(), total[j].count(), blown[j]};
    if (row.mean_square_error > 0.0) {
      lx.push_back(std::log(row.epsilon));
      ly.push_back(std::log(row.mean_square_error));
    }
    out.rows.push_back(row);
  }
  if (lx.size() >= 2) out.slope = ols_slope(lx, ly);
  return out;
}

}  // namespace pathdrift
