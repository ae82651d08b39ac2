#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "pathdrift/errors.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/model.hpp"
#include "pathdrift/path.hpp"
#include "pathdrift/quadrature.hpp"
#include "pathdrift/rng.hpp"
#include "pathdrift/schemes.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

/// Running log of Z_t(q) = exp(sum q mu . dW - 1/2 sum |q mu|^2 dt).
struct GirsanovAccumulator {
  double log_weight = 0.0;
  double q = 1.0;
  std::size_t steps = 0;

  void push(ConstVectorRef mu, ConstVectorRef dw, double dt) {
    log_weight += q * mu.dot(dw) - 0.5 * q * q * mu.squaredNorm() * dt;
    ++steps;
  }
  [[nodiscard]] double weight() const { return std::exp(log_weight); }
};

namespace detail {

// mu = sigma^{-1} b, with a singularity check.
inline void solve_sigma(const Matrix& sigma, ConstVectorRef b, VectorRef mu, std::size_t node) {
  if (sigma.rows() == 1) {
    if (sigma(0, 0) == 0.0 || !std::isfinite(sigma(0, 0))) {
      throw NumericError("girsanov: singular diffusion at node " + std::to_string(node));
    }
    mu[0] = b[0] / sigma(0, 0);
    return;
  }
  Eigen::FullPivLU<Matrix> lu(sigma);
  if (!lu.isInvertible()) throw NumericError("girsanov: singular diffusion at node " + std::to_string(node));
  mu = lu.solve(b);
}

}  // namespace detail

/// Z_t(q) along a driftless path Y (states and increments of one simulation).
inline double girsanov_weight(const PathDependentModel& model, const DiscretePath& path, double q) {
  if (!path.has_increments()) throw DomainError("girsanov_weight: path carries no increments");
  if (path.dim() != model.dim) throw DomainError("girsanov_weight: path dimension mismatch");
  if (q == 0.0 || model.drift.is_zero()) return 1.0;
  const auto d = static_cast<Eigen::Index>(model.dim);
  DriftEvaluator ev(model.drift, model.dim, path.grid());
  Vector b(d);
  Vector mu(d);
  Matrix sigma(d, d);
  GirsanovAccumulator acc{0.0, q, 0};
  for (std::size_t k = 0; k < path.steps(); ++k) {
    ev.eval(k, path.flat_states(), b);
    model.diffusion.eval(path.time(k), path.state(k), sigma);
    detail::solve_sigma(sigma, b, mu, k);
    acc.push(mu, path.increment(k), path.time(k + 1) - path.time(k));
  }
  return acc.weight();
}

/// Simulates the driftless process Y^{0,x} on a grid and accumulates
/// log Z_t(q) on the fly. Exact for constant sigma; Euler otherwise.
class WeightedDriftlessSampler {
 public:
  WeightedDriftlessSampler(const PathDependentModel& model, std::span<const double> grid, double q = 1.0)
      : model_(&model), grid_(grid), q_(q) {
    validate_grid(grid);
    const auto d = static_cast<Eigen::Index>(model.dim);
    states_.resize(grid.size() * model.dim);
    b_.resize(d);
    mu_.resize(d);
    dw_.resize(d);
    sigma_.resize(d, d);
    if (model.diffusion.is_constant()) {
      sigma_ = model.diffusion.constant_matrix();
      Eigen::FullPivLU<Matrix> lu(sigma_);
      if (!lu.isInvertible()) throw NumericError("girsanov: singular diffusion matrix");
      sigma_inv_ = lu.inverse();
    }
  }

  /// Returns log Z_t(q); terminal() then holds Y_t.
  double sample(ConstVectorRef x, Rng& rng) {
    const std::size_t d = model_->dim;
    for (std::size_t i = 0; i < d; ++i) states_[i] = x[static_cast<Eigen::Index>(i)];
    const bool weighted = q_ != 0.0 && !model_->drift.is_zero();
    std::optional<DriftEvaluator> ev;
    if (weighted) ev.emplace(model_->drift, d, grid_);
    GirsanovAccumulator acc{0.0, q_, 0};
    const bool constant = sigma_inv_.size() > 0;
    for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
      const double dt = grid_[k + 1] - grid_[k];
      const double sd = std::sqrt(dt);
      for (std::size_t i = 0; i < d; ++i) dw_[static_cast<Eigen::Index>(i)] = sd * rng.normal();
      Eigen::Map<const Vector> yk(states_.data() + k * d, static_cast<Eigen::Index>(d));
      Eigen::Map<Vector> yn(states_.data() + (k + 1) * d, static_cast<Eigen::Index>(d));
      if (!constant) model_->diffusion.eval(grid_[k], yk, sigma_);
      if (weighted) {
        ev->eval(k, states_, b_);
        if (constant) {
          mu_.noalias() = sigma_inv_ * b_;
        } else {
          detail::solve_sigma(sigma_, b_, mu_, k);
        }
        acc.push(mu_, dw_, dt);
      }
      yn.noalias() = sigma_ * dw_;  // no heap temporary
      yn = yk + yn;
      if (!yn.allFinite()) throw NumericError("girsanov: non-finite driftless state at step " + std::to_string(k + 1));
    }
    if (!std::isfinite(acc.log_weight)) throw NumericError("girsanov: non-finite weight");
    return acc.log_weight;
  }

  [[nodiscard]] Eigen::Map<const Vector> terminal() const {
    return {states_.data() + (grid_.size() - 1) * model_->dim, static_cast<Eigen::Index>(model_->dim)};
  }

 private:
  const PathDependentModel* model_;
  std::span<const double> grid_;
  double q_;
  std::vector<double> states_;
  Vector b_;
  Vector mu_;
  Vector dw_;
  Matrix sigma_;
  Matrix sigma_inv_;
};

struct MartingaleCheck {
  Estimate estimate;
  bool pass = false;  // |mean - 1| <= 3 SE
};

/// Monte Carlo E[Z_t(1)] with `steps` uniform steps; sample i uses stream i.
inline MartingaleCheck martingale_check(const PathDependentModel& model, ConstVectorRef x, double t,
                                        std::size_t steps, std::size_t samples, std::uint64_t seed,
                                        const ExecPolicy& exec = {}) {
  if (samples == 0) throw DomainError("martingale_check: need samples");
  if (model.drift.is_zero()) return {{1.0, 0.0, samples}, true};
  const TimeGrid grid = uniform_grid(t, steps);
  auto parts = run_blocks(samples, exec, [&](std::size_t begin, std::size_t end) {
    WeightedDriftlessSampler sampler(model, grid);
    Aggregate a;
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      a.push(std::exp(sampler.sample(x, rng)));
    }
    return a;
  });
  Aggregate total;
  for (const auto& p : parts) total.merge(p);
  const Estimate e = summarize(total);
  return {e, std::abs(e.mean - 1.0) <= 3.0 * e.stderr_};
}

/// Monte Carlo E[Z_t(1)^r], for dominance checks against z_moment_bound.
inline Estimate z_moment_mc(const PathDependentModel& model, ConstVectorRef x, double t, double r,
                            std::size_t steps, std::size_t samples, std::uint64_t seed, const ExecPolicy& exec = {}) {
  const TimeGrid grid = uniform_grid(t, steps);
  auto parts = run_blocks(samples, exec, [&](std::size_t begin, std::size_t end) {
    WeightedDriftlessSampler sampler(model, grid);
    Aggregate a;
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      a.push(std::exp(r * sampler.sample(x, rng)));
    }
    return a;
  });
  Aggregate total;
  for (const auto& p : parts) total.merge(p);
  return summarize(total);
}

// ---------------------------------------------------------------------------
// Analytic thresholds and bounds
// ---------------------------------------------------------------------------

/// Coarsest uniform partition of [0, T] whose mesh is at most
/// 1 / (2 a_lower |q K|^2 c_hat_plus T).
inline std::vector<double> novikov_partition(double horizon, double q, double k, double a_lower,
                                             double c_hat_plus) {
  if (!(horizon > 0.0 && k > 0.0 && a_lower > 0.0 && c_hat_plus > 0.0) || q == 0.0) {
    throw DomainError("novikov_partition: constants must be positive");
  }
  const double qk = std::abs(q) * k;
  const double bound = 1.0 / (2.0 * a_lower * qk * qk * c_hat_plus * horizon);
  if (bound >= horizon) return {0.0, horizon};
  // Guard against ceil rounding up an exact ratio.
  const double ratio = horizon / bound;
  auto n = static_cast<std::size_t>(std::ceil(ratio * (1.0 - 1e-14)));
  if (horizon / static_cast<double>(n) > bound) ++n;
  return uniform_grid(horizon, n);
}

/// t_r = min{T, 1 / (2 K sqrt(3 a_lower (2r^2 - r) c_hat_plus))}; T when 2r^2 - r <= 0.
inline double t_threshold(double r, double k, double a_lower, double c_hat_plus, double horizon) {
  if (!(k > 0.0 && a_lower > 0.0 && c_hat_plus > 0.0 && horizon > 0.0)) {
    throw DomainError("t_threshold: constants must be positive");
  }
  const double e = 2.0 * r * r - r;
  if (e <= 0.0) return horizon;
  return std::min(horizon, 1.0 / (2.0 * k * std::sqrt(3.0 * a_lower * e * c_hat_plus)));
}

struct ZMomentInputs {
  double r = 1.0;
  double t = 1.0;
  double x_norm = 0.0;
  std::size_t dim = 1;
  double k = 1.0;
  double a_lower = 1.0;
  double c_hat_plus = 1.0;
  double C_hat_plus = 1.0;
  double horizon = 1.0;
  std::function<double(double)> k_of_delta;  // needed only when t > t_r
};

/// Upper bound on sup_{s <= t} E[Z_s(1)^r], three cases by sign of 2r^2 - r and t vs t_r.
inline double z_moment_bound(const ZMomentInputs& in) {
  const double e = 2.0 * in.r * in.r - in.r;
  if (e <= 0.0) return 1.0;
  const double d = static_cast<double>(in.dim);
  const double tr = t_threshold(in.r, in.k, in.a_lower, in.c_hat_plus, in.horizon);
  const double x2 = in.x_norm * in.x_norm;
  if (in.t <= tr) {
    return std::pow(2.0, 1.0 + d / 4.0) * in.C_hat_plus *
           std::exp(1.5 * in.k * in.k * in.a_lower * e * in.t * (1.0 + x2));
  }
  if (!in.k_of_delta) throw DomainError("z_moment_bound: t > t_r requires a sublinear growth table");
  const double delta = 1.0 / (2.0 * in.horizon * std::sqrt(3.0 * in.c_hat_plus * in.a_lower * e));
  const double kd = in.k_of_delta(delta);
  return std::pow(2.0, 1.0 + d / 4.0) * std::pow(in.horizon / tr, d / 4.0) * std::sqrt(in.C_hat_plus) *
         std::exp(1.5 * in.a_lower * e * kd * kd * in.t) * std::exp(x2 / (8.0 * in.c_hat_plus * in.horizon));
}

// ---------------------------------------------------------------------------
// Density estimators
// ---------------------------------------------------------------------------

struct DensityEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
  std::string method;  // girsanov-kernel, first-order, unbiased, em-kernel
  std::optional<double> bandwidth;
  SeedSpec seed;
};

/// Silverman-order default bandwidth (t / N)^{1/(d+4)}.
inline double default_bandwidth(double t, std::size_t samples, std::size_t dim) {
  return std::pow(t / static_cast<double>(samples), 1.0 / (static_cast<double>(dim) + 4.0));
}

/// Product Gaussian kernel K_h(v).
inline double product_kernel(ConstVectorRef v, double h) {
  const double d = static_cast<double>(v.size());
  return std::exp(-0.5 * v.squaredNorm() / (h * h) - d * std::log(h * std::sqrt(2.0 * std::numbers::pi)));
}

struct KernelOptions {
  std::size_t steps = 64;  // driftless grid steps on [0, t]
  ExecPolicy exec;
};

/// (1/N) sum K_h(Y_t - y_j) Z_t(1) for several targets y_j on the same samples.
inline std::vector<DensityEstimate> density_girsanov_kernel_multi(const PathDependentModel& model, ConstVectorRef x,
                                                                  std::span<const Vector> ys, double t, double h,
                                                                  std::size_t samples, std::uint64_t seed,
                                                                  const KernelOptions& opt = {}) {
  if (!(h > 0.0)) throw DomainError("density_girsanov_kernel: bandwidth must be positive");
  if (!(t > 0.0)) throw DomainError("density_girsanov_kernel: t must be positive");
  if (samples < 2) throw DomainError("density_girsanov_kernel: need at least 2 samples");
  for (const auto& y : ys) {
    if (static_cast<std::size_t>(y.size()) != model.dim) throw DomainError("density_girsanov_kernel: y has wrong dimension");
  }
  const TimeGrid grid = uniform_grid(t, opt.steps);
  const std::size_t ny = ys.size();
  auto parts = run_blocks(samples, opt.exec, [&](std::size_t begin, std::size_t end) {
    WeightedDriftlessSampler sampler(model, grid);
    std::vector<Aggregate> acc(ny);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      const double lw = sampler.sample(x, rng);
      const auto yt = sampler.terminal();
      for (std::size_t j = 0; j < ny; ++j) acc[j].push(product_kernel(yt - ys[j], h) * std::exp(lw));
    }
    return acc;
  });
  std::vector<Aggregate> total(ny);
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < ny; ++j) total[j].merge(p[j]);
  }
  std::vector<DensityEstimate> out;
  out.reserve(ny);
  for (std::size_t j = 0; j < ny; ++j) {
    out.push_back({total[j].mean(), total[j].stderr_or_zero(), total[j].count(), "girsanov-kernel", h, {seed, 0}});
  }
  return out;
}

inline DensityEstimate density_girsanov_kernel(const PathDependentModel& model, ConstVectorRef x, ConstVectorRef y,
                                               double t, double h, std::size_t samples, std::uint64_t seed,
                                               const KernelOptions& opt = {}) {
  const std::vector<Vector> ys{Vector(y)};
  return density_girsanov_kernel_multi(model, x, ys, t, h, samples, seed, opt).front();
}

struct FirstOrderOptions {
  std::size_t quad_nodes = 32;
  std::size_t steps = 64;  // uniform Euler steps merged with the quadrature times
  ExecPolicy exec;
};

/// g_{ta}(x, y) + int_0^t E[<grad_x g_{(t-s)a}(X_s, y), b(s, X)>] ds for
/// constant sigma. The time integral uses s = t(1 - u^2) and Gauss-Legendre
/// in u on [0, 1], which removes the (t - s)^{-1/2} endpoint singularity.
inline DensityEstimate density_first_order(const PathDependentModel& model, ConstVectorRef x, ConstVectorRef y,
                                           double t, std::size_t samples, std::uint64_t seed,
                                           const FirstOrderOptions& opt = {}) {
  if (!model.diffusion_constant()) throw UnsupportedError("density_first_order: requires constant diffusion");
  if (!(t > 0.0)) throw DomainError("density_first_order: t must be positive");
  const Matrix& sigma = model.diffusion.constant_matrix();
  const Matrix a = sigma * sigma.transpose();
  const double leading = gaussian_density(SpdMatrix(t * a), x, y);
  if (model.drift.is_zero()) return {leading, 0.0, samples, "first-order", std::nullopt, {seed, 0}};
  if (samples < 2) throw DomainError("density_first_order: need at least 2 samples");

  const QuadratureRule rule = gauss_legendre(opt.quad_nodes, 0.0, 1.0);
  // Simulation grid: uniform nodes plus every quadrature time.
  TimeGrid grid = uniform_grid(t, opt.steps);
  std::vector<double> s_nodes;
  for (double u : rule.nodes) s_nodes.push_back(t * (1.0 - u * u));
  grid.insert(grid.end(), s_nodes.begin(), s_nodes.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(), [](double l, double r) { return std::abs(l - r) < 1e-14; }),
             grid.end());
  grid.back() = t;
  struct Node {
    std::size_t index;
    double weight;  // quadrature weight times ds/du
    SpdMatrix cov;
  };
  std::vector<Node> nodes;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double u = rule.nodes[j];
    const std::size_t idx = node_at_or_before(grid, s_nodes[j] + 1e-15);
    nodes.push_back({idx, rule.weights[j] * 2.0 * t * u, SpdMatrix(t * u * u * a)});
  }
  const auto d = static_cast<Eigen::Index>(model.dim);

  auto parts = run_blocks(samples, opt.exec, [&](std::size_t begin, std::size_t end) {
    EulerSimulator sim(model, grid);
    sim.record_drift(true);
    Aggregate acc;
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      sim.simulate(x, rng);
      double sum = 0.0;
      for (const auto& nd : nodes) {
        const auto xs = sim.state(nd.index);
        const Eigen::Map<const Vector> b(sim.drift_values().data() + nd.index * model.dim, d);
        const Vector diff = y - xs;
        // grad_x g_A(x, y) = A^{-1}(y - x) g_A(x, y)
        const double g = gaussian_density(nd.cov, xs, y);
        sum += nd.weight * g * nd.cov.solve(diff).dot(b);
      }
      acc.push(sum);
    }
    return acc;
  });
  Aggregate total;
  for (const auto& p : parts) total.merge(p);
  return {leading + total.mean(), total.stderr_or_zero(), total.count(), "first-order", std::nullopt, {seed, 0}};
}

// ---------------------------------------------------------------------------
// Hoelder modulus diagnostic
// ---------------------------------------------------------------------------

/// max over pairs of |p(y) - p(y')| / |y - y'|^gamma.
inline double holder_modulus_diagnostic(std::span<const Vector> ys, std::span<const double> values, double gamma) {
  if (ys.size() != values.size()) throw DomainError("holder_modulus_diagnostic: size mismatch");
  if (ys.size() < 2) throw DomainError("holder_modulus_diagnostic: need at least 2 points");
  double best = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    for (std::size_t j = i + 1; j < ys.size(); ++j) {
      const double dist = (ys[i] - ys[j]).norm();
      if (dist == 0.0) throw DomainError("holder_modulus_diagnostic: repeated point");
      best = std::max(best, std::abs(values[i] - values[j]) / std::pow(dist, gamma));
    }
  }
  return best;
}

inline double holder_modulus_diagnostic(std::span<const Vector> ys, std::span<const DensityEstimate> est,
                                        double gamma) {
  std::vector<double> v;
  v.reserve(est.size());
  for (const auto& e : est) v.push_back(e.value);
  return holder_modulus_diagnostic(ys, v, gamma);
}

/// Quotients rescaled by t^{gamma/2}; comparable values across t indicate
/// the |y - y'|^gamma / t^{gamma/2} scaling.
struct HolderScaling {
  double scaled_first = 0.0;
  double scaled_second = 0.0;
  double ratio = 0.0;  // scaled_second / scaled_first
};

inline HolderScaling holder_scaling(double quotient_t1, double t1, double quotient_t2, double t2, double gamma) {
  if (!(t1 > 0.0 && t2 > 0.0)) throw DomainError("holder_scaling: times must be positive");
  HolderScaling s;
  s.scaled_first = quotient_t1 * std::pow(t1, 0.5 * gamma);
  s.scaled_second = quotient_t2 * std::pow(t2, 0.5 * gamma);
  s.ratio = s.scaled_first > 0.0 ? s.scaled_second / s.scaled_first : std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace pathdrift
