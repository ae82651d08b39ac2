#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <type_traits>
#include <variant>
#include <vector>

#include "pathdrift/errors.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/path.hpp"

namespace pathdrift {

// ---------------------------------------------------------------------------
// Path functionals A_t(w) = (t, w_t, max zeta, delayed values, int c ds)
// ---------------------------------------------------------------------------

/// zeta(s, x) = scale * |x|^gamma (Euclidean norm).
struct ZetaSpec {
  double scale = 1.0;
  double gamma = 1.0;

  [[nodiscard]] double operator()(double /*s*/, ConstVectorRef x) const {
    return scale * std::pow(x.norm(), gamma);
  }
};

/// c(s, x)_i = scale * sgn(x_i) |x_i|^gamma, so the running integral lives in R^d.
struct IntegrandSpec {
  double scale = 1.0;
  double gamma = 1.0;

  void operator()(double /*s*/, ConstVectorRef x, VectorRef out) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x[i];
      out[i] = scale * std::copysign(std::pow(std::abs(v), gamma), v);
    }
  }
};

struct DelayTerm {
  double tau = 0.0;    // delay, > 0
  double theta = 0.0;  // weight, >= 0
};

/// Affine readout nu(chi) of a functional state, optionally saturated:
///   L = offset + time*t + state*w + max*z + delay*sum_i theta_i u_i + integral*v
///   nu = saturate > 0 ? saturate * tanh(L / saturate) : L   (componentwise)
struct NuSpec {
  double offset = 0.0;
  double time = 0.0;
  double state = 0.0;
  double max = 0.0;
  double delay = 0.0;
  double integral = 0.0;
  double saturate = 0.0;
};

struct FunctionalSpec {
  ZetaSpec zeta;
  std::vector<DelayTerm> delays;  // stored truncation, i = 1..m_max
  double tail_beyond = 0.0;       // analytic sum of theta_i for i > m_max
  IntegrandSpec integrand;
  NuSpec nu;
  double beta = 1.0;   // Hoelder exponent of nu
  double gamma = 1.0;  // Hoelder exponent of zeta and c

  /// sum_{i > m} theta_i.
  [[nodiscard]] double tail_mass(std::size_t m) const {
    double tail = tail_beyond;
    for (std::size_t i = m; i < delays.size(); ++i) tail += delays[i].theta;
    return tail;
  }

  void validate() const {
    for (const auto& d : delays) {
      if (!(d.tau > 0.0)) throw DomainError("functional: delays must be positive");
      if (!(d.theta >= 0.0)) throw DomainError("functional: delay weights must be >= 0");
    }
    if (!(tail_beyond >= 0.0) || !std::isfinite(tail_beyond)) {
      throw DomainError("functional: tail mass must be finite and >= 0");
    }
    if (!(beta > 0.0 && beta <= 1.0) || !(gamma > 0.0 && gamma <= 1.0)) {
      throw DomainError("functional: Hoelder exponents must lie in (0, 1]");
    }
  }
};

struct FunctionalState {
  double t = 0.0;
  Vector w;
  double running_max = 0.0;
  std::vector<Vector> delayed;
  Vector integral;
};

/// nu(chi) for a functional state. Delay slots at index >= m contribute 0.
inline void evaluate_nu(const FunctionalSpec& spec, double t, ConstVectorRef w, double running_max,
                        std::span<const Vector> delayed, ConstVectorRef integral, std::size_t m,
                        VectorRef out) {
  const NuSpec& nu = spec.nu;
  out = nu.state * w + nu.integral * integral;
  out.array() += nu.offset + nu.time * t + nu.max * running_max;
  if (nu.delay != 0.0) {
    const std::size_t active = std::min(m, delayed.size());
    for (std::size_t i = 0; i < active; ++i) out += (nu.delay * spec.delays[i].theta) * delayed[i];
  }
  if (nu.saturate > 0.0) {
    out = nu.saturate * (out.array() / nu.saturate).tanh();
  }
}

/// A_t(w) from the path nodes at or before t: discrete running max over
/// nodes, left-endpoint rule for the integral, delayed values read at the
/// largest node <= t - tau_i (w_0 when t <= tau_i).
inline FunctionalState functional_state(const FunctionalSpec& spec, const DiscretePath& path, double t) {
  if (path.size() == 0) throw DomainError("functional_state: empty path");
  if (t < 0.0 || t > path.horizon() * (1.0 + 1e-12)) {
    throw DomainError("functional_state: t outside path horizon");
  }
  const std::size_t d = path.dim();
  const std::size_t last = path.node_at_or_before(t);
  FunctionalState st;
  st.t = t;
  st.w = path.state(last);
  st.running_max = 0.0;
  st.integral = Vector::Zero(static_cast<Eigen::Index>(d));
  Vector c(static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k <= last; ++k) {
    st.running_max = std::max(st.running_max, spec.zeta(path.time(k), path.state(k)));
    const double right = (k < last) ? path.time(k + 1) : t;
    if (right > path.time(k)) {
      spec.integrand(path.time(k), path.state(k), c);
      st.integral += (right - path.time(k)) * c;
    }
  }
  st.delayed.reserve(spec.delays.size());
  for (const auto& delay : spec.delays) {
    const double lagged = t > delay.tau ? t - delay.tau : 0.0;
    st.delayed.emplace_back(path.state(path.node_at_or_before(lagged)));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Drift combinators
// ---------------------------------------------------------------------------

struct ZeroDrift {};
struct ConstantDrift {
  Vector value;
};
/// b(x) = matrix * x + offset. The OU drift -kappa x is matrix = -kappa I.
struct LinearDrift {
  Matrix matrix;
  Vector offset;
};
/// b_i(x) = scale * tanh(x_i); bounded by |scale| componentwise.
struct TanhDrift {
  double scale = 1.0;
};
/// b_i(x) = beta_i sgn(alpha_i - x_i).
struct BangBangDrift {
  Vector alpha;
  Vector beta;
};
/// One-dimensional b(x) = lambda x (mu - |x|).
struct Heston32Drift {
  double lambda = 1.0;
  double mu = 1.0;
};
/// b(t, w) = nu(A_t(w)).
struct FunctionalDrift {
  FunctionalSpec spec;
};

class Drift;
struct SumDrift {
  std::vector<Drift> terms;
};

class Drift {
 public:
  using Kind = std::variant<ZeroDrift, ConstantDrift, LinearDrift, TanhDrift, BangBangDrift,
                            Heston32Drift, FunctionalDrift, SumDrift>;

  Drift() : kind_(ZeroDrift{}) {}
  Drift(Kind kind, double scale = 1.0) : kind_(std::move(kind)), scale_(scale) {}  // NOLINT
  template <class T>
    requires std::is_constructible_v<Kind, T&&> && (!std::is_same_v<std::remove_cvref_t<T>, Kind>) &&
             (!std::is_same_v<std::remove_cvref_t<T>, Drift>)
  Drift(T&& alt, double scale = 1.0) : kind_(std::forward<T>(alt)), scale_(scale) {}  // NOLINT

  [[nodiscard]] const Kind& kind() const { return kind_; }
  [[nodiscard]] double scale() const { return scale_; }

  /// Same drift multiplied by q.
  [[nodiscard]] Drift scaled(double q) const { return Drift(kind_, scale_ * q); }

  [[nodiscard]] bool is_zero() const {
    return scale_ == 0.0 || std::holds_alternative<ZeroDrift>(kind_);
  }

  /// True when b(t, w) depends on w only through w_t (and not on t).
  [[nodiscard]] bool is_markov() const {
    return std::visit(
        [](const auto& k) -> bool {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, FunctionalDrift>) {
            return false;
          } else if constexpr (std::is_same_v<K, SumDrift>) {
            return std::all_of(k.terms.begin(), k.terms.end(),
                               [](const Drift& d) { return d.is_markov(); });
          } else {
            return true;
          }
        },
        kind_);
  }

  [[nodiscard]] bool is_superlinear() const {
    if (std::holds_alternative<Heston32Drift>(kind_)) return true;
    if (const auto* sum = std::get_if<SumDrift>(&kind_)) {
      return std::any_of(sum->terms.begin(), sum->terms.end(),
                         [](const Drift& d) { return d.is_superlinear(); });
    }
    return false;
  }

  /// Markov evaluation b(x). Throws UnsupportedError for path functionals.
  void eval_state(ConstVectorRef x, VectorRef out) const {
    std::visit([&](const auto& k) { eval_state_impl(k, x, out); }, kind_);
    if (scale_ != 1.0) out *= scale_;
  }

  [[nodiscard]] Vector eval_state(ConstVectorRef x) const {
    Vector out(x.size());
    eval_state(x, out);
    return out;
  }

 private:
  static void eval_state_impl(const ZeroDrift&, ConstVectorRef, VectorRef out) { out.setZero(); }
  static void eval_state_impl(const ConstantDrift& k, ConstVectorRef x, VectorRef out) {
    if (k.value.size() != x.size()) throw DomainError("constant drift: dimension mismatch");
    out = k.value;
  }
  static void eval_state_impl(const LinearDrift& k, ConstVectorRef x, VectorRef out) {
    if (k.matrix.cols() != x.size()) throw DomainError("linear drift: dimension mismatch");
    out.noalias() = k.matrix * x;
    out += k.offset;
  }
  static void eval_state_impl(const TanhDrift& k, ConstVectorRef x, VectorRef out) {
    out = k.scale * x.array().tanh();
  }
  static void eval_state_impl(const BangBangDrift& k, ConstVectorRef x, VectorRef out) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double gap = k.alpha[i] - x[i];
      out[i] = gap > 0.0 ? k.beta[i] : (gap < 0.0 ? -k.beta[i] : 0.0);
    }
  }
  static void eval_state_impl(const Heston32Drift& k, ConstVectorRef x, VectorRef out) {
    if (x.size() != 1) throw DomainError("Heston-3/2 drift is one-dimensional");
    out[0] = k.lambda * x[0] * (k.mu - std::abs(x[0]));
  }
  static void eval_state_impl(const FunctionalDrift&, ConstVectorRef, VectorRef) {
    throw UnsupportedError("path functional drift has no Markov evaluation");
  }
  static void eval_state_impl(const SumDrift& k, ConstVectorRef x, VectorRef out) {
    out.setZero();
    Vector tmp(x.size());
    for (const auto& term : k.terms) {
      term.eval_state(x, tmp);
      out += tmp;
    }
  }

  Kind kind_;
  double scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Diffusion fields
// ---------------------------------------------------------------------------

struct ConstantDiffusion {
  Matrix sigma;
};
/// sigma = diag(base + slope * x_i).
struct AffineDiffusion {
  double base = 1.0;
  double slope = 0.0;
};
/// sigma = diag(base + amplitude * sin(x_i)).
struct SineDiffusion {
  double base = 1.0;
  double amplitude = 0.0;
};
/// One-dimensional sigma(x) = xi |x|^power.
struct PowerDiffusion {
  double xi = 1.0;
  double power = 1.5;
};

/// |x|^p with cheap paths for the half-integer powers used by the builtins.
inline double abs_power(double x, double p) {
  const double a = std::abs(x);
  if (p == 1.5) return a * std::sqrt(a);
  if (p == 1.0) return a;
  if (p == 0.5) return std::sqrt(a);
  if (p == 2.0) return a * a;
  return std::pow(a, p);
}

class Diffusion {
 public:
  using Kind = std::variant<ConstantDiffusion, AffineDiffusion, SineDiffusion, PowerDiffusion>;

  Diffusion() : kind_(ConstantDiffusion{Matrix::Identity(1, 1)}) {}
  Diffusion(Kind kind) : kind_(std::move(kind)) {}  // NOLINT
  template <class T>
    requires std::is_constructible_v<Kind, T&&> && (!std::is_same_v<std::remove_cvref_t<T>, Kind>) &&
             (!std::is_same_v<std::remove_cvref_t<T>, Diffusion>)
  Diffusion(T&& alt) : kind_(std::forward<T>(alt)) {}  // NOLINT

  [[nodiscard]] const Kind& kind() const { return kind_; }
  [[nodiscard]] bool is_constant() const { return std::holds_alternative<ConstantDiffusion>(kind_); }

  /// Constant matrix; only valid when is_constant().
  [[nodiscard]] const Matrix& constant_matrix() const {
    if (!is_constant()) throw UnsupportedError("diffusion is not constant");
    return std::get<ConstantDiffusion>(kind_).sigma;
  }

  void eval(double /*t*/, ConstVectorRef x, Eigen::Ref<Matrix> out) const {
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ConstantDiffusion>) {
            out = k.sigma;
          } else if constexpr (std::is_same_v<K, AffineDiffusion>) {
            out.setZero();
            for (Eigen::Index i = 0; i < x.size(); ++i) out(i, i) = k.base + k.slope * x[i];
          } else if constexpr (std::is_same_v<K, SineDiffusion>) {
            out.setZero();
            for (Eigen::Index i = 0; i < x.size(); ++i) out(i, i) = k.base + k.amplitude * std::sin(x[i]);
          } else {
            if (x.size() != 1) throw DomainError("power diffusion is one-dimensional");
            out(0, 0) = k.xi * abs_power(x[0], k.power);
          }
        },
        kind_);
  }

  [[nodiscard]] Matrix eval(double t, ConstVectorRef x) const {
    Matrix out(x.size(), x.size());
    eval(t, x, out);
    return out;
  }

  /// a = sigma sigma^T.
  [[nodiscard]] Matrix covariance(double t, ConstVectorRef x) const {
    const Matrix s = eval(t, x);
    return s * s.transpose();
  }

 private:
  Kind kind_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct SublinearEntry {
  double delta = 0.0;
  double k_delta = 0.0;
};

struct GrowthSpec {
  double linear_k = 0.0;              // K(b, T)
  std::optional<double> bound;        // ||b||_inf when bounded
  std::vector<SublinearEntry> table;  // delta -> K(delta)

  /// K(delta) from the table: uses the largest tabulated delta' <= delta,
  /// which is a valid (possibly loose) constant for delta.
  [[nodiscard]] double k_of_delta(double delta) const {
    const SublinearEntry* best = nullptr;
    for (const auto& e : table) {
      if (e.delta <= delta && (best == nullptr || e.delta > best->delta)) best = &e;
    }
    if (best == nullptr) throw DomainError("no sublinear growth constant tabulated for this delta");
    return best->k_delta;
  }
};

struct Ellipticity {
  double lower = 1.0;
  double upper = 1.0;
};

struct HolderSpec {
  double alpha = 1.0;
  double norm = 0.0;
};

struct PathDependentModel {
  std::size_t dim = 1;
  Drift drift;
  Diffusion diffusion;
  GrowthSpec growth;
  Ellipticity ellipticity;
  HolderSpec holder;

  [[nodiscard]] bool diffusion_constant() const { return diffusion.is_constant(); }

  /// Structural checks: dimensions, constant ranges and, for constant sigma,
  /// the eigenvalues of sigma sigma^T against the declared ellipticity pair.
  void validate() const {
    if (dim == 0) throw DomainError("model: dim must be positive");
    if (!(ellipticity.lower > 0.0) || ellipticity.lower > ellipticity.upper) {
      throw DomainError("model: ellipticity requires 0 < lower <= upper");
    }
    if (!(holder.alpha > 0.0 && holder.alpha <= 1.0)) throw DomainError("model: holder alpha must be in (0, 1]");
    if (!(growth.linear_k >= 0.0)) throw DomainError("model: growth K must be >= 0");
    if (growth.bound && !(*growth.bound >= 0.0)) throw DomainError("model: drift bound must be >= 0");
    check_drift_dims(drift);
    if (const auto* c = std::get_if<ConstantDiffusion>(&diffusion.kind())) {
      if (c->sigma.rows() != static_cast<Eigen::Index>(dim) || c->sigma.cols() != static_cast<Eigen::Index>(dim)) {
        throw DomainError("model: diffusion matrix must be dim x dim");
      }
      const Matrix a = c->sigma * c->sigma.transpose();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
      const double tol = 1e-9 * std::max(1.0, ellipticity.upper);
      if (eig.eigenvalues().minCoeff() < ellipticity.lower - tol ||
          eig.eigenvalues().maxCoeff() > ellipticity.upper + tol) {
        throw DomainError("model: eigenvalues of sigma sigma^T outside declared ellipticity");
      }
    }
    if (std::holds_alternative<PowerDiffusion>(diffusion.kind()) && dim != 1) {
      throw DomainError("model: power diffusion requires dim = 1");
    }
  }

 private:
  void check_drift_dims(const Drift& d) const {
    const auto n = static_cast<Eigen::Index>(dim);
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ConstantDrift>) {
            if (k.value.size() != n) throw DomainError("model: constant drift has wrong dimension");
          } else if constexpr (std::is_same_v<K, LinearDrift>) {
            if (k.matrix.rows() != n || k.matrix.cols() != n || k.offset.size() != n) {
              throw DomainError("model: linear drift has wrong dimension");
            }
          } else if constexpr (std::is_same_v<K, BangBangDrift>) {
            if (k.alpha.size() != n || k.beta.size() != n) throw DomainError("model: bang-bang drift has wrong dimension");
          } else if constexpr (std::is_same_v<K, Heston32Drift>) {
            if (n != 1) throw DomainError("model: Heston-3/2 drift requires dim = 1");
          } else if constexpr (std::is_same_v<K, FunctionalDrift>) {
            k.spec.validate();
          } else if constexpr (std::is_same_v<K, SumDrift>) {
            for (const auto& term : k.terms) check_drift_dims(term);
          }
        },
        d.kind());
  }
};

// ---------------------------------------------------------------------------
// Incremental drift evaluation along a path being built
// ---------------------------------------------------------------------------

/// How the functional A is read off the simulation grid.
///  - levels == 0: A on the simulation grid itself (the reference functional).
///  - levels == n: A^(n,m) with eta_n flooring; the simulation grid must be
///    uniform with a step count divisible by n.
/// Delay slots with index >= truncation are replaced by 0.
struct Discretization {
  std::size_t levels = 0;
  std::size_t truncation = std::numeric_limits<std::size_t>::max();
};

/// Evaluates b(t_k, path up to t_k) for k = 0, 1, 2, ... in order, updating
/// running maxima and integrals incrementally (O(#delays) per node).
class DriftEvaluator {
 public:
  DriftEvaluator(const Drift& drift, std::size_t dim, std::span<const double> grid,
                 Discretization disc = {})
      : drift_(&drift), dim_(dim), grid_(grid), disc_(disc) {
    if (const auto* f = std::get_if<FunctionalDrift>(&drift.kind())) {
      tracker_.emplace(f->spec, dim, grid, disc);
    } else if (const auto* s = std::get_if<SumDrift>(&drift.kind())) {
      children_.reserve(s->terms.size());
      for (const auto& term : s->terms) children_.emplace_back(term, dim, grid, disc);
      scratch_.resize(static_cast<Eigen::Index>(dim));
    }
  }

  /// b at node k. `states` holds nodes 0..k flattened (k+1)*dim values.
  /// Must be called with k = 0, 1, 2, ... (repeating the same k is allowed).
  void eval(std::size_t k, std::span<const double> states, VectorRef out) {
    if (tracker_) {
      tracker_->advance(k, states);
      tracker_->nu(out);
      if (drift_->scale() != 1.0) out *= drift_->scale();
    } else if (!children_.empty()) {
      out.setZero();
      for (auto& child : children_) {
        child.eval(k, states, scratch_);
        out += scratch_;
      }
      if (drift_->scale() != 1.0) out *= drift_->scale();
    } else {
      const Eigen::Map<const Vector> x(states.data() + k * dim_, static_cast<Eigen::Index>(dim_));
      drift_->eval_state(x, out);
    }
  }

 private:
  class Tracker {
   public:
    Tracker(const FunctionalSpec& spec, std::size_t dim, std::span<const double> grid, Discretization disc)
        : spec_(&spec), dim_(dim), grid_(grid), disc_(disc) {
      const auto d = static_cast<Eigen::Index>(dim);
      w_.resize(d);
      integral_ = Vector::Zero(d);
      c_.resize(d);
      delayed_.assign(spec.delays.size(), Vector::Zero(d));
      delay_ptr_.assign(spec.delays.size(), 0);
      if (disc.levels > 0) {
        const std::size_t steps = grid.size() - 1;
        if (steps % disc.levels != 0) {
          throw DomainError("A^(n,m): simulation steps must be a multiple of n");
        }
        stride_ = steps / disc.levels;
        fine_h_ = grid.back() / static_cast<double>(steps);
      }
    }

    void advance(std::size_t k, std::span<const double> states) {
      if (processed_ && k == current_) return;
      if (processed_ ? k != current_ + 1 : k != 0) {
        throw DomainError("DriftEvaluator: nodes must be visited in order");
      }
      current_ = k;
      processed_ = true;
      const auto node = [&](std::size_t j) {
        return Eigen::Map<const Vector>(states.data() + j * dim_, static_cast<Eigen::Index>(dim_));
      };
      if (disc_.levels == 0) {
        if (k > 0) {
          spec_->integrand(grid_[k - 1], node(k - 1), c_);
          integral_ += (grid_[k] - grid_[k - 1]) * c_;
        }
        running_max_ = std::max(k == 0 ? 0.0 : running_max_, spec_->zeta(grid_[k], node(k)));
        time_ = grid_[k];
        w_ = node(k);
        for (std::size_t i = 0; i < spec_->delays.size(); ++i) {
          const double lagged = grid_[k] - spec_->delays[i].tau;
          std::size_t& p = delay_ptr_[i];
          if (lagged > 0.0) {
            while (p + 1 <= k && grid_[p + 1] <= lagged) ++p;
          }
          delayed_[i] = node(lagged > 0.0 ? p : 0);
        }
      } else {
        const std::size_t coarse = (k / stride_) * stride_;
        if (k % stride_ == 0) {
          if (k > 0) {
            spec_->integrand(grid_[k - stride_], node(k - stride_), c_);
            integral_ += (grid_[k] - grid_[k - stride_]) * c_;
          }
          running_max_ = std::max(k == 0 ? 0.0 : running_max_, spec_->zeta(grid_[k], node(k)));
        }
        time_ = grid_[coarse];
        w_ = node(coarse);
        const std::size_t active = std::min(disc_.truncation, spec_->delays.size());
        for (std::size_t i = 0; i < spec_->delays.size(); ++i) {
          if (i >= active) {
            delayed_[i].setZero();
            continue;
          }
          const double lagged = grid_[k] - spec_->delays[i].tau;
          std::size_t fine = 0;
          if (lagged > 0.0) {
            fine = static_cast<std::size_t>(std::floor(lagged / fine_h_ * (1.0 + 4e-15)));
            fine = std::min(fine, k);
          }
          delayed_[i] = node((fine / stride_) * stride_);
        }
      }
    }

    void nu(VectorRef out) const {
      evaluate_nu(*spec_, time_, w_, running_max_, delayed_, integral_, disc_.truncation, out);
    }

   private:
    const FunctionalSpec* spec_;
    std::size_t dim_;
    std::span<const double> grid_;
    Discretization disc_;
    std::size_t stride_ = 1;
    double fine_h_ = 0.0;
    bool processed_ = false;
    std::size_t current_ = 0;
    double time_ = 0.0;
    Vector w_;
    double running_max_ = 0.0;
    Vector integral_;
    Vector c_;
    std::vector<Vector> delayed_;
    std::vector<std::size_t> delay_ptr_;
  };

  const Drift* drift_;
  std::size_t dim_;
  std::span<const double> grid_;
  Discretization disc_;
  std::optional<Tracker> tracker_;
  std::vector<DriftEvaluator> children_;
  Vector scratch_;
};

/// b(t, path) using only path nodes at or before t.
inline Vector eval_drift(const PathDependentModel& model, double t, const DiscretePath& path) {
  if (path.dim() != model.dim) throw DomainError("eval_drift: path dimension mismatch");
  if (t < 0.0 || t > path.horizon() * (1.0 + 1e-12)) throw DomainError("eval_drift: t beyond path horizon");
  const std::size_t last = path.node_at_or_before(t);
  for (std::size_t k = 0; k <= last; ++k) {
    if (!path.state(k).allFinite()) {
      throw NumericError("eval_drift: non-finite path value at node " + std::to_string(k));
    }
  }
  Vector out(static_cast<Eigen::Index>(model.dim));
  if (model.drift.is_markov()) {
    model.drift.eval_state(path.state(last), out);
    return out;
  }
  // Functional drifts read the integral up to t itself, which may fall between nodes.
  if (const auto* f = std::get_if<FunctionalDrift>(&model.drift.kind())) {
    const FunctionalState st = functional_state(f->spec, path, t);
    evaluate_nu(f->spec, st.t, st.w, st.running_max, st.delayed, st.integral,
                std::numeric_limits<std::size_t>::max(), out);
    out *= model.drift.scale();
    return out;
  }
  // Sums of functional and Markov terms: evaluate on the prefix grid.
  std::vector<double> prefix(path.grid().begin(), path.grid().begin() + static_cast<std::ptrdiff_t>(last + 1));
  DriftEvaluator ev(model.drift, model.dim, prefix);
  for (std::size_t k = 0; k <= last; ++k) ev.eval(k, path.flat_states(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Growth spot checks
// ---------------------------------------------------------------------------

struct GrowthReport {
  double max_linear_ratio = 0.0;  // max |b| / (1 + w*_t)
  bool linear_violation = false;
  std::vector<double> sublinear_excess;  // per table entry: max(|b| - delta w*_t)
  std::vector<bool> sublinear_violation;
  double max_abs_drift = 0.0;
  bool bound_violation = false;
  std::size_t evaluations = 0;
};

inline GrowthReport validate_growth(const PathDependentModel& model, std::span<const DiscretePath> paths) {
  if (paths.empty()) throw DomainError("validate_growth: no sample paths");
  GrowthReport rep;
  rep.sublinear_excess.assign(model.growth.table.size(), -std::numeric_limits<double>::infinity());
  Vector b(static_cast<Eigen::Index>(model.dim));
  for (const auto& path : paths) {
    if (path.dim() != model.dim) throw DomainError("validate_growth: path dimension mismatch");
    DriftEvaluator ev(model.drift, model.dim, path.grid());
    double sup_norm = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
      sup_norm = std::max(sup_norm, path.state(k).norm());
      ev.eval(k, path.flat_states(), b);
      const double nb = b.norm();
      rep.max_abs_drift = std::max(rep.max_abs_drift, nb);
      rep.max_linear_ratio = std::max(rep.max_linear_ratio, nb / (1.0 + sup_norm));
      for (std::size_t j = 0; j < model.growth.table.size(); ++j) {
        rep.sublinear_excess[j] = std::max(rep.sublinear_excess[j], nb - model.growth.table[j].delta * sup_norm);
      }
      ++rep.evaluations;
    }
  }
  constexpr double kSlack = 1e-12;
  rep.linear_violation = rep.max_linear_ratio > model.growth.linear_k * (1.0 + kSlack) + kSlack;
  for (std::size_t j = 0; j < model.growth.table.size(); ++j) {
    rep.sublinear_violation.push_back(rep.sublinear_excess[j] > model.growth.table[j].k_delta + kSlack);
  }
  if (model.growth.bound) rep.bound_violation = rep.max_abs_drift > *model.growth.bound + kSlack;
  return rep;
}

}  // namespace pathdrift
