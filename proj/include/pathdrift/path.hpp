#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pathdrift/errors.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/rng.hpp"

namespace pathdrift {

using TimeGrid = std::vector<double>;

inline void validate_grid(std::span<const double> grid) {
  if (grid.empty()) throw DomainError("time grid is empty");
  if (grid.front() != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) {
      throw DomainError("time grid not strictly increasing at index " + std::to_string(k));
    }
  }
}

/// (0, T/n, ..., T).
inline TimeGrid uniform_grid(double horizon, std::size_t steps) {
  if (steps == 0) throw DomainError("uniform_grid: steps must be >= 1");
  if (!(horizon > 0.0)) throw DomainError("uniform_grid: horizon must be positive");
  TimeGrid grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  }
  grid.back() = horizon;
  return grid;
}

/// eta_n(t) = kT/n for t in [kT/n, (k+1)T/n). Values at or beyond T map to T.
inline double eta_floor(double t, double horizon, std::size_t steps) {
  if (t >= horizon) return horizon;
  if (t <= 0.0) return 0.0;
  const double h = horizon / static_cast<double>(steps);
  // Nudge by a few ulps so that exact grid nodes are not floored one cell down.
  const auto k = static_cast<std::size_t>(std::floor(t / h * (1.0 + 4e-15)));
  return std::min(horizon, static_cast<double>(k) * h);
}

/// Index of the largest grid node <= t (t clipped to [0, back]).
inline std::size_t node_at_or_before(std::span<const double> grid, double t) {
  if (t <= grid.front()) return 0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  return static_cast<std::size_t>(std::distance(grid.begin(), it)) - 1;
}

/// Time grid plus R^d states at every node and, optionally, the driving
/// Brownian increments of each step. Immutable once constructed.
class DiscretePath {
 public:
  DiscretePath() = default;

  DiscretePath(TimeGrid grid, std::size_t dim, std::vector<double> states,
               std::vector<double> increments = {})
      : grid_(std::move(grid)),
        dim_(dim),
        states_(std::move(states)),
        increments_(std::move(increments)) {
    validate_grid(grid_);
    if (dim_ == 0) throw DomainError("path dimension must be positive");
    if (states_.size() != grid_.size() * dim_) {
      throw DomainError("path: states length does not match grid");
    }
    if (!increments_.empty() && increments_.size() != (grid_.size() - 1) * dim_) {
      throw DomainError("path: increments length does not match grid steps");
    }
  }

  [[nodiscard]] std::size_t size() const { return grid_.size(); }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t steps() const { return grid_.size() - 1; }
  [[nodiscard]] double time(std::size_t k) const { return grid_[k]; }
  [[nodiscard]] double horizon() const { return grid_.back(); }
  [[nodiscard]] std::span<const double> grid() const { return grid_; }
  [[nodiscard]] std::span<const double> flat_states() const { return states_; }
  [[nodiscard]] bool has_increments() const { return !increments_.empty(); }

  [[nodiscard]] Eigen::Map<const Vector> state(std::size_t k) const {
    return {states_.data() + k * dim_, static_cast<Eigen::Index>(dim_)};
  }
  [[nodiscard]] Eigen::Map<const Vector> increment(std::size_t k) const {
    if (increments_.empty()) throw DomainError("path carries no increments");
    return {increments_.data() + k * dim_, static_cast<Eigen::Index>(dim_)};
  }
  [[nodiscard]] std::size_t node_at_or_before(double t) const {
    return pathdrift::node_at_or_before(grid_, t);
  }

 private:
  TimeGrid grid_;
  std::size_t dim_ = 0;
  std::vector<double> states_;
  std::vector<double> increments_;
};

/// Standard d-dimensional Brownian motion sampled on `grid`, W_0 = 0.
inline DiscretePath brownian_path(std::size_t dim, TimeGrid grid, SeedSpec seed) {
  validate_grid(grid);
  if (dim == 0) throw DomainError("brownian_path: dimension must be positive");
  Rng rng(seed);
  const std::size_t n = grid.size();
  std::vector<double> states(n * dim, 0.0);
  std::vector<double> increments((n - 1) * dim);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double sd = std::sqrt(grid[k + 1] - grid[k]);
    for (std::size_t i = 0; i < dim; ++i) {
      const double dw = sd * rng.normal();
      increments[k * dim + i] = dw;
      states[(k + 1) * dim + i] = states[k * dim + i] + dw;
    }
  }
  return DiscretePath(std::move(grid), dim, std::move(states), std::move(increments));
}

}  // namespace pathdrift
