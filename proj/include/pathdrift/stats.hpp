#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace pathdrift {

/// Single-pass moments up to order four (Pebay's update and merge rules).
/// Merging is exact in exact arithmetic; in floating point the result
/// depends on the merge order, so callers merge in a fixed order.
class Aggregate {
 public:
  void push(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double delta_n = delta / n;
    const double delta_n2 = delta_n * delta_n;
    const double term1 = delta * delta_n * n1;
    mean_ += delta_n;
    m4_ += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2_ - 4.0 * delta_n * m3_;
    m3_ += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2_;
    m2_ += term1;
  }

  void merge(const Aggregate& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double delta = o.mean_ - mean_;
    const double d2 = delta * delta;
    const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
    const double m3 = m3_ + o.m3_ + d2 * delta * na * nb * (na - nb) / (n * n) +
                      3.0 * delta * (na * o.m2_ - nb * m2_) / n;
    const double m4 = m4_ + o.m4_ + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                      6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
                      4.0 * delta * (na * o.m3_ - nb * m3_) / n;
    mean_ += delta * nb / n;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
    n_ += o.n_;
  }

  [[nodiscard]] std::size_t count() const { return n_; }
  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] double variance() const {
    return n_ < 2 ? std::numeric_limits<double>::quiet_NaN() : m2_ / static_cast<double>(n_ - 1);
  }
  /// Standard error of the mean; absent for fewer than two samples.
  [[nodiscard]] std::optional<double> stderr_of_mean() const {
    if (n_ < 2) return std::nullopt;
    return std::sqrt(std::max(0.0, m2_) / static_cast<double>(n_ - 1) / static_cast<double>(n_));
  }
  [[nodiscard]] double stderr_or_zero() const { return stderr_of_mean().value_or(0.0); }
  /// Non-excess sample kurtosis n M4 / M2^2 (NaN when the sample is constant).
  [[nodiscard]] double kurtosis() const {
    if (n_ < 2 || m2_ <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(n_) * m4_ / (m2_ * m2_);
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

inline Aggregate aggregate(std::span<const double> samples) {
  Aggregate a;
  for (double x : samples) a.push(x);
  return a;
}

/// Worker count and the fixed block size used to partition replications.
/// Results depend on the block size, never on the worker count.
struct ExecPolicy {
  unsigned workers = 0;  // 0 = hardware concurrency
  std::size_t block = 4096;

  [[nodiscard]] unsigned resolved_workers() const {
    if (workers > 0) return workers;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
  }
};

/// Splits [0, n) into consecutive blocks of policy.block items, evaluates
/// fn(begin, end) for each on a pool of workers and returns the per-block
/// results in ascending block order.
template <class Fn>
auto run_blocks(std::size_t n, const ExecPolicy& policy, Fn&& fn) {
  using Partial = decltype(fn(std::size_t{0}, std::size_t{0}));
  const std::size_t block = std::max<std::size_t>(1, policy.block);
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<Partial> results(blocks);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(policy.resolved_workers(), std::max<std::size_t>(blocks, 1)));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        const std::size_t begin = b * block;
        results[b] = fn(begin, std::min(n, begin + block));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

/// Mean/stderr summary of a sample aggregate.
struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline Estimate summarize(const Aggregate& a) { return {a.mean(), a.stderr_or_zero(), a.count()}; }

/// Ordinary least squares y = a + b x; returns b.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// Pearson correlation.
inline double correlation(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace pathdrift
