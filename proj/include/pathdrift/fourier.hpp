#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pathdrift/errors.hpp"
#include "pathdrift/model.hpp"
#include "pathdrift/path.hpp"
#include "pathdrift/rng.hpp"
#include "pathdrift/schemes.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

/// Clipped ramp: 0 on [0, delta], 1-Lipschitz, capped at 1.
inline double f_delta(double r, double delta) { return std::min(1.0, std::max(0.0, r - delta)); }

struct CfRow {
  double xi = 0.0;
  double modulus = 0.0;  // |E[e^{i xi X_t} f_delta(|sigma(X_t)|)]|
  double stderr_ = 0.0;
  double real = 0.0;
  double imag = 0.0;
};

struct CfDiagnostic {
  std::vector<CfRow> rows;
  double l2_integral = 0.0;  // trapezoid int |mu|^2 over the xi grid
  double tail_exponent = std::numeric_limits<double>::quiet_NaN();  // slope of log|mu| vs log|xi|, upper half
  bool tamed = false;
};

struct CfOptions {
  double tamed_ell = 0.25;  // used when the drift is super-linear
  ExecPolicy exec;
};

/// Smoothed characteristic function of X_t in one dimension. X_t comes from
/// fine Euler steps; super-linear drifts use tamed steps with epsilon equal to
/// the step size.
inline CfDiagnostic cf_decay_diagnostic(const PathDependentModel& model, double x, double t, double delta,
                                        std::span<const double> xi_grid, std::size_t samples, std::size_t n_fine,
                                        std::uint64_t seed, const CfOptions& opt = {}) {
  if (model.dim != 1) throw UnsupportedError("cf_decay_diagnostic: requires dim = 1");
  if (!(t > 0.0)) throw DomainError("cf_decay_diagnostic: t must be positive");
  if (!(delta >= 0.0)) throw DomainError("cf_decay_diagnostic: delta must be >= 0");
  if (xi_grid.empty()) throw DomainError("cf_decay_diagnostic: empty xi grid");
  if (samples < 2) throw DomainError("cf_decay_diagnostic: need at least 2 samples");
  const bool tamed = model.drift.is_superlinear();
  if (tamed && !model.drift.is_markov()) throw UnsupportedError("cf_decay_diagnostic: tamed path requires a Markov drift");
  const std::size_t nx = xi_grid.size();
  const TimeGrid grid = uniform_grid(t, n_fine);
  const double h = t / static_cast<double>(n_fine);

  struct Partial {
    std::vector<Aggregate> c;
    std::vector<Aggregate> s;
    std::vector<Aggregate> cs;  // c + s, for the covariance
  };
  auto parts = run_blocks(samples, opt.exec, [&](std::size_t begin, std::size_t end) {
    Partial p{std::vector<Aggregate>(nx), std::vector<Aggregate>(nx), std::vector<Aggregate>(nx)};
    std::optional<EulerSimulator> sim;
    std::optional<ScalarCoefficients> coef;
    if (tamed) {
      coef.emplace(model);
    } else {
      sim.emplace(model, grid);
    }
    Vector x0 = Vector::Constant(1, x);
    Vector xt(1);
    Matrix sig(1, 1);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(SeedSpec{seed, i});
      double xv = x;
      if (tamed) {
        const double sd = std::sqrt(h);
        for (std::size_t k = 0; k < n_fine; ++k) {
          const double tk = grid[k];
          const double dw = sd * rng.normal();
          xv += tame_drift(coef->drift(xv), xv, opt.tamed_ell, h) * h +
                tame_diffusion(coef->sigma(tk, xv), xv, opt.tamed_ell, h) * dw;
        }
        if (!std::isfinite(xv)) throw NumericError("cf_decay_diagnostic: non-finite tamed state");
      } else {
        sim->simulate(x0, rng);
        xv = sim->terminal()[0];
      }
      xt[0] = xv;
      model.diffusion.eval(t, xt, sig);
      const double f = f_delta(std::abs(sig(0, 0)), delta);
      for (std::size_t j = 0; j < nx; ++j) {
        const double c = f * std::cos(xi_grid[j] * xv);
        const double s = f * std::sin(xi_grid[j] * xv);
        p.c[j].push(c);
        p.s[j].push(s);
        p.cs[j].push(c + s);
      }
    }
    return p;
  });
  std::vector<Aggregate> c(nx);
  std::vector<Aggregate> s(nx);
  std::vector<Aggregate> cs(nx);
  for (const auto& p : parts) {
    for (std::size_t j = 0; j < nx; ++j) {
      c[j].merge(p.c[j]);
      s[j].merge(p.s[j]);
      cs[j].merge(p.cs[j]);
    }
  }
  CfDiagnostic out;
  out.tamed = tamed;
  const double n = static_cast<double>(samples);
  for (std::size_t j = 0; j < nx; ++j) {
    CfRow row;
    row.xi = xi_grid[j];
    row.real = c[j].mean();
    row.imag = s[j].mean();
    row.modulus = std::hypot(row.real, row.imag);
    const double vc = std::max(0.0, c[j].variance());
    const double vs = std::max(0.0, s[j].variance());
    const double cov = 0.5 * (cs[j].variance() - c[j].variance() - s[j].variance());
    if (row.modulus > 0.0) {
      const double gc = row.real / row.modulus;
      const double gs = row.imag / row.modulus;
      row.stderr_ = std::sqrt(std::max(0.0, gc * gc * vc + gs * gs * vs + 2.0 * gc * gs * cov) / n);
    } else {
      row.stderr_ = std::sqrt((vc + vs) / n);
    }
    out.rows.push_back(row);
  }
  for (std::size_t j = 1; j < nx; ++j) {
    const double a = out.rows[j - 1].modulus;
    const double b = out.rows[j].modulus;
    out.l2_integral += 0.5 * (a * a + b * b) * (out.rows[j].xi - out.rows[j - 1].xi);
  }
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t j = nx / 2; j < nx; ++j) {
    const double xi = std::abs(out.rows[j].xi);
    if (xi > 0.0 && out.rows[j].modulus > 0.0) {
      lx.push_back(std::log(xi));
      ly.push_back(std::log(out.rows[j].modulus));
    }
  }
  if (lx.size() >= 2) out.tail_exponent = ols_slope(lx, ly);
  return out;
}

}  // namespace pathdrift
