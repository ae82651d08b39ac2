#pragma once

#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "pathdrift/closedforms.hpp"
#include "pathdrift/fourier.hpp"
#include "pathdrift/girsanov.hpp"
#include "pathdrift/model.hpp"
#include "pathdrift/parametrix.hpp"
#include "pathdrift/path.hpp"
#include "pathdrift/schemes.hpp"
#include "pathdrift/stats.hpp"

namespace pathdrift {

struct SelftestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace selftest_detail {

inline PathDependentModel model_1d(Drift drift, double sigma) {
  PathDependentModel m;
  m.dim = 1;
  m.drift = std::move(drift);
  m.diffusion = ConstantDiffusion{Matrix::Constant(1, 1, sigma)};
  return m;
}

inline Vector v1(double a) { return Vector::Constant(1, a); }

inline DiscretePath three_point_path() { return DiscretePath({0.0, 0.5, 1.0}, 1, {0.0, 1.0, 0.5}); }

}  // namespace selftest_detail

/// Closed-form sanity checks that need no Monte Carlo tolerance.
inline std::vector<SelftestResult> run_selftest() {
  using namespace selftest_detail;
  std::vector<std::pair<std::string, std::function<bool()>>> checks;
  const auto exact = [](double a, double b) { return a == b; };
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };

  checks.emplace_back("zero drift evaluates to 0", [&] {
    return eval_drift(model_1d(Drift(), 1.0), 1.0, three_point_path())[0] == 0.0;
  });
  checks.emplace_back("constant drift evaluates to its value", [&] {
    return exact(eval_drift(model_1d(Drift(ConstantDrift{v1(0.7)}), 1.0), 1.0, three_point_path())[0], 0.7);
  });
  checks.emplace_back("running-max drift reads the path maximum", [&] {
    FunctionalSpec spec;
    spec.nu.max = 1.0;
    return exact(eval_drift(model_1d(Drift(FunctionalDrift{spec}), 1.0), 1.0, three_point_path())[0], 1.0);
  });
  checks.emplace_back("functional state at t = 0", [&] {
    FunctionalSpec spec;
    spec.delays = {{0.5, 1.0}};
    const auto st = functional_state(spec, three_point_path(), 0.0);
    return st.t == 0.0 && st.w[0] == 0.0 && st.running_max == 0.0 && st.delayed[0][0] == 0.0 && st.integral[0] == 0.0;
  });
  checks.emplace_back("delayed value is a direct lookup", [&] {
    FunctionalSpec spec;
    spec.delays = {{0.5, 1.0}};
    return exact(functional_state(spec, three_point_path(), 1.0).delayed[0][0], 1.0);
  });
  checks.emplace_back("left-rule integral of a constant integrand", [&] {
    FunctionalSpec spec;
    spec.integrand.gamma = 1e-300;  // |x|^0 = 1 except at x = 0
    const DiscretePath p({0.0, 0.25, 0.5, 0.75, 1.0}, 1, {1.0, 1.0, 1.0, 1.0, 1.0});
    return near(functional_state(spec, p, 1.0).integral[0], 1.0);
  });
  checks.emplace_back("Brownian path on a single node", [&] {
    const DiscretePath p = brownian_path(1, {0.0}, SeedSpec{1, 0});
    return p.size() == 1 && p.state(0)[0] == 0.0;
  });
  checks.emplace_back("eta flooring and uniform grids", [&] {
    const TimeGrid g = uniform_grid(2.0, 2);
    return exact(eta_floor(0.3, 1.0, 4), 0.25) && exact(eta_floor(1.0, 1.0, 4), 1.0) && g.size() == 3 &&
           g[0] == 0.0 && g[1] == 1.0 && g[2] == 2.0;
  });
  checks.emplace_back("Euler with b = 0, sigma = 1 reproduces x0 + W", [&] {
    const TimeGrid g = uniform_grid(1.0, 16);
    const DiscretePath x = euler_maruyama(model_1d(Drift(), 1.0), v1(0.3), g, SeedSpec{5, 2});
    const DiscretePath w = brownian_path(1, g, SeedSpec{5, 2});
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!near(x.state(k)[0], 0.3 + w.state(k)[0])) return false;
    }
    return true;
  });
  checks.emplace_back("Euler with b = 1, sigma = 0 is exact", [&] {
    const DiscretePath x =
        euler_maruyama(model_1d(Drift(ConstantDrift{v1(1.0)}), 0.0), v1(0.5), uniform_grid(1.0, 7), SeedSpec{1, 0});
    return near(x.state(7)[0], 1.5);
  });
  checks.emplace_back("taming is the identity at x = 0", [&] {
    return tame_drift(-2.0, 0.0, 1.0, 0.25) == -2.0 && tame_diffusion(3.0, 0.0, 1.0, 0.25) == 3.0;
  });
  checks.emplace_back("Girsanov weight is 1 for b = 0 or q = 0", [&] {
    const DiscretePath y = brownian_path(1, uniform_grid(1.0, 8), SeedSpec{3, 0});
    return girsanov_weight(model_1d(Drift(), 1.0), y, 1.0) == 1.0 &&
           girsanov_weight(model_1d(Drift(TanhDrift{1.0}), 1.0), y, 0.0) == 1.0;
  });
  checks.emplace_back("martingale check is exact for b = 0", [&] {
    const auto r = martingale_check(model_1d(Drift(), 1.0), v1(0.0), 1.0, 4, 10, 1);
    return r.estimate.mean == 1.0 && r.estimate.stderr_ == 0.0 && r.pass;
  });
  checks.emplace_back("Novikov partition collapses for tiny K", [&] {
    const auto p = novikov_partition(1.0, 1.0, 1e-6, 1.0, 1.0);
    return p.size() == 2 && p[0] == 0.0 && p[1] == 1.0;
  });
  checks.emplace_back("t_r equals T when 2r^2 - r = 0", [&] { return t_threshold(0.5, 1.0, 1.0, 1.0, 3.0) == 3.0; });
  checks.emplace_back("moment bound is 1 when 2r^2 - r < 0", [&] {
    ZMomentInputs in;
    in.r = 0.25;
    return z_moment_bound(in) == 1.0;
  });
  checks.emplace_back("Gaussian kernel is symmetric", [&] {
    const SpdMatrix a(Matrix::Identity(2, 2) * 0.7);
    Vector x(2);
    Vector y(2);
    x << 0.1, -0.4;
    y << 1.2, 0.3;
    return gaussian_density(a, x, y) == gaussian_density(a, y, x);
  });
  checks.emplace_back("Hermite weights at the origin", [&] {
    Matrix m(2, 2);
    m << 2.0, 0.3, 0.3, 1.0;
    const SpdMatrix a(m);
    return hermite_first(a, Vector::Zero(2)).isZero(0.0) &&
           (hermite_second(a, Vector::Zero(2)) + a.inverse()).isZero(1e-15);
  });
  checks.emplace_back("theta vanishes on the diagonal for equal covariances", [&] {
    const Matrix a = Matrix::Identity(1, 1);
    return theta_weight(v1(3.0), a, a, 0.4, v1(1.0), v1(1.0)) == 0.0;
  });
  checks.emplace_back("frozen chain without jumps is (y)", [&] {
    Rng rng(SeedSpec{1, 0});
    const auto s = frozen_chain(Diffusion(), v1(0.4), {}, rng);
    return s.size() == 1 && s[0][0] == 0.4;
  });
  checks.emplace_back("no jumps leave survival 1 - F(t)", [&] {
    const CountingSpec spec = CountingSpec::exponential(1e-9);
    const CountingDraw d = sample_counting(spec, 1.0, SeedSpec{2, 0});
    return d.jumps() == 0 && d.survival == spec.survival(1.0);
  });
  checks.emplace_back("null-model chains give 0 or g / (1 - F(t))", [&] {
    const auto m = model_1d(Drift(), 1.0);
    const CountingSpec spec = CountingSpec::exponential(2.0);
    const double g = normal_pdf(0.3, -0.2, 0.8);
    for (std::uint64_t i = 0; i < 32; ++i) {
      const ParametrixChain c = unbiased_density_chain(m, v1(-0.2), v1(0.3), 0.8, spec, {9, i});
      const double expect = c.jump_times.empty() ? g / spec.survival(0.8) : 0.0;
      if (!near(c.value, expect)) return false;
    }
    return true;
  });
  checks.emplace_back("first-order density is exact for b = 0", [&] {
    const auto e = density_first_order(model_1d(Drift(), 1.0), v1(0.0), v1(0.5), 1.0, 10, 1);
    return e.value == normal_pdf(0.5, 0.0, 1.0) && e.stderr_ == 0.0;
  });
  checks.emplace_back("beta integral with m = 1, a = b = 0", [&] { return near(beta_convolution(1, 0.0, 0.0, 1.0), 1.0); });
  checks.emplace_back("sharp bracket degenerates for zero drift bound", [&] {
    const auto [lo, hi] = sharp_bracket(v1(0.0), v1(0.4), 1.0, 0.0);
    DensityEstimate e;
    e.value = normal_pdf(0.4, 0.0, 1.0);
    return lo == hi && near(lo, e.value) && sharp_bound_verdict(e, v1(0.0), v1(0.4), 1.0, 0.0) == Verdict::pass;
  });
  checks.emplace_back("unit envelope collapses onto the Gaussian", [&] {
    const auto [lo, hi] = envelope_bracket(GaussianEnvelope{}, v1(0.0), v1(0.4), 1.0);
    return lo == hi && near(lo, normal_pdf(0.4, 0.0, 1.0));
  });
  checks.emplace_back("aggregate of a constant stream", [&] {
    Aggregate a;
    for (int i = 0; i < 5; ++i) a.push(2.5);
    return a.mean() == 2.5 && a.stderr_or_zero() == 0.0;
  });
  checks.emplace_back("smoothed CF vanishes when sigma < delta", [&] {
    const double xi[] = {0.0, 1.0};
    const auto d = cf_decay_diagnostic(model_1d(Drift(), 0.25), 0.0, 1.0, 0.5, xi, 8, 4, 1);
    return d.rows[0].modulus == 0.0 && d.rows[1].modulus == 0.0;
  });
  checks.emplace_back("tamed error vanishes for null dynamics", [&] {
    const auto s = strong_error_sweep(model_1d(Drift(), 0.0), 1.0, 1.0, {0.5, 0.25}, 4, 1, 0.25, 16);
    return s.rows[0].mean_square_error == 0.0 && s.rows[1].mean_square_error == 0.0;
  });

  std::vector<SelftestResult> out;
  for (auto& [name, fn] : checks) {
    SelftestResult r{name, false, ""};
    try {
      r.pass = fn();
    } catch (const std::exception& e) {
      r.detail = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pathdrift
