// Acceptance suite: one PASS/FAIL line per criterion. Exits 1 if any fails.

#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pathdrift/closedforms.hpp"
#include "pathdrift/config.hpp"
#include "pathdrift/convergence.hpp"
#include "pathdrift/fourier.hpp"
#include "pathdrift/girsanov.hpp"
#include "pathdrift/parametrix.hpp"
#include "pathdrift/quadrature.hpp"
#include "pathdrift/schemes.hpp"

using namespace pathdrift;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

PathDependentModel model_1d(Drift drift, double sigma = 1.0) {
  PathDependentModel m;
  m.dim = 1;
  m.drift = std::move(drift);
  m.diffusion = ConstantDiffusion{Matrix::Constant(1, 1, sigma)};
  return m;
}

Vector v1(double a) { return Vector::Constant(1, a); }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double gauss(double z, double mean, double var) {
  return std::exp(-(z - mean) * (z - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

// ---------------------------------------------------------------------------

Outcome hermite_identities() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const QuadratureRule gh = gauss_hermite(12);
  double worst = 0.0;
  for (int d : {1, 2}) {
    for (int trial = 0; trial < 20; ++trial) {
      Matrix m(d, d);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) m(i, j) = unif(gen);
      }
      const Matrix a = m * m.transpose() + 0.2 * Matrix::Identity(d, d);
      const SpdMatrix A(a);
      const Matrix l = Eigen::LLT<Matrix>(a).matrixL();
      Vector x(d);
      for (int i = 0; i < d; ++i) x[i] = unif(gen);
      // int f(y) g_A(y - x) dy = pi^{-d/2} sum w f(x + sqrt2 L u).
      Vector first = Vector::Zero(d);
      Matrix second = Matrix::Zero(d, d);
      Vector u(d);
      const std::size_t nodes = gh.nodes.size();
      const std::size_t total = d == 1 ? nodes : nodes * nodes;
      for (std::size_t k = 0; k < total; ++k) {
        double w = 1.0;
        std::size_t rest = k;
        for (int i = 0; i < d; ++i) {
          u[i] = gh.nodes[rest % nodes];
          w *= gh.weights[rest % nodes];
          rest /= nodes;
        }
        const Vector v = std::numbers::sqrt2 * l * u;
        first += w * hermite_first(A, v);
        second += w * hermite_second(A, v);
      }
      const double norm = std::pow(std::numbers::pi, -0.5 * d);
      worst = std::max({worst, (norm * first).cwiseAbs().maxCoeff(), (norm * second).cwiseAbs().maxCoeff()});
    }
  }
  return {worst < 1e-8, "max |integral| = " + fmt("%.3g", worst)};
}

Outcome girsanov_martingale() {
  const auto tanh = model_1d(Drift(TanhDrift{1.0}));
  const auto ou = model_1d(Drift(LinearDrift{Matrix::Constant(1, 1, -1.0), v1(0.0)}));
  const auto a = martingale_check(tanh, v1(0.0), 1.0, 1024, 100000, 101);
  const auto b = martingale_check(ou, v1(1.0), 1.0, 1024, 100000, 102);
  return {a.pass && b.pass, "tanh " + fmt("%.5f", a.estimate.mean) + " +- " + fmt("%.5f", a.estimate.stderr_) +
                                ", OU " + fmt("%.5f", b.estimate.mean) + " +- " + fmt("%.5f", b.estimate.stderr_)};
}

Outcome null_model_unbiased() {
  const auto m = model_1d(Drift());
  const auto spec = CountingSpec::exponential(1.0);
  const double g = gaussian_density(SpdMatrix(Matrix::Identity(1, 1)), v1(0.0), v1(0.5));
  std::size_t exact = 0;
  Aggregate agg;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = unbiased_density_sample(m, v1(0.0), v1(0.5), 1.0, spec, {103, i});
    exact += s == g ? 1 : 0;
    agg.push(s);
  }
  return {exact == n, std::to_string(exact) + "/" + std::to_string(n) + " samples equal g, sample variance " +
                          fmt("%.4g", agg.variance()) + ", mean " + fmt("%.5f", agg.mean()) + " vs g " +
                          fmt("%.5f", g)};
}

Outcome ou_cross_validation() {
  const auto ou = model_1d(Drift(LinearDrift{Matrix::Constant(1, 1, -1.0), v1(0.0)}));
  const double exact = ou_density(1.0, 0.0, 0.5, 1.0, 1.0);
  const double budget = 0.01;
  const auto u = unbiased_density(ou, v1(1.0), v1(0.0), 0.5, CountingSpec::exponential(1.0), 1000000, 104);
  const auto k = density_girsanov_kernel(ou, v1(1.0), v1(0.0), 0.5, 0.02, 1000000, 105, KernelOptions{256, {}});
  const bool pu = std::abs(u.estimate.value - exact) <= 3.0 * u.estimate.stderr_ + budget;
  const bool pk = std::abs(k.value - exact) <= 3.0 * k.stderr_ + budget;
  return {pu && pk, "exact " + fmt("%.5f", exact) + ", unbiased " + fmt("%.5f", u.estimate.value) + " +- " +
                        fmt("%.5f", u.estimate.stderr_) + ", kernel " + fmt("%.5f", k.value) + " +- " +
                        fmt("%.5f", k.stderr_)};
}

Outcome first_order_constant_drift() {
  const auto m = model_1d(Drift(ConstantDrift{v1(0.3)}));
  bool ok = true;
  double worst = 0.0;
  for (double y : {-1.0, 0.0, 0.3, 1.0, 2.0}) {
    const auto e = density_first_order(m, v1(0.0), v1(y), 1.0, 20000, 106);
    const double err = std::abs(e.value - gauss(y, 0.3, 1.0));
    ok = ok && err <= 3.0 * e.stderr_ + 0.005;
    worst = std::max(worst, err);
  }
  return {ok, "max |error| = " + fmt("%.5f", worst)};
}

Outcome sharp_bangbang_bracket() {
  const auto m = model_1d(Drift(TanhDrift{0.5}));
  int passed = 0;
  std::string worst;
  for (double x : {-1.0, 0.0, 1.0}) {
    const std::vector<Vector> ys{v1(x - 1.5), v1(x), v1(x + 1.5)};
    const auto est = density_girsanov_kernel_multi(m, v1(x), ys, 1.0, 0.05, 400000, 107, KernelOptions{128, {}});
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const Verdict v = sharp_bound_verdict(est[j], v1(x), ys[j], 1.0, 0.5);
      if (v == Verdict::pass) {
        ++passed;
      } else {
        worst += " (" + fmt("%g", x) + "," + fmt("%g", ys[j][0]) + "):" + to_string(v);
      }
    }
  }
  return {passed == 9, std::to_string(passed) + "/9 points inside the bracket" + worst};
}

Outcome tamed_epsilon_law() {
  PathDependentModel m = model_1d(Drift(Heston32Drift{1.0, 1.0}));
  m.diffusion = PowerDiffusion{0.5, 1.5};  // xi^2 < lambda keeps the one-sided Lipschitz exponent above 2
  std::vector<double> eps;
  for (int k = 3; k <= 7; ++k) eps.push_back(std::ldexp(1.0, -k));
  const auto s = strong_error_sweep(m, 1.0, 1.0, eps, 100000, 108, 0.25, 4096);
  std::size_t blowups = 0;
  for (const auto& r : s.rows) blowups += r.blowups;
  return {s.slope >= 1.8 && s.slope <= 2.2,
          "slope " + fmt("%.3f", s.slope) + ", blow-ups " + std::to_string(blowups)};
}

Outcome path_dependent_rate() {
  FunctionalSpec spec;
  spec.nu.state = -1.0;
  const auto m = model_1d(Drift(FunctionalDrift{spec}));
  const std::vector<std::size_t> levels{64, 128, 256, 512};
  const auto fit = density_rate_experiment(spec, m, v1(1.0), v1(0.0), 1.0, levels, 4, 100000, 0.1, 109);
  const bool in_band = fit.fitted_slope >= 0.25 && fit.fitted_slope <= 0.75;
  const bool ci = fit.slope_ci.first <= 0.5 && 0.5 <= fit.slope_ci.second;
  std::string errs;
  for (const auto& l : fit.levels) errs += " " + fmt("%.2e", l.error) + "(" + fmt("%.1e", l.stderr_) + ")";
  return {in_band && ci && fit.strictly_decreasing,
          "slope " + fmt("%.3f", fit.fitted_slope) + " CI [" + fmt("%.3f", fit.slope_ci.first) + ", " +
              fmt("%.3f", fit.slope_ci.second) + "], decreasing " + (fit.strictly_decreasing ? "yes" : "no") +
              ", errors" + errs};
}

Outcome beta_integral() {
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<int> md(1, 3);
  std::uniform_real_distribution<double> ad(0.0, 0.9);
  std::uniform_real_distribution<double> bd(-0.9, 2.0);
  std::uniform_real_distribution<double> td(0.2, 3.0);
  boost::math::quadrature::tanh_sinh<double> ts;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int m = md(gen);
    const double a = ad(gen);
    const double b = bd(gen);
    const double t0 = td(gen);
    // F_m(s) = s^b; F_k(t) = int_0^t (t - s)^{-a} F_{k+1}(s) ds; answer F_0(t0).
    // Each level is rescaled to v in (0, 1) with s = t v and carried in log t,
    // so deep nesting never underflows; the last level folds s^b into v^b.
    std::function<double(int, double)> level = [&](int k, double log_t) -> double {
      return ts.integrate(
          [&, k, log_t](double v, double complement) {
            const double left = complement < 0.0 ? -complement : v;
            const double gap = complement > 0.0 ? complement : 1.0 - v;
            const double inner = k + 1 == m ? std::pow(left, b) : level(k + 1, log_t + std::log(left));
            return std::pow(gap, -a) * inner;
          },
          0.0, 1.0, 1e-12) *
          std::exp(((1.0 - a) + (k + 1 == m ? b : 0.0)) * log_t);
    };
    const double quad = level(0, std::log(t0));
    const double closed = beta_convolution(static_cast<std::size_t>(m), a, b, t0);
    worst = std::max(worst, std::abs(quad - closed) / std::abs(closed));
  }
  return {worst < 1e-6, "max rel. error " + fmt("%.3g", worst)};
}

Outcome parametrix_majorization() {
  const double b_sup = 0.5;
  const auto b = [&](double z) { return b_sup * std::tanh(z); };
  const double c_hat = 2.0;
  const double C_hat = std::sqrt(c_hat) / std::sqrt(1.0 - 1.0 / c_hat) * std::exp(-0.5);
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> pos(-1.5, 1.5);
  std::uniform_real_distribution<double> tim(0.2, 1.5);
  boost::math::quadrature::tanh_sinh<double> ts;
  boost::math::quadrature::sinh_sinh<double> ss;
  int dominated = 0;
  double min_ratio = 1e300;
  for (int trial = 0; trial < 5; ++trial) {
    const double x = pos(gen);
    const double y = pos(gen);
    const double t = tim(gen);
    // |H(0,x;u,z)| |H(u,z;t,y)| with |H(s,x;u,z)| = |b(x)| |z - x| / (u - s) g_{u-s}(z - x).
    const auto kernel = [&](double u, double z) {
      return std::abs(b(x)) * std::abs(z - x) / u * gauss(z, x, u) * std::abs(b(z)) * std::abs(y - z) / (t - u) *
             gauss(y, z, t - u);
    };
    // Scale z around whichever factor is narrow.
    const auto inner = [&](double u) {
      if (u <= 0.5 * t) {
        const double su = std::sqrt(u);
        return su * ss.integrate([&](double w) { return kernel(u, x + su * w); }, 1e-10);
      }
      const double sv = std::sqrt(t - u);
      return sv * ss.integrate([&](double w) { return kernel(u, y + sv * w); }, 1e-10);
    };
    const double value = ts.integrate(inner, 0.0, t, 1e-9);
    const double bound = parametrix_term_bound(2, b_sup, C_hat, 1, t) * gauss(y, x, c_hat * t);
    dominated += value <= bound ? 1 : 0;
    min_ratio = std::min(min_ratio, bound / value);
  }
  return {dominated == 5, std::to_string(dominated) + "/5 dominated, min bound/value " + fmt("%.3f", min_ratio)};
}

Outcome fourier_oracle() {
  std::vector<double> xi;
  for (int k = 0; k < 8; ++k) xi.push_back(0.5 * k);
  const auto d = cf_decay_diagnostic(model_1d(Drift()), 0.0, 1.0, 0.5, xi, 100000, 16, 110);
  int ok = 0;
  double worst = 0.0;
  for (const auto& r : d.rows) {
    const double exact = 0.5 * std::exp(-0.5 * r.xi * r.xi);
    const double z = r.stderr_ > 0.0 ? std::abs(r.modulus - exact) / r.stderr_ : (r.modulus == exact ? 0.0 : 1e300);
    ok += z <= 3.0 ? 1 : 0;
    worst = std::max(worst, z);
  }
  return {ok == 8, std::to_string(ok) + "/8 within 3 SE, max |z| = " + fmt("%.2f", worst)};
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const std::string cli = PATHDRIFT_CLI;
  const std::string models = PATHDRIFT_MODELS;
  const std::vector<std::string> commands{
      "simulate --model " + models + "/ou.json --x 1 --steps 32 --samples 9000",
      "density --model " + models + "/tanh.json --x 0 --y 0.5 --samples 9000",
      "density --model " + models + "/ou.json --method first-order --x 1 --y 0 --t 0.5 --samples 9000",
      "unbiased --model " + models + "/ou.json --x 1 --y 0 --t 0.5 --samples 9000 --counting exp:1",
      "unbiased --model " + models + "/tanh.json --x 0 --y 1 --samples 9000 --counting beta:0.5",
      "bangbang --x 0 --y 1 --t 1 --bsup 0.5",
      "bounds --model " + models + "/tanh.json --samples 9000 --bsup 0.5",
      "bounds --model " + models + "/ou.json --samples 9000 --calibrate",
      "convergence --spec " + models + "/linear_state.json --levels 8,16,32 --samples 9000 --bootstrap 20",
      "convergence --spec " + models + "/linear_functional.json --mode drift --levels 8,16,32 --m 1 --samples 9000",
      "tamed-error --model " + models + "/heston32.json --eps 2^-3..2^-5 --replications 9000 --fine-steps 256",
      "cf-diagnostic --model " + models + "/heston32.json --x 1 --samples 9000 --n-fine 64",
      "selftest",
  };
  const auto dir = std::filesystem::temp_directory_path() / ("pathdrift_acc_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  int identical = 0;
  std::string bad;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<std::string> outputs;
    bool ran = true;
    for (const char* w : {"1", "4", "4", "1"}) {
      const auto out = dir / ("out_" + std::to_string(c) + "_" + std::to_string(outputs.size()) + ".csv");
      const std::string cmd = "env -u PATHDRIFT_SEED " + cli + " --seed 2024 --workers " + w + " --out " +
                              out.string() + " " + commands[c] + " > /dev/null 2>&1";
      ran = ran && std::system(cmd.c_str()) == 0;
      outputs.push_back(slurp(out));
    }
    const bool same = ran && !outputs[0].empty() && outputs[0] == outputs[1] && outputs[1] == outputs[2] &&
                      outputs[2] == outputs[3];
    identical += same ? 1 : 0;
    if (!same) bad += " [" + commands[c].substr(0, commands[c].find(' ')) + (ran ? "" : ": non-zero exit") + "]";
  }
  std::filesystem::remove_all(dir);
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical" + bad};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "Hermite identities", 1.0, hermite_identities},
      {2, "Girsanov martingale", 30.0, girsanov_martingale},
      {3, "Null-model unbiased estimator", 5.0, null_model_unbiased},
      {4, "OU cross-validation", 300.0, ou_cross_validation},
      {5, "First-order representation", 120.0, first_order_constant_drift},
      {6, "Sharp bang-bang bracket", 300.0, sharp_bangbang_bracket},
      {7, "Tamed one-step eps^2 law", 300.0, tamed_epsilon_law},
      {8, "Path-dependent EM rate", 600.0, path_dependent_rate},
      {9, "Beta integral", 10.0, beta_integral},
      {10, "Parametrix majorization", 30.0, parametrix_majorization},
      {11, "Fourier diagnostic oracle", 60.0, fourier_oracle},
      {12, "CLI determinism", 120.0, cli_determinism},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("criterion %2d %s: %s | %s | %.1f s (limit %.0f s%s)\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
