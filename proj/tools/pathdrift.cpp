// pathdrift command line tool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathdrift/closedforms.hpp"
#include "pathdrift/config.hpp"
#include "pathdrift/convergence.hpp"
#include "pathdrift/fourier.hpp"
#include "pathdrift/girsanov.hpp"
#include "pathdrift/parametrix.hpp"
#include "pathdrift/report.hpp"
#include "pathdrift/schemes.hpp"
#include "pathdrift/selftest.hpp"

namespace pd = pathdrift;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string out = "-";
  std::string json;
  bool timing = false;
};

std::string join_vector(const pd::Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ";" : "") + pd::format_real(v[i]);
  return s;
}

pd::Vector to_vector(const std::vector<double>& v, std::size_t dim, const char* name) {
  if (v.size() == 1 && dim > 1) return pd::Vector::Constant(static_cast<Eigen::Index>(dim), v[0]);
  if (v.size() != dim) {
    throw pd::ConfigError(std::string("--") + name, "expected " + std::to_string(dim) + " components");
  }
  return Eigen::Map<const pd::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// "2^-3..2^-7" expands to 2^-3, 2^-4, ..., 2^-7; otherwise a comma list of
/// reals or 2^k terms.
std::vector<double> parse_eps(const std::string& text) {
  const auto power = [&](const std::string& tok) -> double {
    std::size_t used = 0;
    try {
      if (tok.rfind("2^", 0) == 0) {
        const double k = std::stod(tok.substr(2), &used);
        if (used + 2 != tok.size()) throw std::invalid_argument(tok);
        return std::ldexp(1.0, static_cast<int>(k));
      }
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::logic_error&) {
      throw pd::ConfigError("--eps", "cannot parse '" + tok + "'");
    }
  };
  std::vector<double> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const std::string a = text.substr(0, dots);
    const std::string b = text.substr(dots + 2);
    if (a.rfind("2^", 0) != 0 || b.rfind("2^", 0) != 0) throw pd::ConfigError("--eps", "ranges must read 2^a..2^b");
    const int ka = static_cast<int>(std::lround(std::log2(power(a))));
    const int kb = static_cast<int>(std::lround(std::log2(power(b))));
    const int step = ka <= kb ? 1 : -1;
    for (int k = ka;; k += step) {
      out.push_back(std::ldexp(1.0, k));
      if (k == kb) break;
    }
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(power(tok));
  if (out.empty()) throw pd::ConfigError("--eps", "empty list");
  return out;
}

pd::CountingSpec parse_counting(const std::string& text, double t) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw pd::ConfigError("--counting", "expected exp:LAMBDA or beta:BETA");
  const std::string kind = text.substr(0, colon);
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw pd::ConfigError("--counting", "cannot parse '" + text + "'");
  }
  pd::CountingSpec spec;
  if (kind == "exp") {
    spec = pd::CountingSpec::exponential(v);
  } else if (kind == "beta") {
    spec = pd::CountingSpec::beta_law(v, t);
  } else {
    throw pd::ConfigError("--counting", "unknown law '" + kind + "'");
  }
  try {
    spec.validate();
  } catch (const pd::DomainError& e) {
    throw pd::ConfigError("--counting", e.what());
  }
  return spec;
}

/// Options that change the numbers, in declaration order, for the digest.
std::string canonical_options(const CLI::App& sub) {
  static const std::set<std::string> ignored{"--out", "--json", "--timing", "--workers", "--help"};
  std::string s = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (ignored.count(name)) continue;
    s += "\n" + name + "=";
    for (const auto& r : opt->results()) s += r + ",";
  }
  return s;
}

/// PATHDRIFT_SEED takes precedence over --seed.
void apply_seed_env(Common& common) {
  const char* env = std::getenv("PATHDRIFT_SEED");
  if (env == nullptr) return;
  try {
    std::size_t used = 0;
    common.seed = std::stoull(env, &used);
    if (env[used] != '\0') throw std::invalid_argument(env);
  } catch (const std::logic_error&) {
    throw pd::ConfigError("PATHDRIFT_SEED", "expected an unsigned integer");
  }
}

class Runner {
 public:
  Runner(CLI::App& app, Common& common) : app_(app), common_(common) {}

  /// Registers a subcommand whose body fills the report table.
  CLI::App* add(const std::string& name, const std::string& help, std::function<void(pd::ExperimentReport&)> body) {
    CLI::App* sub = app_.add_subcommand(name, help);
    sub->callback([this, sub, body = std::move(body)] {
      apply_seed_env(common_);
      pd::ExperimentReport report;
      report.command = sub->get_name();
      report.artifact_version = PATHDRIFT_VERSION;
      report.seed = {common_.seed, 0};
      const auto start = std::chrono::steady_clock::now();
      body(report);
      if (common_.timing) {
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        report.wall_ms = ms.count();
        const auto col = std::find(report.table.columns.begin(), report.table.columns.end(), "wall_ms");
        if (col != report.table.columns.end()) {
          const auto j = static_cast<std::size_t>(col - report.table.columns.begin());
          for (auto& row : report.table.rows) row[j] = static_cast<long long>(*report.wall_ms);
        }
      }
      std::string digest_input = canonical_options(*sub) + "\nseed=" + std::to_string(common_.seed);
      for (const auto& f : model_texts_) digest_input += "\n" + f;
      report.config_digest = pd::fnv1a(digest_input);
      emit(report);
    });
    return sub;
  }

  pd::PathDependentModel model(const std::string& path) {
    const std::string text = pd::read_text_file(path);
    model_texts_.push_back(text);
    try {
      return pd::parse_model(text);
    } catch (const pd::ConfigError& e) {
      throw pd::ConfigError(path + ": " + e.where(), std::string(e.what()).substr(e.where().size() + 2));
    }
  }

  [[nodiscard]] pd::ExecPolicy exec() const { return pd::ExecPolicy{common_.workers}; }
  [[nodiscard]] std::uint64_t seed() const { return common_.seed; }

 private:
  void emit(const pd::ExperimentReport& report) const {
    if (report.table.rows.empty()) throw pd::NumericError(report.command + ": produced no rows");
    if (common_.out == "-" || common_.out == "csv") {
      report.write_csv(std::cout);
    } else {
      std::ofstream f(common_.out, std::ios::binary);
      if (!f) throw pd::ConfigError(common_.out, "cannot open output file");
      report.write_csv(f);
    }
    if (!common_.json.empty()) {
      std::ofstream f(common_.json, std::ios::binary);
      if (!f) throw pd::ConfigError(common_.json, "cannot open JSON file");
      f << report.to_json().dump(2) << '\n';
    }
  }

  CLI::App& app_;
  Common& common_;
  std::vector<std::string> model_texts_;
};

pd::Cell empty() { return std::monostate{}; }
pd::Cell real(double v) { return v; }
pd::Cell integer(std::size_t v) { return static_cast<long long>(v); }
pd::Cell text(std::string s) { return s; }
pd::Cell se_cell(const pd::DensityEstimate& e) { return e.n_samples >= 2 ? real(e.stderr_) : empty(); }

const std::vector<std::string> kDensityColumns{"method", "t", "x", "y", "estimate", "stderr",
                                               "n_samples", "bandwidth", "seed", "wall_ms"};

std::vector<pd::Cell> density_row(const pd::DensityEstimate& e, double t, const pd::Vector& x, const pd::Vector& y) {
  return {text(e.method),
          real(t),
          text(join_vector(x)),
          text(join_vector(y)),
          real(e.value),
          se_cell(e),
          integer(e.n_samples),
          e.bandwidth ? real(*e.bandwidth) : empty(),
          static_cast<long long>(e.seed.master_seed),
          empty()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-dependent SDE density and discretization experiments"};
  app.set_version_flag("--version", std::string(PATHDRIFT_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Master seed (PATHDRIFT_SEED overrides)");
  app.add_option("--workers", common.workers, "Worker threads, 0 = all cores");
  app.add_option("--out", common.out, "CSV output file, '-' or 'csv' for stdout");
  app.add_option("--json", common.json, "Also write a JSON mirror to this file");
  app.add_flag("--timing", common.timing, "Fill the wall_ms column (breaks byte-for-byte reproducibility)");
  Runner run(app, common);

  // simulate ---------------------------------------------------------------
  std::string sim_model;
  std::vector<double> sim_x{0.0};
  double sim_t = 1.0;
  std::size_t sim_steps = 64;
  std::size_t sim_samples = 8;
  {
    auto* sub = run.add("simulate", "Euler-Maruyama terminal states", [&](pd::ExperimentReport& r) {
      const auto model = run.model(sim_model);
      const pd::Vector x = to_vector(sim_x, model.dim, "x");
      r.table.columns = {"method", "t", "sample", "x", "terminal", "seed", "wall_ms"};
      const pd::TimeGrid grid = pd::uniform_grid(sim_t, sim_steps);
      auto parts = pd::run_blocks(sim_samples, run.exec(), [&](std::size_t b, std::size_t e) {
        pd::EulerSimulator sim(model, grid);
        std::vector<pd::Vector> out;
        for (std::size_t i = b; i < e; ++i) {
          pd::Rng rng(pd::SeedSpec{run.seed(), i});
          sim.simulate(x, rng);
          out.emplace_back(sim.terminal());
          if (!out.back().allFinite()) throw pd::NumericError("simulate: non-finite state");
        }
        return out;
      });
      std::size_t i = 0;
      for (const auto& p : parts) {
        for (const auto& v : p) {
          r.table.add({text("euler-maruyama"), real(sim_t), integer(i++), text(join_vector(x)), text(join_vector(v)),
                       static_cast<long long>(run.seed()), empty()});
        }
      }
    });
    sub->add_option("--model", sim_model, "Model file (JSON)")->required();
    sub->add_option("--x", sim_x, "Initial state")->delimiter(',');
    sub->add_option("--t", sim_t, "Horizon");
    sub->add_option("--steps", sim_steps, "Euler steps");
    sub->add_option("--samples", sim_samples, "Number of paths");
  }

  // density ----------------------------------------------------------------
  std::string den_model;
  std::string den_method = "girsanov";
  std::vector<double> den_x{0.0};
  std::vector<double> den_y{0.0};
  double den_t = 1.0;
  std::size_t den_samples = 10000;
  std::optional<double> den_bandwidth;
  std::size_t den_quad = 32;
  std::size_t den_steps = 64;
  {
    auto* sub = run.add("density", "Girsanov kernel or first-order density estimate", [&](pd::ExperimentReport& r) {
      const auto model = run.model(den_model);
      const pd::Vector x = to_vector(den_x, model.dim, "x");
      const pd::Vector y = to_vector(den_y, model.dim, "y");
      r.table.columns = kDensityColumns;
      pd::DensityEstimate e;
      if (den_method == "girsanov") {
        const double h = den_bandwidth.value_or(pd::default_bandwidth(den_t, den_samples, model.dim));
        e = pd::density_girsanov_kernel(model, x, y, den_t, h, den_samples, run.seed(),
                                        pd::KernelOptions{den_steps, run.exec()});
      } else {
        e = pd::density_first_order(model, x, y, den_t, den_samples, run.seed(),
                                    pd::FirstOrderOptions{den_quad, den_steps, run.exec()});
      }
      r.table.add(density_row(e, den_t, x, y));
    });
    sub->add_option("--model", den_model, "Model file (JSON)")->required();
    sub->add_option("--method", den_method, "Estimator")->check(CLI::IsMember({"girsanov", "first-order"}));
    sub->add_option("--x", den_x, "Initial state")->delimiter(',');
    sub->add_option("--y", den_y, "Target point")->delimiter(',');
    sub->add_option("--t", den_t, "Horizon");
    sub->add_option("--samples", den_samples, "Monte Carlo samples");
    sub->add_option("--bandwidth", den_bandwidth, "Kernel bandwidth, default (t/N)^(1/(d+4))");
    sub->add_option("--quad-nodes", den_quad, "Gauss-Legendre nodes in time (first-order)");
    sub->add_option("--steps", den_steps, "Euler steps of the driftless path");
  }

  // unbiased ---------------------------------------------------------------
  std::string unb_model;
  std::vector<double> unb_x{0.0};
  std::vector<double> unb_y{0.0};
  double unb_t = 1.0;
  std::string unb_counting = "exp:1";
  std::size_t unb_samples = 10000;
  {
    auto* sub = run.add("unbiased", "Unbiased parametrix density estimate", [&](pd::ExperimentReport& r) {
      const auto model = run.model(unb_model);
      const pd::Vector x = to_vector(unb_x, model.dim, "x");
      const pd::Vector y = to_vector(unb_y, model.dim, "y");
      const pd::CountingSpec spec = parse_counting(unb_counting, unb_t);
      const auto u = pd::unbiased_density(model, x, y, unb_t, spec, unb_samples, run.seed(), run.exec());
      r.table.columns = kDensityColumns;
      r.table.columns.insert(r.table.columns.end() - 1, {"counting", "mean_jumps", "kurtosis"});
      auto row = density_row(u.estimate, unb_t, x, y);
      row.insert(row.end() - 1, {text(spec.tag()), real(u.mean_jumps), real(u.kurtosis)});
      r.table.add(std::move(row));
    });
    sub->add_option("--model", unb_model, "Model file (JSON)")->required();
    sub->add_option("--x", unb_x, "Initial state")->delimiter(',');
    sub->add_option("--y", unb_y, "Target point")->delimiter(',');
    sub->add_option("--t", unb_t, "Horizon");
    sub->add_option("--counting", unb_counting, "Inter-arrival law exp:LAMBDA or beta:BETA");
    sub->add_option("--samples", unb_samples, "Number of chains");
  }

  // bangbang ---------------------------------------------------------------
  std::vector<double> bb_x{0.0};
  std::vector<double> bb_y{0.0};
  double bb_t = 1.0;
  double bb_bsup = 0.5;
  {
    auto* sub = run.add("bangbang", "Sharp two-sided bracket for bounded drift", [&](pd::ExperimentReport& r) {
      if (bb_x.size() != bb_y.size()) throw pd::ConfigError("--y", "must match the dimension of --x");
      const pd::Vector x = to_vector(bb_x, bb_x.size(), "x");
      const pd::Vector y = to_vector(bb_y, bb_x.size(), "y");
      const auto [lo, hi] = pd::sharp_bracket(x, y, bb_t, bb_bsup);
      r.table.columns = {"method", "t", "x", "y", "b_sup", "lower", "upper", "seed", "wall_ms"};
      r.table.add({text("bang-bang"), real(bb_t), text(join_vector(x)), text(join_vector(y)), real(bb_bsup), real(lo),
                   real(hi), static_cast<long long>(run.seed()), empty()});
    });
    sub->add_option("--x", bb_x, "Initial state")->delimiter(',');
    sub->add_option("--y", bb_y, "Target point")->delimiter(',');
    sub->add_option("--t", bb_t, "Horizon");
    sub->add_option("--bsup", bb_bsup, "Sup norm of the drift");
  }

  // bounds -----------------------------------------------------------------
  std::string bd_model;
  std::vector<double> bd_x{0.0};
  std::vector<double> bd_grid{-2.0, -1.0, 0.0, 1.0, 2.0};
  double bd_t = 1.0;
  std::size_t bd_samples = 20000;
  std::optional<double> bd_bandwidth;
  std::optional<double> bd_bsup;
  bool bd_calibrate = false;
  double bd_spread = 0.25;
  {
    auto* sub = run.add("bounds", "Kernel densities against Gaussian envelopes", [&](pd::ExperimentReport& r) {
      const auto model = run.model(bd_model);
      const pd::Vector x = to_vector(bd_x, model.dim, "x");
      std::vector<pd::Vector> ys;
      for (double g : bd_grid) {
        pd::Vector y = x;
        y[0] += g;
        ys.push_back(y);
      }
      const double h = bd_bandwidth.value_or(pd::default_bandwidth(bd_t, bd_samples, model.dim));
      const auto est =
          pd::density_girsanov_kernel_multi(model, x, ys, bd_t, h, bd_samples, run.seed(), pd::KernelOptions{64, run.exec()});
      r.table.columns = kDensityColumns;
      r.table.columns.insert(r.table.columns.end() - 1, {"lower", "upper", "verdict"});
      std::optional<pd::GaussianEnvelope> env;
      if (bd_calibrate) {
        std::vector<pd::EnvelopePoint> pts;
        for (std::size_t j = 0; j < ys.size(); ++j) pts.push_back({x, ys[j], bd_t, est[j]});
        env = pd::calibrate_envelope(pts, bd_spread).envelope;
      }
      for (std::size_t j = 0; j < ys.size(); ++j) {
        auto row = density_row(est[j], bd_t, x, ys[j]);
        std::vector<pd::Cell> extra{empty(), empty(), empty()};
        if (bd_bsup) {
          const auto [lo, hi] = pd::sharp_bracket(x, ys[j], bd_t, *bd_bsup);
          extra = {real(lo), real(hi), text(pd::to_string(pd::sharp_bound_verdict(est[j], x, ys[j], bd_t, *bd_bsup)))};
        } else if (env) {
          const auto [lo, hi] = pd::envelope_bracket(*env, x, ys[j], bd_t);
          extra = {real(lo), real(hi),
                   text(pd::to_string(pd::interval_verdict(est[j].value, est[j].stderr_, lo, hi)))};
        }
        row.insert(row.end() - 1, extra.begin(), extra.end());
        r.table.add(std::move(row));
      }
    });
    sub->add_option("--model", bd_model, "Model file (JSON)")->required();
    sub->add_option("--x", bd_x, "Initial state")->delimiter(',');
    sub->add_option("--grid", bd_grid, "Offsets of y from x along the first axis")->delimiter(',');
    sub->add_option("--t", bd_t, "Horizon");
    sub->add_option("--samples", bd_samples, "Monte Carlo samples");
    sub->add_option("--bandwidth", bd_bandwidth, "Kernel bandwidth, default (t/N)^(1/(d+4))");
    sub->add_option("--bsup", bd_bsup, "Check the sharp bounded-drift bracket (requires sigma = I)");
    sub->add_flag("--calibrate", bd_calibrate, "Fit a Gaussian envelope to the estimates");
    sub->add_option("--spread", bd_spread, "Relative widening of the calibrated variance");
  }

  // convergence ------------------------------------------------------------
  std::string cv_spec;
  std::string cv_mode = "density";
  std::vector<std::size_t> cv_levels{64, 128, 256, 512};
  std::size_t cv_m = 4;
  std::vector<double> cv_x{0.0};
  std::vector<double> cv_y{0.0};
  double cv_t = 1.0;
  std::size_t cv_samples = 20000;
  double cv_bandwidth = 0.1;
  double cv_p = 2.0;
  std::size_t cv_fine = 0;
  std::size_t cv_bootstrap = 200;
  {
    auto* sub = run.add("convergence", "Discretization error of the path functional", [&](pd::ExperimentReport& r) {
      const auto model = run.model(cv_spec);
      const pd::FunctionalSpec& spec = pd::functional_spec(model);
      if (!model.diffusion_constant()) throw pd::UnsupportedError("convergence: requires constant diffusion");
      const pd::Vector x = to_vector(cv_x, model.dim, "x");
      r.table.columns = {"mode", "n", "m", "error", "stderr", "slope", "slope_lo", "slope_hi",
                         "tail_mass", "seed", "wall_ms"};
      const auto seed = static_cast<long long>(run.seed());
      if (cv_mode == "drift") {
        const auto rows = pd::drift_discretization_error(spec, model.diffusion.constant_matrix(), x, cv_t, cv_levels, cv_m,
                                                         cv_p, cv_samples, run.seed(),
                                                         pd::DriftGapOptions{cv_fine, 64, run.exec()});
        std::vector<double> errs;
        for (const auto& row : rows) errs.push_back(row.error);
        const double slope = pd::detail::rate_slope(cv_levels, errs);
        for (const auto& row : rows) {
          r.table.add({text("drift"), integer(row.n), integer(cv_m), real(row.error), real(row.stderr_), real(slope),
                       empty(), empty(), real(spec.tail_mass(cv_m)), seed, empty()});
        }
      } else {
        const pd::Vector y = to_vector(cv_y, model.dim, "y");
        const auto fit = pd::density_rate_experiment(spec, model, x, y, cv_t, cv_levels, cv_m, cv_samples, cv_bandwidth,
                                                     run.seed(), pd::RateOptions{cv_fine, cv_bootstrap, run.exec()});
        for (const auto& lv : fit.levels) {
          r.table.add({text("density"), integer(lv.n), integer(cv_m), real(lv.error), real(lv.stderr_),
                       real(fit.fitted_slope), real(fit.slope_ci.first), real(fit.slope_ci.second),
                       real(fit.tail_mass), seed, empty()});
        }
      }
    });
    sub->add_option("--spec", cv_spec, "Model file with a functional drift")->required();
    sub->add_option("--mode", cv_mode, "density or drift")->check(CLI::IsMember({"density", "drift"}));
    sub->add_option("--levels", cv_levels, "Discretization levels n")->delimiter(',');
    sub->add_option("--m", cv_m, "Delay truncation");
    sub->add_option("--x", cv_x, "Initial state")->delimiter(',');
    sub->add_option("--y", cv_y, "Target point (density mode)")->delimiter(',');
    sub->add_option("--t", cv_t, "Horizon");
    sub->add_option("--samples", cv_samples, "Monte Carlo samples");
    sub->add_option("--bandwidth", cv_bandwidth, "Kernel bandwidth (density mode)");
    sub->add_option("--p", cv_p, "Moment order (drift mode)");
    sub->add_option("--fine-steps", cv_fine, "Reference grid steps, 0 = 4 x finest level");
    sub->add_option("--bootstrap", cv_bootstrap, "Bootstrap resamples for the slope interval");
  }

  // tamed-error ------------------------------------------------------------
  std::string te_model;
  double te_x = 1.0;
  double te_t = 1.0;
  std::string te_eps = "2^-3..2^-7";
  std::size_t te_reps = 10000;
  double te_ell = 0.25;
  std::size_t te_fine = 4096;
  {
    auto* sub = run.add("tamed-error", "Strong error of the one-step tamed scheme", [&](pd::ExperimentReport& r) {
      const auto model = run.model(te_model);
      auto eps = parse_eps(te_eps);
      std::sort(eps.begin(), eps.end(), std::greater<>());
      const auto sweep = pd::strong_error_sweep(model, te_x, te_t, eps, te_reps, run.seed(), te_ell, te_fine, run.exec());
      r.table.columns = {"method", "epsilon", "mse", "stderr", "replications", "blowups",
                         "slope", "fine_h", "seed", "wall_ms"};
      for (const auto& row : sweep.rows) {
        r.table.add({text("tamed-one-step"), real(row.epsilon), real(row.mean_square_error), real(row.stderr_),
                     integer(row.replications), integer(row.blowups), real(sweep.slope), real(sweep.fine_h),
                     static_cast<long long>(run.seed()), empty()});
      }
    });
    sub->add_option("--model", te_model, "Model file (JSON), dim = 1")->required();
    sub->add_option("--x", te_x, "Initial state");
    sub->add_option("--t", te_t, "Horizon");
    sub->add_option("--eps", te_eps, "Epsilons: 2^-a..2^-b or a comma list");
    sub->add_option("--replications", te_reps, "Coupled replications");
    sub->add_option("--ell", te_ell, "Taming exponent");
    sub->add_option("--fine-steps", te_fine, "Reference steps per unit time before the window");
  }

  // cf-diagnostic ----------------------------------------------------------
  std::string cf_model;
  double cf_x = 0.0;
  double cf_t = 1.0;
  double cf_delta = 0.5;
  std::vector<double> cf_xi{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
  std::size_t cf_samples = 20000;
  std::size_t cf_fine = 256;
  {
    auto* sub = run.add("cf-diagnostic", "Smoothed characteristic function decay", [&](pd::ExperimentReport& r) {
      const auto model = run.model(cf_model);
      const auto d = pd::cf_decay_diagnostic(model, cf_x, cf_t, cf_delta, cf_xi, cf_samples, cf_fine, run.seed(),
                                             pd::CfOptions{0.25, run.exec()});
      r.table.columns = {"method", "t", "xi", "modulus", "stderr", "real", "imag",
                         "l2_integral", "tail_exponent", "seed", "wall_ms"};
      for (const auto& row : d.rows) {
        r.table.add({text(d.tamed ? "cf-tamed" : "cf-euler"), real(cf_t), real(row.xi), real(row.modulus),
                     real(row.stderr_), real(row.real), real(row.imag), real(d.l2_integral), real(d.tail_exponent),
                     static_cast<long long>(run.seed()), empty()});
      }
    });
    sub->add_option("--model", cf_model, "Model file (JSON), dim = 1")->required();
    sub->add_option("--x", cf_x, "Initial state");
    sub->add_option("--t", cf_t, "Horizon");
    sub->add_option("--delta", cf_delta, "Cutoff of the smoothing ramp");
    sub->add_option("--xi", cf_xi, "Frequencies")->delimiter(',');
    sub->add_option("--samples", cf_samples, "Monte Carlo samples");
    sub->add_option("--n-fine", cf_fine, "Euler steps");
  }

  // selftest ---------------------------------------------------------------
  bool selftest_failed = false;
  run.add("selftest", "Closed-form sanity checks", [&](pd::ExperimentReport& r) {
    r.table.columns = {"check", "pass", "detail"};
    for (const auto& res : pd::run_selftest()) {
      r.table.add({text(res.name), text(res.pass ? "pass" : "fail"), text(res.detail)});
      selftest_failed = selftest_failed || !res.pass;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const pd::ConfigError& e) {
    std::cerr << "config error at " << e.where() << ": " << std::string(e.what()).substr(e.where().size() + 2) << '\n';
    return kExitConfig;
  } catch (const pd::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const pd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return selftest_failed ? kExitNumeric : 0;
}
