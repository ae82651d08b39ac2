#pragma once

// JSON model files. Requires the single-header nlohmann/json on the include
// path (the pathdrift_io target provides it).

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathdrift/errors.hpp"
#include "pathdrift/linalg.hpp"
#include "pathdrift/model.hpp"

namespace pathdrift {

/// Malformed configuration. `where` is "line L, column C" for syntax errors
/// or a JSON pointer such as /drift/params/kappa for field errors.
class ConfigError : public DomainError {
 public:
  ConfigError(std::string where, const std::string& what)
      : DomainError(where + ": " + what), where_(std::move(where)) {}
  [[nodiscard]] const std::string& where() const { return where_; }

 private:
  std::string where_;
};

namespace config_detail {

using nlohmann::json;

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(child(path, key), "missing required field");
  return *it;
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "/" : path, "expected an object");
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, child(path, key));
}

inline std::string text(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline Vector vector_of(const json& v, const std::string& path, std::size_t dim) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  if (v.size() != dim) throw ConfigError(path, "expected " + std::to_string(dim) + " entries");
  Vector out(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], child(path, i));
  return out;
}

inline Matrix matrix_of(const json& v, const std::string& path, std::size_t dim) {
  if (!v.is_array() || v.size() != dim) throw ConfigError(path, "expected " + std::to_string(dim) + " rows");
  Matrix out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    const Vector row = vector_of(v[i], child(path, i), dim);
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

inline FunctionalSpec functional_of(const json& p, const std::string& path) {
  FunctionalSpec spec;
  if (p.contains("zeta")) {
    const std::string zp = child(path, "zeta");
    spec.zeta.scale = number_or(p["zeta"], zp, "scale", 1.0);
    spec.zeta.gamma = number_or(p["zeta"], zp, "gamma", 1.0);
  }
  if (p.contains("delays")) {
    const json& ds = p["delays"];
    const std::string dp = child(path, "delays");
    if (!ds.is_array()) throw ConfigError(dp, "expected an array of {tau, theta}");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string ip = child(dp, i);
      spec.delays.push_back({number(field(ds[i], ip, "tau"), child(ip, "tau")),
                             number(field(ds[i], ip, "theta"), child(ip, "theta"))});
    }
  }
  spec.tail_beyond = number_or(p, path, "tail", 0.0);
  if (p.contains("integrand")) {
    const std::string ip = child(path, "integrand");
    spec.integrand.scale = number_or(p["integrand"], ip, "scale", 1.0);
    spec.integrand.gamma = number_or(p["integrand"], ip, "gamma", 1.0);
  }
  if (p.contains("nu")) {
    const json& n = p["nu"];
    const std::string np = child(path, "nu");
    spec.nu.offset = number_or(n, np, "offset", 0.0);
    spec.nu.time = number_or(n, np, "time", 0.0);
    spec.nu.state = number_or(n, np, "state", 0.0);
    spec.nu.max = number_or(n, np, "max", 0.0);
    spec.nu.delay = number_or(n, np, "delay", 0.0);
    spec.nu.integral = number_or(n, np, "integral", 0.0);
    spec.nu.saturate = number_or(n, np, "saturate", 0.0);
  }
  spec.beta = number_or(p, path, "beta", 1.0);
  spec.gamma = number_or(p, path, "gamma", 1.0);
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
  return spec;
}

inline Drift drift_of(const json& d, const std::string& path, std::size_t dim) {
  const std::string kind = text(field(d, path, "kind"), child(path, "kind"));
  static const json empty = json::object();
  const json& p = d.contains("params") ? d["params"] : empty;
  const std::string pp = child(path, "params");
  const double scale = number_or(d, path, "scale", 1.0);
  Drift::Kind k;
  if (kind == "zero") {
    k = ZeroDrift{};
  } else if (kind == "constant") {
    k = ConstantDrift{vector_of(field(p, pp, "value"), child(pp, "value"), dim)};
  } else if (kind == "linear") {
    Vector offset = p.contains("offset") ? vector_of(p["offset"], child(pp, "offset"), dim)
                                         : Vector::Zero(static_cast<Eigen::Index>(dim));
    k = LinearDrift{matrix_of(field(p, pp, "matrix"), child(pp, "matrix"), dim), offset};
  } else if (kind == "ou") {
    const double kappa = number(field(p, pp, "kappa"), child(pp, "kappa"));
    const auto n = static_cast<Eigen::Index>(dim);
    k = LinearDrift{-kappa * Matrix::Identity(n, n), Vector::Zero(n)};
  } else if (kind == "tanh") {
    k = TanhDrift{number_or(p, pp, "scale", 1.0)};
  } else if (kind == "bangbang") {
    k = BangBangDrift{vector_of(field(p, pp, "alpha"), child(pp, "alpha"), dim),
                      vector_of(field(p, pp, "beta"), child(pp, "beta"), dim)};
  } else if (kind == "heston32") {
    if (dim != 1) throw ConfigError(child(path, "kind"), "heston32 requires dim = 1");
    k = Heston32Drift{number_or(p, pp, "lambda", 1.0), number_or(p, pp, "mu", 1.0)};
  } else if (kind == "functional") {
    k = FunctionalDrift{functional_of(p, pp)};
  } else if (kind == "sum") {
    const json& terms = field(p, pp, "terms");
    const std::string tp = child(pp, "terms");
    if (!terms.is_array() || terms.empty()) throw ConfigError(tp, "expected a non-empty array of drifts");
    SumDrift s;
    for (std::size_t i = 0; i < terms.size(); ++i) s.terms.push_back(drift_of(terms[i], child(tp, i), dim));
    k = std::move(s);
  } else {
    throw ConfigError(child(path, "kind"),
                      "unknown drift kind '" + kind +
                          "' (expected zero, constant, linear, ou, tanh, bangbang, heston32, functional, sum)");
  }
  return Drift(std::move(k), scale);
}

inline Diffusion diffusion_of(const json& d, const std::string& path, std::size_t dim) {
  std::string kind = text(field(d, path, "kind"), child(path, "kind"));
  static const json empty = json::object();
  const json& p = d.contains("params") ? d["params"] : empty;
  const std::string pp = child(path, "params");
  if (kind == "constant") {
    return ConstantDiffusion{matrix_of(field(d, path, "matrix"), child(path, "matrix"), dim)};
  }
  if (kind == "builtin") kind = text(field(p, pp, "name"), child(pp, "name"));
  if (kind == "affine") return AffineDiffusion{number_or(p, pp, "base", 1.0), number_or(p, pp, "slope", 0.0)};
  if (kind == "sine") return SineDiffusion{number_or(p, pp, "base", 1.0), number_or(p, pp, "amplitude", 0.0)};
  if (kind == "power") {
    if (dim != 1) throw ConfigError(child(path, "kind"), "power diffusion requires dim = 1");
    return PowerDiffusion{number_or(p, pp, "xi", 1.0), number_or(p, pp, "power", 1.5)};
  }
  throw ConfigError(child(path, "kind"),
                    "unknown diffusion kind '" + kind + "' (expected constant, builtin, affine, sine, power)");
}

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace config_detail

/// Parses and validates a model from JSON text.
inline PathDependentModel parse_model(const std::string& text) {
  using namespace config_detail;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character.
    const std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    throw ConfigError(line_column(text, e.byte == 0 ? 0 : e.byte - 1),
                      pos == std::string::npos ? msg : msg.substr(pos));
  }
  if (!root.is_object()) throw ConfigError("/", "model file must contain a JSON object");
  PathDependentModel model;
  const json& dj = field(root, "", "dim");
  if (!dj.is_number_integer() || dj.get<long long>() <= 0) throw ConfigError("/dim", "expected a positive integer");
  model.dim = dj.get<std::size_t>();
  model.drift = drift_of(field(root, "", "drift"), "/drift", model.dim);
  model.diffusion = diffusion_of(field(root, "", "diffusion"), "/diffusion", model.dim);
  if (root.contains("growth")) {
    const json& g = root["growth"];
    model.growth.linear_k = number_or(g, "/growth", "K", 0.0);
    if (g.contains("bound") && !g["bound"].is_null()) model.growth.bound = number(g["bound"], "/growth/bound");
    if (g.contains("sublinear")) {
      const json& s = g["sublinear"];
      if (!s.is_array()) throw ConfigError("/growth/sublinear", "expected an array of {delta, K_delta}");
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string ip = child("/growth/sublinear", i);
        model.growth.table.push_back({number(field(s[i], ip, "delta"), child(ip, "delta")),
                                      number(field(s[i], ip, "K_delta"), child(ip, "K_delta"))});
      }
    }
  }
  if (root.contains("ellipticity")) {
    model.ellipticity.lower = number_or(root["ellipticity"], "/ellipticity", "lower", 1.0);
    model.ellipticity.upper = number_or(root["ellipticity"], "/ellipticity", "upper", 1.0);
  }
  if (root.contains("holder")) {
    model.holder.alpha = number_or(root["holder"], "/holder", "alpha", 1.0);
    model.holder.norm = number_or(root["holder"], "/holder", "norm", 0.0);
  }
  try {
    model.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError("/", e.what());
  }
  return model;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PathDependentModel load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_model(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.where(), std::string(e.what()).substr(e.where().size() + 2));
  }
}

/// The functional spec of a model whose drift is a path functional.
inline const FunctionalSpec& functional_spec(const PathDependentModel& model) {
  const auto* f = std::get_if<FunctionalDrift>(&model.drift.kind());
  if (f == nullptr) throw ConfigError("/drift/kind", "expected a functional drift");
  return f->spec;
}

}  // namespace pathdrift
