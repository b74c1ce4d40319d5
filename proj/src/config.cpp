#include "sphereflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sphereflow/errors.hpp"

namespace sphereflow {

namespace {

const std::vector<std::string> kDiagnostics = {
    "energy_check", "weak_residual", "one_sided", "penalty",
    "singular_set", "holder",        "epsilon_regularity"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct LineError {
  int line;
  std::string key;
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line) + " (" + key + "): " + what);
  }
  double real(const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size() || !std::isfinite(x)) fail("not a finite number: '" + v + "'");
      return x;
    } catch (const std::logic_error&) {
      fail("not a number: '" + v + "'");
    }
  }
  int integer(const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long x = std::stol(v, &pos);
      if (pos != v.size() || x < -1000000000L || x > 1000000000L) fail("not an integer: '" + v + "'");
      return static_cast<int>(x);
    } catch (const std::logic_error&) {
      fail("not an integer: '" + v + "'");
    }
  }
  std::vector<double> reals(const std::string& v) const {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(real(item));
    if (out.empty()) fail("empty list");
    return out;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

}  // namespace

bool RunConfig::wants(const std::string& diagnostic) const {
  return std::find(diagnostics.begin(), diagnostics.end(), diagnostic) != diagnostics.end();
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  cfg.domain.dimension = 3;
  cfg.domain.shape = Shape::UnitBall;
  cfg.domain.resolution = 33;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  std::vector<std::string> seen;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const LineError at{lineno, key};
    if (value.empty()) at.fail("missing value");
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) at.fail("duplicate key");
    seen.push_back(key);

    if (key == "d") {
      cfg.domain.dimension = at.integer(value);
    } else if (key == "D") {
      cfg.scenario.target_dim = at.integer(value);
      if (cfg.scenario.target_dim < 1) at.fail("D must be >= 1");
    } else if (key == "shape") {
      if (value == "ball") cfg.domain.shape = Shape::UnitBall;
      else if (value == "box") cfg.domain.shape = Shape::Box;
      else at.fail("shape must be ball or box");
    } else if (key == "half_width") {
      cfg.domain.half_widths = at.reals(value);
    } else if (key == "n") {
      cfg.domain.resolution = at.integer(value);
    } else if (key == "scheme") {
      if (value == "glhf") cfg.flow.scheme = Scheme::Glhf;
      else if (value == "hhf") cfg.flow.scheme = Scheme::ProjectedHhf;
      else at.fail("scheme must be glhf or hhf");
    } else if (key == "lambda") {
      cfg.flow.lambda = at.real(value);
    } else if (key == "kappa") {
      cfg.flow.kappa = at.real(value);
    } else if (key == "dt") {
      if (value == "auto") {
        cfg.flow.dt = 0.0;
      } else {
        cfg.flow.dt = at.real(value);
        if (!(cfg.flow.dt > 0.0)) at.fail("dt must be positive or auto");
      }
    } else if (key == "t_end") {
      cfg.flow.t_end = at.real(value);
    } else if (key == "cfl_safety") {
      cfg.flow.cfl_safety = at.real(value);
    } else if (key == "stride") {
      cfg.flow.checkpoint_stride = at.integer(value);
    } else if (key == "scenario") {
      cfg.scenario.name = value;
      static const std::vector<std::string> names = {"constant", "equator", "smoothed_equator",
                                                     "cap", "great_circle"};
      if (std::find(names.begin(), names.end(), value) == names.end())
        at.fail("unknown scenario '" + value + "'");
    } else if (key == "rho") {
      cfg.scenario.rho = at.real(value);
    } else if (key == "theta0") {
      cfg.scenario.theta0 = at.real(value);
    } else if (key == "slope") {
      cfg.scenario.great_circle.slope = at.real(value);
    } else if (key == "amplitude") {
      cfg.scenario.great_circle.amplitude = at.real(value);
    } else if (key == "constant") {
      cfg.scenario.constant = at.reals(value);
    } else if (key == "diagnostics") {
      cfg.diagnostics = split_list(value);
      for (const auto& name : cfg.diagnostics)
        if (std::find(kDiagnostics.begin(), kDiagnostics.end(), name) == kDiagnostics.end())
          at.fail("unknown diagnostic '" + name + "'");
    } else if (key == "epsilon0") {
      cfg.epsilon0 = at.real(value);
      if (!(cfg.epsilon0 > 0.0)) at.fail("epsilon0 must be positive");
    } else if (key == "radii") {
      cfg.radii = at.reals(value);
      for (double r : cfg.radii)
        if (!(r > 0.0)) at.fail("radii must be positive");
    } else if (key == "delta") {
      cfg.delta = at.real(value);
    } else if (key == "test_count") {
      cfg.test_count = at.integer(value);
      if (cfg.test_count < 1) at.fail("test_count must be >= 1");
    } else if (key == "R0") {
      cfg.R0 = at.real(value);
      if (!(cfg.R0 > 0.0 && cfg.R0 < 1.0)) at.fail("R0 must lie in (0,1)");
    } else if (key == "anchor_stride") {
      cfg.anchor_stride = at.integer(value);
      if (cfg.anchor_stride < 1) at.fail("anchor_stride must be >= 1");
    } else {
      at.fail("unknown key");
    }
  }
  if (cfg.domain.shape == Shape::Box && cfg.domain.half_widths.size() == 1)
    cfg.domain.half_widths.assign(cfg.domain.dimension, cfg.domain.half_widths[0]);
  if (cfg.domain.shape == Shape::UnitBall && !cfg.domain.half_widths.empty())
    throw ConfigError("half_width applies to the box only");
  if (!cfg.scenario.constant.empty() &&
      static_cast<int>(cfg.scenario.constant.size()) != cfg.scenario.target_dim + 1)
    throw ConfigError("constant needs D+1 components");
  validate(cfg.domain);
  validate(cfg.flow);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_text(const RunConfig& c) {
  std::ostringstream os;
  os << "d = " << c.domain.dimension << '\n';
  os << "D = " << c.scenario.target_dim << '\n';
  os << "shape = " << (c.domain.shape == Shape::UnitBall ? "ball" : "box") << '\n';
  if (!c.domain.half_widths.empty()) os << "half_width = " << join(c.domain.half_widths) << '\n';
  os << "n = " << c.domain.resolution << '\n';
  os << "scheme = " << (c.flow.scheme == Scheme::Glhf ? "glhf" : "hhf") << '\n';
  os << "lambda = " << fmt(c.flow.lambda) << '\n';
  os << "kappa = " << fmt(c.flow.kappa) << '\n';
  os << "dt = " << (c.flow.dt > 0.0 ? fmt(c.flow.dt) : std::string("auto")) << '\n';
  os << "t_end = " << fmt(c.flow.t_end) << '\n';
  os << "cfl_safety = " << fmt(c.flow.cfl_safety) << '\n';
  os << "stride = " << c.flow.checkpoint_stride << '\n';
  os << "scenario = " << c.scenario.name << '\n';
  os << "rho = " << fmt(c.scenario.rho) << '\n';
  os << "theta0 = " << fmt(c.scenario.theta0) << '\n';
  os << "slope = " << fmt(c.scenario.great_circle.slope) << '\n';
  os << "amplitude = " << fmt(c.scenario.great_circle.amplitude) << '\n';
  if (!c.scenario.constant.empty()) os << "constant = " << join(c.scenario.constant) << '\n';
  if (!c.diagnostics.empty()) {
    os << "diagnostics = ";
    for (std::size_t i = 0; i < c.diagnostics.size(); ++i) os << (i ? "," : "") << c.diagnostics[i];
    os << '\n';
  }
  os << "epsilon0 = " << fmt(c.epsilon0) << '\n';
  os << "radii = " << join(c.radii) << '\n';
  os << "delta = " << fmt(c.delta) << '\n';
  os << "test_count = " << c.test_count << '\n';
  os << "R0 = " << fmt(c.R0) << '\n';
  os << "anchor_stride = " << c.anchor_stride << '\n';
  return os.str();
}

std::string config_digest(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical_text(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SphereField initial_field(const RunConfig& cfg, GridPtr grid) {
  const std::string& name = cfg.scenario.name;
  if ((name == "equator" || name == "smoothed_equator") && cfg.scenario.target_dim != 2)
    throw ConfigError("scenario '" + name + "' needs D = 2");
  SphereField u = make_scenario(grid, cfg.scenario);
  if (cfg.flow.scheme == Scheme::ProjectedHhf) {
    for (std::size_t i : grid->active_nodes())
      if (std::abs(u.norm(i) - 1.0) > 1e-12)
        throw ConfigError("scenario '" + name +
                          "' is not sphere-valued at every node; the projected scheme needs |u0| = 1");
  } else {
    for (std::size_t i : grid->active_nodes())
      if (u.norm(i) > 1.0 + 1e-12)
        throw ConfigError("scenario '" + name + "' violates |u0| <= 1");
  }
  return u;
}

}  // namespace sphereflow
