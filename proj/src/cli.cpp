#include "sphereflow/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sphereflow/chart.hpp"
#include "sphereflow/config.hpp"
#include "sphereflow/diagnostics.hpp"
#include "sphereflow/errors.hpp"
#include "sphereflow/field_io.hpp"
#include "sphereflow/harness.hpp"
#include "sphereflow/parallel.hpp"

namespace sphereflow {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string snapshot_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "field_%06zu.txt", k);
  return buf;
}

std::vector<double> z0_of(double t, std::span<const double> x) {
  std::vector<double> z{t};
  z.insert(z.end(), x.begin(), x.end());
  return z;
}

// Trace directory layout: steps.ndjson, snapshots/, diagnostics.ndjson and
// manifest.json. Returns the relative paths of the data files.
std::vector<std::string> write_trace(const std::string& dir, const FlowTrace& trace) {
  std::vector<std::string> outputs;
  std::string steps;
  for (const StepRecord& r : trace.log) steps += step_record_json(r) + '\n';
  write_text_file((fs::path(dir) / "steps.ndjson").string(), steps);
  outputs.push_back("steps.ndjson");
  ensure_directory((fs::path(dir) / "snapshots").string());
  for (std::size_t k = 0; k < trace.checkpoints.size(); ++k) {
    const std::string rel = "snapshots/" + snapshot_name(k);
    write_snapshot_file((fs::path(dir) / rel).string(), trace.checkpoints[k]);
    outputs.push_back(rel);
  }
  return outputs;
}

std::vector<DiagnosticRecord> run_diagnostics(const RunConfig& cfg, const FlowTrace& trace) {
  std::vector<DiagnosticRecord> out;
  const DomainGrid& g = trace.grid();
  const double T = trace.end_time();
  const PenaltyParams pp = PenaltyParams::of(trace.config);
  // A diagnostic whose precondition this trace cannot meet is skipped, not fatal.
  auto guarded = [](const char* name, auto&& body) {
    try {
      body();
    } catch (const ContractError& e) {
      std::cerr << "skipping " << name << ": " << e.what() << '\n';
    }
  };
  if (cfg.wants("energy_check"))
    guarded("energy_check", [&] {
      const EnergyCheckReport r = global_energy_check(trace);
      const double h = g.max_spacing();
      const double scale = (trace.dt + h * h) * T;
      out.push_back({"global_energy", {T}, 0.0, r.max_excess,
                     1e-6 * r.initial_energy + r.c_bound * r.initial_energy * scale, 0.0, r.fitted_C});
    });
  if (cfg.wants("weak_residual") && trace.checkpoints.size() >= 2)
    guarded("weak_residual", [&] {
      out.push_back({"weak_residual", {T}, 0.0, weak_residual(trace, cfg.test_count), 0.0, 0.0, 0.0});
    });
  if (cfg.wants("penalty"))
    guarded("penalty", [&] {
      out.push_back({"penalty_integral", {T}, 0.0, penalty_integral(trace, pp), 0.0, 0.0, 0.0});
    });
  if (cfg.wants("one_sided"))
    guarded("one_sided", [&] {
      const OneSidedReport r = one_sided_monitor(trace, cfg.delta);
      const double v0 = r.slices.front().sup_v;
      for (const SliceMonitor& s : r.slices)
        out.push_back({"one_sided", {s.t}, 0.0, s.sup_v, v0 + r.tolerance, 0.0, s.max_grad_sq});
    });
  if (cfg.wants("singular_set"))
    guarded("singular_set", [&] {
      const SingularCandidateSet s = singular_set(trace, cfg.epsilon0, cfg.radii, cfg.anchor_stride);
      std::vector<double> x(g.dimension());
      const double rmin = *std::min_element(cfg.radii.begin(), cfg.radii.end());
      for (const SingularPoint& p : s.points) {
        g.position(p.node, x);
        out.push_back({"singular_candidate", z0_of(trace.checkpoints[p.slice].time(), x), rmin,
                       cfg.epsilon0, cfg.epsilon0, 0.0, 0.0});
      }
      out.push_back({"singular_fraction", {T}, rmin, s.flagged_fraction, 0.0, 0.0, 0.0});
    });
  if (cfg.wants("holder") && trace.checkpoints.size() >= 2)
    guarded("holder", [&] {
      const HolderReport r = holder_time_modulus(trace, Region::whole(), cfg.R0);
      out.push_back({"holder_modulus", {T}, cfg.R0, r.modulus, 0.0, 0.0, 0.0});
    });
  if (cfg.wants("epsilon_regularity"))
    guarded("epsilon_regularity", [&] {
      const EpsilonRegularityReport r =
          epsilon_regularity_report(trace, cfg.epsilon0, cfg.R0, pp, cfg.anchor_stride);
      double sup = 0.0;
      for (const auto& a : r.small_density) sup = std::max(sup, a.sup_e);
      out.push_back({"epsilon_regularity", {T}, cfg.R0, sup,
                     r.fitted_C * (1.0 / (cfg.R0 * cfg.R0) + r.boundary_c2), 0.0, r.fitted_C});
    });
  return out;
}

void write_records(const std::string& path, const std::vector<DiagnosticRecord>& recs) {
  std::string text;
  for (const auto& r : recs) text += diagnostic_record_json(r) + '\n';
  write_text_file(path, text);
}

void write_manifest(const std::string& dir, const RunConfig& cfg, const FlowTrace* trace,
                    const std::vector<std::string>& outputs, const std::string& status,
                    const std::string& failure, double seconds) {
  ojson m;
  m["version"] = kVersion;
  m["config_digest"] = config_digest(cfg);
  m["config"] = canonical_text(cfg);
  m["status"] = status;
  if (!failure.empty()) m["failure"] = failure;
  if (trace) {
    m["dt"] = trace->dt;
    m["checkpoints"] = trace->checkpoints.size();
    m["t_end"] = trace->checkpoints.empty() ? 0.0 : trace->end_time();
  }
  m["outputs"] = outputs;
  m["threads"] = thread_count();
  m["wall_clock_seconds"] = seconds;
  write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + '\n');
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int command_run(const std::string& config_path, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = load_config(config_path);
  ensure_directory(out_dir);
  GridPtr grid = build_grid(cfg.domain);
  SphereField u0 = initial_field(cfg, grid);
  FlowConfig fcfg = cfg.flow;
  fcfg.monitor_chart = cfg.wants("one_sided");
  FlowTrace trace = run_flow(u0, fcfg);
  std::vector<std::string> outputs = write_trace(out_dir, trace);
  if (trace.failed) {
    write_manifest(out_dir, cfg, &trace, outputs, "failed", trace.failure, seconds_since(start));
    std::cerr << "numerical failure: " << trace.failure << '\n';
    return kExitNumerical;
  }
  write_records((fs::path(out_dir) / "diagnostics.ndjson").string(), run_diagnostics(cfg, trace));
  outputs.push_back("diagnostics.ndjson");
  write_manifest(out_dir, cfg, &trace, outputs, "completed", "", seconds_since(start));
  return kExitOk;
}

FlowTrace load_trace(const std::string& dir, RunConfig& cfg) {
  ojson m;
  try {
    m = ojson::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
  } catch (const ojson::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  cfg = parse_config(m.at("config").get<std::string>());
  GridPtr grid = build_grid(cfg.domain);
  FlowTrace trace;
  trace.config = cfg.flow;
  trace.dt = m.value("dt", 0.0);
  trace.config.dt = trace.dt;
  for (const auto& rel : m.at("outputs")) {
    const std::string p = rel.get<std::string>();
    if (p.rfind("snapshots/", 0) == 0)
      trace.checkpoints.push_back(read_snapshot_file((fs::path(dir) / p).string(), grid));
  }
  if (trace.checkpoints.empty()) throw IoError("trace directory holds no snapshots");
  return trace;
}

std::vector<double> read_vector(const ojson& j, const char* key) {
  std::vector<double> v;
  if (!j.contains(key)) return v;
  for (const auto& e : j.at(key)) v.push_back(e.get<double>());
  return v;
}

int command_diagnose(const std::string& trace_dir, const std::string& anchors_path,
                     const std::string& out_dir) {
  RunConfig cfg;
  const FlowTrace trace = load_trace(trace_dir, cfg);
  const std::string anchors = read_text_file(anchors_path);
  ensure_directory(out_dir);
  const PenaltyParams pp = PenaltyParams::of(trace.config);
  std::vector<DiagnosticRecord> recs;
  std::istringstream in(anchors);
  std::string line;
  int lineno = 0;
  std::optional<SphereField> h0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson a;
    try {
      a = ojson::parse(line);
    } catch (const ojson::exception& e) {
      throw ConfigError("anchors line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      const std::string kind = a.at("kind").get<std::string>();
      const double t = a.at("t").get<double>();
      const std::vector<double> x = read_vector(a, "x");
      const std::vector<double> z = z0_of(t, x);
      if (kind == "monotonicity_interior" || kind == "monotonicity_boundary") {
        MonotonicityOptions opt;
        opt.kind = kind == "monotonicity_interior" ? AnchorKind::Interior : AnchorKind::Boundary;
        opt.exponent = a.value("exponent", 0.5);
        opt.penalty = pp;
        auto rs = to_records(monotonicity_check(trace, t, x, read_vector(a, "radii"), opt));
        recs.insert(recs.end(), rs.begin(), rs.end());
      } else if (kind == "scaled_density") {
        for (double R : read_vector(a, "radii"))
          recs.push_back({kind, z, R, scaled_energy_density(trace, t, x, R), 0.0, 0.0, 0.0});
      } else if (kind == "reverse_poincare") {
        const double R = a.at("R").get<double>();
        std::optional<std::vector<double>> av;
        if (a.contains("a")) av = read_vector(a, "a");
        const auto r = reverse_poincare_check(trace, t, x, R, av);
        recs.push_back({kind, z, R, r.lhs, r.rhs, 0.0, r.fitted_C});
      } else if (kind == "hybrid") {
        if (!h0) h0 = harmonic_extension(trace.checkpoints.front()).field;
        const double R = a.at("R").get<double>();
        const auto r = hybrid_check(trace, t, x, R, a.value("epsilon0", cfg.epsilon0), *h0, pp);
        recs.push_back({kind, z, R, r.lhs,
                        r.epsilon * r.outer + r.fitted_C * r.distance / (R * R) + r.harmonic,
                        0.0, r.fitted_C});
      } else {
        throw ConfigError("anchors line " + std::to_string(lineno) + ": unknown kind '" + kind + "'");
      }
    } catch (const ojson::exception& e) {
      throw ConfigError("anchors line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  write_records((fs::path(out_dir) / "diagnostics.ndjson").string(), recs);
  return kExitOk;
}

std::vector<double> parse_lambdas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      if (pos != item.size() || !(v >= 1.0)) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("--lambda expects a comma list of numbers >= 1, got '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--lambda needs at least one value");
  return out;
}

int command_sweep(const std::string& config_path, const std::string& lambda_list,
                  const std::string& out_dir) {
  RunConfig cfg = load_config(config_path);
  const std::vector<double> lambdas = parse_lambdas(lambda_list);
  ensure_directory(out_dir);
  GridPtr grid = build_grid(cfg.domain);
  RunConfig gcfg = cfg;
  gcfg.flow.scheme = Scheme::Glhf;
  SphereField u0 = initial_field(gcfg, grid);

  bool unit = true;
  for (std::size_t i : grid->active_nodes())
    if (std::abs(u0.norm(i) - 1.0) > 1e-12) unit = false;
  // Shared step so that every run lands on the same checkpoint times.
  double dt = cfg.flow.dt;
  if (!(dt > 0.0)) {
    FlowConfig probe = gcfg.flow;
    dt = diffusive_dt_bound(probe, *grid);
    for (double l : lambdas) {
      probe.lambda = l;
      dt = std::min(dt, max_stable_dt(probe, *grid));
    }
  }
  std::optional<FlowTrace> reference;
  if (unit) {
    FlowConfig h = gcfg.flow;
    h.scheme = Scheme::ProjectedHhf;
    h.dt = dt;
    reference = run_flow(u0, h);
    if (reference->failed) throw NumericalError("projected reference run failed: " + reference->failure);
  }
  std::string summary;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    RunConfig rc = gcfg;
    rc.flow.lambda = lambdas[k];
    rc.flow.dt = dt;
    const auto start = std::chrono::steady_clock::now();
    char name[32];
    std::snprintf(name, sizeof name, "lambda_%02zu", k);
    const std::string dir = (fs::path(out_dir) / name).string();
    ensure_directory(dir);
    FlowTrace trace = run_flow(u0, rc.flow);
    auto outputs = write_trace(dir, trace);
    write_manifest(dir, rc, &trace, outputs, trace.failed ? "failed" : "completed", trace.failure,
                   seconds_since(start));
    if (trace.failed) {
      std::cerr << "numerical failure at lambda = " << lambdas[k] << ": " << trace.failure << '\n';
      return kExitNumerical;
    }
    ojson rec;
    rec["lambda"] = lambdas[k];
    rec["run"] = name;
    rec["penalty_integral"] = penalty_integral(trace, PenaltyParams::of(rc.flow));
    if (reference) rec["l2_distance"] = trace_l2_distance(trace, *reference);
    summary += rec.dump() + '\n';
  }
  write_text_file((fs::path(out_dir) / "sweep.ndjson").string(), summary);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Sphere-valued heat flow laboratory", "sphereflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string config, out, trace_dir, anchors, lambda_list;
  auto* run = app.add_subcommand("run", "Integrate a configured scenario");
  run->add_option("--config", config)->required();
  run->add_option("--out", out)->required();
  run->add_option("--threads", threads)->check(CLI::PositiveNumber);
  auto* diag = app.add_subcommand("diagnose", "Evaluate anchored diagnostics on a stored trace");
  diag->add_option("--trace", trace_dir)->required();
  diag->add_option("--anchors", anchors)->required();
  diag->add_option("--out", out)->required();
  diag->add_option("--threads", threads)->check(CLI::PositiveNumber);
  auto* sweep = app.add_subcommand("sweep", "Penalized runs along a lambda ladder");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--lambda", lambda_list)->required();
  sweep->add_option("--out", out)->required();
  sweep->add_option("--threads", threads)->check(CLI::PositiveNumber);

  std::vector<std::string> argv_store{"sphereflow"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  set_thread_count(threads);

  try {
    if (*run) return command_run(config, out);
    if (*diag) return command_diagnose(trace_dir, anchors, out);
    if (*sweep) return command_sweep(config, lambda_list, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace sphereflow
