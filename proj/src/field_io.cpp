#include "sphereflow/field_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sphereflow/errors.hpp"

namespace sphereflow {

namespace fs = std::filesystem;

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

void write_snapshot(std::ostream& out, const SphereField& u) {
  const DomainGrid& g = u.grid();
  std::string text = "sphereflow-field v1 d=" + std::to_string(g.dimension()) +
                     " D=" + std::to_string(u.target_dimension()) +
                     " n=" + std::to_string(g.resolution()) + " t=";
  put(text, u.time());
  text += '\n';
  const int m = u.components();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    auto v = u.at(i);
    for (int c = 0; c < m; ++c) {
      if (c) text += ' ';
      put(text, v[c]);
    }
    text += '\n';
  }
  out << text;
}

SphereField read_snapshot(std::istream& in, GridPtr grid) {
  std::string header;
  if (!std::getline(in, header)) throw IoError("empty snapshot");
  int d = 0, D = 0, n = 0;
  double t = 0.0;
  if (std::sscanf(header.c_str(), "sphereflow-field v1 d=%d D=%d n=%d t=%lf", &d, &D, &n, &t) != 4)
    throw IoError("malformed snapshot header: '" + header + "'");
  if (d != grid->dimension() || n != grid->resolution())
    throw IoError("snapshot grid (d=" + std::to_string(d) + ", n=" + std::to_string(n) +
                  ") does not match the run grid");
  if (D < 1) throw IoError("snapshot target dimension must be >= 1");
  SphereField u(grid, D + 1, t);
  auto data = u.data();
  std::string line;
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    if (!std::getline(in, line)) throw IoError("snapshot truncated at node " + std::to_string(i));
    const char* p = line.c_str();
    for (int c = 0; c <= D; ++c) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw IoError("malformed snapshot line " + std::to_string(i + 2));
      data[i * (D + 1) + c] = v;
      p = end;
    }
  }
  return u;
}

void write_snapshot_file(const std::string& path, const SphereField& u) {
  std::ostringstream os;
  write_snapshot(os, u);
  write_text_file(path, os.str());
}

SphereField read_snapshot_file(const std::string& path, GridPtr grid) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read snapshot '" + path + "'");
  return read_snapshot(in, std::move(grid));
}

std::string step_record_json(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["t"] = number(r.t);
  j["dirichlet"] = number(r.dirichlet);
  j["penalty"] = number(r.penalty);
  j["sup_norm"] = number(r.sup_norm);
  j["ut_sq"] = number(r.ut_sq);
  j["min_last"] = number(r.min_last);
  if (r.sup_v) j["sup_v"] = number(*r.sup_v);
  return j.dump();
}

std::string diagnostic_record_json(const DiagnosticRecord& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  auto z = nlohmann::ordered_json::array();
  for (double v : r.z0) z.push_back(number(v));
  j["z0"] = z;
  j["R"] = number(r.R);
  j["lhs"] = number(r.lhs);
  j["rhs"] = number(r.rhs);
  j["defect"] = number(r.defect);
  j["fitted_C"] = number(r.fitted_C);
  return j.dump();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  out.close();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path))
    throw IoError("cannot create output directory '" + path + "': " + ec.message());
  // Probe writability up front so that a read-only target fails before the run.
  const fs::path probe = fs::path(path) / ".sphereflow-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory '" + path + "' is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace sphereflow
