#pragma once

// Snapshot, NDJSON and trace-directory files.
//
// Snapshot: `sphereflow-field v1 d=<d> D=<D> n=<n> t=<t>`, then one line per
// node in row-major order with D+1 values printed to round-trip precision.

#include <iosfwd>
#include <string>
#include <vector>

#include "sphereflow/diagnostics.hpp"
#include "sphereflow/domain_grid.hpp"
#include "sphereflow/flow.hpp"

namespace sphereflow {

void write_snapshot(std::ostream& out, const SphereField& u);
/// Throws IoError on malformed input or a header that does not match grid.
SphereField read_snapshot(std::istream& in, GridPtr grid);

void write_snapshot_file(const std::string& path, const SphereField& u);
SphereField read_snapshot_file(const std::string& path, GridPtr grid);

/// `{"t","dirichlet","penalty","sup_norm","ut_sq","min_last"[,"sup_v"]}`.
std::string step_record_json(const StepRecord& r);
/// `{"kind","z0","R","lhs","rhs","defect","fitted_C"}`.
std::string diagnostic_record_json(const DiagnosticRecord& r);

/// Writes text to path, throwing IoError on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);
/// Creates the directory (and parents); IoError when it cannot be written.
void ensure_directory(const std::string& path);

}  // namespace sphereflow
