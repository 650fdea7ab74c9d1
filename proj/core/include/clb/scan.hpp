#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clb/solvers.hpp"
#include "clb/umps.hpp"

namespace clb {

inline constexpr const char* kVersion = "clb 0.1.0";

/// One row of the phase-diagram output.
struct ScanRecord {
  double theta = 0.0;
  long chi = 0;
  double ee = 0.0;
  double gap_ratio = 0.0;
  double pair_degeneracy = 0.0;
  bool paired = false;
  double xi_x = 0.0;  // infinity() serializes as "inf"
  double cx_inf = 0.0;
  double cz_inf = 0.0;
  double per_site_eigenvalue = 0.0;
  bool converged = false;
  long iterations = 0;
  std::string solver;  // "power" | "vumps"
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

/// Fixed CSV schema: column names in ScanRecord order.
const std::vector<std::string>& scan_csv_columns();

std::string scan_csv_header(const std::string& resolved_config);
std::string scan_csv_row(const ScanRecord& r);

/// Keys of rows already present in a CSV file, as "theta,chi,solver" strings
/// formatted exactly like scan_csv_row writes them. Missing file -> empty set.
std::set<std::string> scan_csv_existing_keys(const std::string& path);
std::string scan_record_key(double theta, long chi, const std::string& solver);

/// Full per-point document with spectra, config echo and version.
std::string point_json(const ScanRecord& r, const SchmidtSpectrum& schmidt, const TransferSpectrum& transfer,
                       const std::string& resolved_config);

/// Compute the record (and diagnostics) for one grid point.
struct PointResult {
  ScanRecord record;
  SchmidtSpectrum schmidt;
  TransferSpectrum transfer;
};
PointResult compute_point(double theta, long chi, const std::string& solver, std::uint64_t seed, double tol,
                          long max_iters, bool timings);

/// Generic plotting-script template emitted next to scan outputs.
std::string plot_script_template();

double parse_double_strict(const std::string& s, const std::string& key);  // throws with the key path

}  // namespace clb
