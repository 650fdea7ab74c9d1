#include "clb/scan.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace clb {

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& scan_csv_columns() {
  static const std::vector<std::string> cols = {
      "theta",  "chi",    "ee",     "gap_ratio",           "pair_degeneracy",
      "paired", "xi_x",   "cx_inf", "cz_inf",              "per_site_eigenvalue",
      "converged", "iterations", "solver", "seed",         "wall_time_s"};
  return cols;
}

std::string scan_csv_header(const std::string& resolved_config) {
  std::ostringstream os;
  os << "# " << kVersion << "\n";
  os << "# config: " << resolved_config << "\n";
  const auto& cols = scan_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  return os.str();
}

std::string scan_record_key(double theta, long chi, const std::string& solver) {
  return fmt(theta) + "," + std::to_string(chi) + "," + solver;
}

std::string scan_csv_row(const ScanRecord& r) {
  std::ostringstream os;
  os << fmt(r.theta) << "," << r.chi << "," << fmt(r.ee) << "," << fmt(r.gap_ratio) << ","
     << fmt(r.pair_degeneracy) << "," << (r.paired ? 1 : 0) << "," << fmt(r.xi_x) << "," << fmt(r.cx_inf)
     << "," << fmt(r.cz_inf) << "," << fmt(r.per_site_eigenvalue) << "," << (r.converged ? 1 : 0) << ","
     << r.iterations << "," << r.solver << "," << r.seed << "," << fmt(r.wall_time_s) << "\n";
  return os.str();
}

std::set<std::string> scan_csv_existing_keys(const std::string& path) {
  std::set<std::string> keys;
  std::ifstream in(path);
  if (!in) return keys;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header line
      header_seen = true;
      continue;
    }
    std::istringstream is(line);
    std::string theta, chi, field;
    if (!std::getline(is, theta, ',') || !std::getline(is, chi, ',')) continue;
    // solver is the 13th column
    std::string solver;
    bool ok = true;
    for (int k = 2; k < 13; ++k) {
      if (!std::getline(is, field, ',')) {
        ok = false;
        break;
      }
      if (k == 12) solver = field;
    }
    if (ok) keys.insert(theta + "," + chi + "," + solver);
  }
  return keys;
}

std::string point_json(const ScanRecord& r, const SchmidtSpectrum& schmidt, const TransferSpectrum& transfer,
                       const std::string& resolved_config) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = resolved_config;
  j["theta"] = r.theta;
  j["chi"] = r.chi;
  j["solver"] = r.solver;
  j["seed"] = r.seed;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["per_site_eigenvalue"] = r.per_site_eigenvalue;
  j["ee"] = r.ee;
  j["gap_ratio"] = r.gap_ratio;
  j["pair_degeneracy"] = r.pair_degeneracy;
  j["paired"] = r.paired;
  j["xi_x"] = std::isinf(r.xi_x) ? -1.0 : r.xi_x;
  j["xi_x_infinite"] = std::isinf(r.xi_x);
  j["cx_inf"] = r.cx_inf;
  j["cz_inf"] = r.cz_inf;
  j["schmidt_values"] = schmidt.values;
  nlohmann::json evs = nlohmann::json::array();
  for (const auto& e : transfer.eigenvalues) evs.push_back({e.real(), e.imag()});
  j["transfer_eigenvalues"] = evs;
  return j.dump(2);
}

PointResult compute_point(double theta, long chi, const std::string& solver, std::uint64_t seed, double tol,
                          long max_iters, bool timings) {
  const auto t0 = std::chrono::steady_clock::now();
  MeasurementAngle ang(theta);
  FixedPointResult fp;
  if (solver == "power") {
    fp = power_fixed_point(ang, chi, tol, max_iters);
  } else if (solver == "vumps") {
    VumpsOptions vo;
    vo.max_iters = max_iters;
    vo.seed = seed;
    fp = vumps_fixed_point(ang, chi, tol, vo);
  } else {
    throw std::invalid_argument("unknown solver '" + solver + "'");
  }

  PointResult out;
  out.schmidt = entanglement_spectrum(canonicalize(fp.psi));
  out.transfer = transfer_spectrum(fp.psi, 8);
  const auto cx = correlator(fp.psi, PauliOp::X, 2);
  const auto cz = correlator(fp.psi, PauliOp::Z, 2);

  ScanRecord& r = out.record;
  r.theta = theta;
  r.chi = chi;
  r.ee = out.schmidt.ee;
  r.gap_ratio = out.schmidt.gap_ratio;
  r.pair_degeneracy = out.schmidt.pair_degeneracy;
  r.paired = out.transfer.paired;
  r.xi_x = out.transfer.xi_x;
  r.cx_inf = cx.inf_magnitude;
  r.cz_inf = cz.inf_magnitude;
  r.per_site_eigenvalue = std::abs(fp.per_site_eigenvalue);
  r.converged = fp.converged;
  r.iterations = fp.iterations;
  r.solver = solver;
  r.seed = seed;
  if (timings) {
    const auto t1 = std::chrono::steady_clock::now();
    r.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
  }
  return out;
}

std::string plot_script_template() {
  return R"PY(#!/usr/bin/env python3
# Generic plotting template for scan output. Reads scan.csv from the same
# directory; '#' lines are comments, first plain line is the column header.
import csv
import sys

path = sys.argv[1] if len(sys.argv) > 1 else "scan.csv"
rows = []
with open(path) as f:
    reader = csv.reader(r for r in f if not r.startswith("#"))
    header = next(reader)
    for row in reader:
        rows.append(dict(zip(header, row)))

try:
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; columns parsed:", header)
    sys.exit(0)

for chi in sorted({r["chi"] for r in rows}):
    pts = [(float(r["theta"]), float(r["ee"])) for r in rows if r["chi"] == chi]
    pts.sort()
    plt.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"chi={chi}")
plt.xlabel("theta (rad)")
plt.ylabel("entanglement entropy (nats)")
plt.legend()
plt.savefig("scan_ee.png", dpi=160)
print("wrote scan_ee.png")
)PY";
}

double parse_double_strict(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config error at '" + key + "': cannot parse number from \"" + s + "\"");
  }
}

}  // namespace clb
