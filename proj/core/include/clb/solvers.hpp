#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clb/model.hpp"
#include "clb/umps.hpp"

namespace clb {

struct FixedPointResult {
  UniformMPS psi;
  Complex per_site_eigenvalue{0, 0};
  long iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

struct ProbeRow {
  double theta = 0.0;
  bool paired_power = false;
  bool paired_vumps = false;
  double pair_degeneracy_power = 0.0;
  double pair_degeneracy_vumps = 0.0;
  double ee_power = 0.0;
  double ee_vumps = 0.0;
  double cx_inf = 0.0;
  double cz_inf = 0.0;
  bool agreed = false;
  bool two_fold = false;
};

struct CriticalPointResult {
  double theta_c = 0.0;
  long chi = 0;
  std::pair<double, double> bracket{0.0, 0.0};
  std::string indicator;  // diagnostic that flipped across the bracket
  std::vector<ProbeRow> probes;
};

struct NoiseSpec {
  double theta_mean = 0.0;
  double epsilon = 0.0;  // standard deviation in radians
  std::uint64_t seed = 0;
  long layers = 1;
};

struct TrajectoryRecord {
  long layer = 0;
  double cx_100 = 0.0;
  double cz_100 = 0.0;
  double ee = 0.0;
  double theta_used = 0.0;
  bool clamped = false;
};

struct PowerStepResult {
  UniformMPS psi;
  TruncationReport report;
  double growth = 0.0;  // per-site norm growth, assuming a normalized input
};

/// One row-operator layer: bond dimension doubles, then recanonicalize,
/// truncate to chi and renormalize.
PowerStepResult power_step(const UniformMPS& psi, const RowOperator& h, long chi);

/// Fixed point by repeated layer application from the lower-boundary state.
/// Convergence is the L2 distance between successive full Schmidt spectra.
FixedPointResult power_fixed_point(MeasurementAngle theta, long chi, double tol = 1e-10,
                                   long max_layers = 3000);

struct VumpsOptions {
  double tol = 1e-10;
  long max_iters = 400;
  long warmup_layers = 24;  // coarse power-method layers used to inflate the bond dimension
  std::uint64_t seed = 11;
};

/// Variational uniform fixed point of the (non-Hermitian) row operator:
/// alternating environment solves, effective single-site/zero-site eigenproblems
/// and polar gauge updates, converging on |AC - AL C|.
FixedPointResult vumps_fixed_point(MeasurementAngle theta, long chi, double tol = 1e-10,
                                   const VumpsOptions& opts = {},
                                   const std::optional<UniformMPS>& init = std::nullopt);

struct CriticalScanOptions {
  double power_tol = 1e-9;
  long power_max_layers = 3000;
  double vumps_tol = 1e-9;
};

/// Bisection on the two-fold-degeneracy indicator (transfer-spectrum pairing,
/// corroborated by the Schmidt pair degeneracy); both solvers run at each probe.
CriticalPointResult find_theta_c(long chi, std::pair<double, double> bracket = {1.2, 1.55},
                                 double resolution = 1e-3, const CriticalScanOptions& opts = {});

/// Layer-resolved evolution with per-row Gaussian angle noise; theta samples
/// falling outside [0, pi/2] are clamped and flagged. Deterministic per seed.
std::vector<TrajectoryRecord> noisy_trajectory(const NoiseSpec& spec, long chi);

}  // namespace clb
