#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clb/model.hpp"
#include "clb/umps.hpp"

namespace clb {

/// Finite-chain MPS, site tensors (left, phys, right). Open chains have
/// dimension-1 edge bonds; periodic chains close the bond by a trace.
struct FiniteMPS {
  long n = 0;
  Boundary bc = Boundary::Open;
  long chi = 0;  // largest bond dimension
  std::vector<Tensor> tensors;
};

enum class PhaseBranch { Trivial, TwoFold };

struct GroundResult {
  Complex e0{0, 0};
  FiniteMPS psi;
  long sweeps = 0;
  double residual = 0.0;
  bool converged = false;
};

struct ExcitedResult {
  Complex e1{0, 0};
  FiniteMPS psi;
  long sweeps = 0;
  double residual = 0.0;
  bool converged = false;
  double overlap = 0.0;  // |<psi1|psi0>|, deflation leak
};

struct SpectrumPair {
  double theta = 0.0;
  long n = 0;
  Complex e0{0, 0}, e1{0, 0};
  double gap = 0.0;  // |e0| - |e1|
  PhaseBranch branch0 = PhaseBranch::Trivial;
  PhaseBranch branch1 = PhaseBranch::Trivial;
  double ee0 = 0.0, ee1 = 0.0;  // mid-chain entanglement entropies
  bool converged = false;
};

struct FiniteOptions {
  double tol = 1e-9;
  long max_sweeps = 48;
  std::uint64_t seed = 5;
  const FiniteMPS* warm_start = nullptr;
  long threads = 1;  // used by gap_scan across grid points
};

/// Dominant eigenstate of the n-site row operator by variational sweeping:
/// two-site sweeps for open chains, one-site ring updates with full
/// environment recomputation for periodic ones. Eigenvalues are those of the
/// full n-site operator (not per site).
GroundResult ground_state(MeasurementAngle theta, long n, Boundary bc, long chi,
                          const FiniteOptions& opts = {});

/// Dominant eigenstate of H - e0 |psi0><psi0|.
ExcitedResult excited_state(MeasurementAngle theta, long n, Boundary bc, long chi, const FiniteMPS& psi0,
                            Complex e0, const FiniteOptions& opts = {});

/// Ground + excited states over a (theta, n) grid with branch labels from the
/// mid-chain pair degeneracy; neighboring grid points warm-start each other.
std::vector<SpectrumPair> gap_scan(std::span<const double> thetas, std::span<const long> ns, Boundary bc,
                                   long chi, const FiniteOptions& opts = {});

// --- finite-MPS utilities (shared with the oracle checks) ---

/// Finite measured lower-boundary row with open-edge pin/sum termination.
FiniteMPS lower_boundary_finite(MeasurementAngle theta, long n);

/// One finite row-operator layer (open chain), then SVD compression to chi_max
/// (chi_max = 0 keeps everything above weight_tol). Not normalized.
FiniteMPS apply_finite_row(const FiniteMPS& psi, const RowOperator& h, long chi_max,
                           double weight_tol = 1e-14);

VectorXcd mps_to_statevector(const FiniteMPS& psi);  // n <= 24
Complex mps_inner(const FiniteMPS& bra, const FiniteMPS& ket);
double mps_normalize(FiniteMPS& psi);
SchmidtSpectrum mid_chain_spectrum(const FiniteMPS& psi);

}  // namespace clb
