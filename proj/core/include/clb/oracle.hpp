#pragma once

#include <vector>

#include "clb/model.hpp"
#include "clb/tensor.hpp"

namespace clb {

/// Dense n-qubit state; site 0 is the most significant bit of the amplitude index.
struct PureState {
  long n_qubits = 0;
  VectorXcd amplitudes;
};

/// |+>^N with CZ applied on every link of an lx x ly open patch.
/// Sites are indexed x + lx*y, x fastest.
PureState exact_cluster_state(long lx, long ly);

/// Post-select <m| on each listed site; returns the residual state on the
/// remaining qubits (kept in index order) and the total selection probability.
std::pair<PureState, double> apply_measurements(const PureState& state, MeasurementAngle theta,
                                                const std::vector<long>& sites);

/// Contract the model's site tensors over the patch and compare against the
/// circuit construction.
double validate_peps(long lx, long ly);

/// Evolve the finite lower-boundary MPS through ly measured rows at bond
/// dimension chi (chi = 0 keeps everything), apply the upper-boundary map and
/// compare against the dense post-selected boundary state.
double validate_mpo_evolution(long lx, long ly, MeasurementAngle theta, long chi);

// --- helpers used by the validation suite and tests ---

/// Expectation of the stabilizer X_i prod_{<ij>} Z_j on an lx x ly patch state.
double stabilizer_expectation(const PureState& state, long lx, long ly, long site);

/// Entanglement entropy across a cut keeping the first `prefix` qubits.
double prefix_entropy(const PureState& state, long prefix);

/// Dense amplitudes of the model PEPS on an open patch (unnormalized).
VectorXcd peps_patch_amplitudes(long lx, long ly);

}  // namespace clb
