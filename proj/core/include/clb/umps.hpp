#pragma once

#include <optional>
#include <vector>

#include "clb/tensor.hpp"

namespace clb {

/// Translation-invariant infinite MPS. Site tensor legs: (left bond, physical, right bond).
struct UniformMPS {
  Tensor a;
  long d = 0;
  long chi = 0;

  UniformMPS() = default;
  UniformMPS(Tensor site, long phys_dim, long bond_dim) : a(std::move(site)), d(phys_dim), chi(bond_dim) {}
};

/// Mixed canonical gauge. al/ar legs (left, physical, right); c is the chi x chi
/// center matrix whose singular values are the bond Schmidt spectrum.
struct CanonicalForm {
  Tensor al;
  Tensor ar;
  Tensor c;
  double norm_eigenvalue = 1.0;  // dominant transfer eigenvalue of the input tensor
};

struct SchmidtSpectrum {
  std::vector<double> values;   // descending, sum of squares = 1
  double ee = 0.0;              // -sum lambda^2 ln lambda^2
  double gap_ratio = 0.0;       // lambda_2 / lambda_1
  double pair_degeneracy = 0.0; // max_k |lambda_{2k}/lambda_{2k-1} - 1|
};

struct TransferSpectrum {
  std::vector<Complex> eigenvalues;  // modulus-descending, scaled so |lambda_1| = 1
  double xi_x = 0.0;                 // -1/ln|lambda_2/lambda_1|; infinity() when degenerate
  bool paired = false;               // every |lambda| > mod_floor value has a partner at -lambda
};

struct CatDecomposition {
  Eigen::Vector2cd alpha;
  Eigen::Vector2cd beta;
  double residual_t = 0.0;       // weight of the chi=2 tensor outside the period-2 off-diagonal form
  bool translation_related = false;
  bool parity_related = false;
};

enum class PauliOp { X, Z };

struct CorrelationSeries {
  PauliOp op;
  std::vector<long> distances;
  std::vector<double> values;    // C_O(L), connected
  double inf_magnitude = 0.0;    // |C_O(L -> infinity)| from the modulus-1 eigenspace of the transfer map
};

/// Gauge the state into (AL, AR, C). Handles non-injective input (degenerate-modulus
/// transfer spectrum) by selecting the positive-semidefinite fixed points.
CanonicalForm canonicalize(const UniformMPS& psi);

SchmidtSpectrum entanglement_spectrum(const CanonicalForm& cf, double pair_floor = 1e-6);

/// Leading k eigenvalues of the double tensor E = sum_s A^s (x) conj(A^s).
TransferSpectrum transfer_spectrum(const UniformMPS& psi, long k, double mod_floor = 0.1,
                                   double pair_tol = 0.02);

CorrelationSeries correlator(const UniformMPS& psi, PauliOp op, long l_max);

/// Keep the chi largest Schmidt values; renormalized.
UniformMPS truncate_to(const UniformMPS& psi, long chi);
UniformMPS truncate_to(const UniformMPS& psi, long chi, TruncationReport& report);

/// Decompose a non-injective (paired transfer spectrum) state into its two
/// period-2 product components, truncating to chi=2 first. The virtual basis is
/// labeled so that alpha is the component with the larger |<.|0>|.
CatDecomposition cat_decompose(const UniformMPS& psi);

/// Helpers shared across modules.
UniformMPS umps_from_canonical(const CanonicalForm& cf);
double entanglement_entropy(const CanonicalForm& cf);

}  // namespace clb
