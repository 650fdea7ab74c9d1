#pragma once

#include <Eigen/Core>

#include "clb/tensor.hpp"
#include "clb/umps.hpp"

namespace clb {

/// Measurement basis angle for M = cos(theta) Z + sin(theta) X, in [0, pi/2].
struct MeasurementAngle {
  double theta;
  explicit MeasurementAngle(double t);
};

/// Rank-1 projector onto the +1 eigenstate m of cos(theta) Z + sin(theta) X.
struct Projector {
  MeasurementAngle theta;
  Eigen::Matrix2d matrix;     // P = (I + Z cos + X sin) / 2
  Eigen::Vector2d direction;  // m = (cos(theta/2), sin(theta/2))
};

enum class SiteRole { BulkUnmeasured, BulkMeasured, LowerBoundaryMeasured, UpperBoundaryUnmeasured };

/// Cluster-PEPS site tensors, all virtual dimensions 2, all entries real.
/// Leg orders:
///   BulkUnmeasured          (l, r, u, d, s)   2x2x2x2x2
///   BulkMeasured            (l, r, u, d)      2x2x2x2
///   LowerBoundaryMeasured   (l, r, u)         2x2x2
///   UpperBoundaryUnmeasured (l, r, d, s)      2x2x2x2
struct SiteTensor {
  SiteRole role;
  Tensor tensor;
};

/// One measured bulk row as a uniform infinite MPO, legs (l, r, u, d) with
/// input = down, output = up. Stored in the operator normalization in which the
/// theta = pi/2 row is exactly unitary; the measured PEPS site tensor equals
/// peps_site_scale * w.
struct RowOperator {
  Tensor w;
  double peps_site_scale;
};

/// Upper-boundary virtual-to-physical map: per-site unitary then a CZ chain.
struct BoundaryMap {
  Eigen::Matrix2cd site_unitary;
  bool cz_chain;
};

enum class Boundary { Open, Periodic };

Projector build_projector(MeasurementAngle theta);

/// Bulk PEPS tensor T^s_{lrud} = delta_{s,r} delta_{s,u} (-1)^{s(l+d)} / sqrt(2):
/// the site broadcasts its physical value right and up and accrues CZ phases
/// against the values received from left and below.
SiteTensor build_site_tensor();

SiteTensor build_measured_site_tensor(MeasurementAngle theta);
SiteTensor build_lower_boundary_site(MeasurementAngle theta);
SiteTensor build_upper_boundary_site();

RowOperator build_bulk_mpo(MeasurementAngle theta);

/// Lower boundary row after measurement as a normalized uniform MPS,
/// A^u_{lr} = m_u delta_{u,r} (-1)^{ul} / sqrt(2), bond and physical dimension 2.
UniformMPS build_lower_boundary_imps(MeasurementAngle theta);

BoundaryMap build_upper_boundary_map();

/// Materialize the row operator on n sites as a 2^n x 2^n tensor (output, input).
/// Open boundaries pin the left leg to 0 and sum the right leg; periodic traces.
Tensor finite_row_matrix(MeasurementAngle theta, long n, Boundary bc);

}  // namespace clb
