#include "clb/model.hpp"

#include <cmath>
#include <stdexcept>

namespace clb {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double sign_pow(long exponent) { return (exponent % 2 == 0) ? 1.0 : -1.0; }

}  // namespace

MeasurementAngle::MeasurementAngle(double t) : theta(t) {
  if (!(t >= 0.0 && t <= M_PI_2 + 1e-12))
    throw std::invalid_argument("measurement angle must lie in [0, pi/2]");
}

Projector build_projector(MeasurementAngle theta) {
  const double th = theta.theta;
  Eigen::Matrix2d z, x;
  z << 1, 0, 0, -1;
  x << 0, 1, 1, 0;
  Projector p{theta, 0.5 * (Eigen::Matrix2d::Identity() + std::cos(th) * z + std::sin(th) * x),
              {std::cos(th / 2), std::sin(th / 2)}};
  return p;
}

SiteTensor build_site_tensor() {
  Tensor t({2, 2, 2, 2, 2});  // (l, r, u, d, s)
  for (long l = 0; l < 2; ++l)
    for (long d = 0; d < 2; ++d)
      for (long s = 0; s < 2; ++s) t.at({l, s, s, d, s}) = sign_pow(s * (l + d)) * kInvSqrt2;
  return {SiteRole::BulkUnmeasured, std::move(t)};
}

SiteTensor build_measured_site_tensor(MeasurementAngle theta) {
  const auto m = build_projector(theta).direction;
  Tensor t({2, 2, 2, 2});  // (l, r, u, d)
  for (long l = 0; l < 2; ++l)
    for (long d = 0; d < 2; ++d)
      for (long u = 0; u < 2; ++u) t.at({l, u, u, d}) = m(u) * sign_pow(u * (l + d)) * kInvSqrt2;
  return {SiteRole::BulkMeasured, std::move(t)};
}

SiteTensor build_lower_boundary_site(MeasurementAngle theta) {
  const auto m = build_projector(theta).direction;
  Tensor t({2, 2, 2});  // (l, r, u)
  for (long l = 0; l < 2; ++l)
    for (long u = 0; u < 2; ++u) t.at({l, u, u}) = m(u) * sign_pow(u * l) * kInvSqrt2;
  return {SiteRole::LowerBoundaryMeasured, std::move(t)};
}

SiteTensor build_upper_boundary_site() {
  Tensor t({2, 2, 2, 2});  // (l, r, d, s)
  for (long l = 0; l < 2; ++l)
    for (long d = 0; d < 2; ++d)
      for (long s = 0; s < 2; ++s) t.at({l, s, d, s}) = sign_pow(s * (l + d)) * kInvSqrt2;
  return {SiteRole::UpperBoundaryUnmeasured, std::move(t)};
}

RowOperator build_bulk_mpo(MeasurementAngle theta) {
  const auto m = build_projector(theta).direction;
  Tensor w({2, 2, 2, 2});  // (l, r, u, d)
  for (long l = 0; l < 2; ++l)
    for (long d = 0; d < 2; ++d)
      for (long u = 0; u < 2; ++u) w.at({l, u, u, d}) = m(u) * sign_pow(u * (l + d));
  return {std::move(w), kInvSqrt2};
}

UniformMPS build_lower_boundary_imps(MeasurementAngle theta) {
  const auto m = build_projector(theta).direction;
  Tensor a({2, 2, 2});  // (left bond, physical, right bond) = (l, u, r)
  for (long l = 0; l < 2; ++l)
    for (long u = 0; u < 2; ++u) a.at({l, u, u}) = m(u) * sign_pow(u * l) * kInvSqrt2;
  return UniformMPS(std::move(a), 2, 2);
}

BoundaryMap build_upper_boundary_map() {
  Eigen::Matrix2cd had;
  had << kInvSqrt2, kInvSqrt2, kInvSqrt2, -kInvSqrt2;
  return {had, true};
}

Tensor finite_row_matrix(MeasurementAngle theta, long n, Boundary bc) {
  if (n < 1 || n > 12) throw std::invalid_argument("finite_row_matrix: need 1 <= n <= 12");
  const Tensor w = build_bulk_mpo(theta).w;  // (l, r, u, d)
  const long dim = 1L << n;

  // chain[l, (u d ...), r] built site by site
  Tensor chain = w.permuted({0, 2, 3, 1});  // (l, u, d, r)
  for (long site = 1; site < n; ++site) {
    Tensor next = contract(chain, w, {{chain.rank() - 1, 0}});  // (l, u1, d1, ..., u, d, r')
    std::vector<long> perm(next.shape().size());
    for (std::size_t i = 0; i + 1 < perm.size(); ++i) perm[i] = static_cast<long>(i);
    // move the new r' axis last: contract already appends (u, d, r') in w order (r, u, d) -> fix
    // w free axes after pairing axis 0: (r, u, d); reorder to (u, d, r)
    const long base = chain.rank() - 1;
    perm[static_cast<std::size_t>(base)] = base + 1;
    perm[static_cast<std::size_t>(base + 1)] = base + 2;
    perm[static_cast<std::size_t>(base + 2)] = base;
    chain = next.permuted(perm);
  }

  // close the horizontal bond
  Tensor closed;
  if (bc == Boundary::Periodic) {
    closed = Tensor(std::vector<long>(static_cast<std::size_t>(2 * n), 2));
    for (long l = 0; l < 2; ++l) {
      Tensor slice(std::vector<long>(static_cast<std::size_t>(2 * n), 2));
      // pick chain[l, ..., r=l]
      const long inner = chain.size() / 4;
      for (long i = 0; i < inner; ++i) {
        // chain layout: l runs slowest, r fastest
        slice.data()[static_cast<std::size_t>(i)] = chain.data()[static_cast<std::size_t>((l * inner + i) * 2 + l)];
      }
      closed += slice;
    }
  } else {
    // pin l = 0, sum r
    const long inner = chain.size() / 4;
    closed = Tensor(std::vector<long>(static_cast<std::size_t>(2 * n), 2));
    for (long i = 0; i < inner; ++i)
      closed.data()[static_cast<std::size_t>(i)] =
          chain.data()[static_cast<std::size_t>(i * 2)] + chain.data()[static_cast<std::size_t>(i * 2 + 1)];
  }

  // axes are (u1, d1, u2, d2, ...); gather to (u..., d...)
  std::vector<long> perm;
  for (long i = 0; i < n; ++i) perm.push_back(2 * i);
  for (long i = 0; i < n; ++i) perm.push_back(2 * i + 1);
  Tensor grouped = closed.permuted(perm);
  return grouped.reshaped({dim, dim});
}

}  // namespace clb
