#include "clb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "clb/finite.hpp"

namespace clb {

namespace {

long site_index(long x, long y, long lx) { return x + lx * y; }

// site 0 is the most significant bit
long bit_of(long amp_index, long site, long n) { return (amp_index >> (n - 1 - site)) & 1; }

}  // namespace

PureState exact_cluster_state(long lx, long ly) {
  const long n = lx * ly;
  if (n < 1 || n > 24) throw std::invalid_argument("exact_cluster_state: need 1 <= lx*ly <= 24");
  std::vector<std::pair<long, long>> links;
  for (long y = 0; y < ly; ++y)
    for (long x = 0; x < lx; ++x) {
      if (x + 1 < lx) links.emplace_back(site_index(x, y, lx), site_index(x + 1, y, lx));
      if (y + 1 < ly) links.emplace_back(site_index(x, y, lx), site_index(x, y + 1, lx));
    }
  const long dim = 1L << n;
  PureState out;
  out.n_qubits = n;
  out.amplitudes.resize(dim);
  const double scale = std::pow(2.0, -0.5 * static_cast<double>(n));
  for (long i = 0; i < dim; ++i) {
    long parity = 0;
    for (const auto& [a, b] : links) parity += bit_of(i, a, n) & bit_of(i, b, n);
    out.amplitudes(i) = (parity % 2 == 0 ? scale : -scale);
  }
  return out;
}

std::pair<PureState, double> apply_measurements(const PureState& state, MeasurementAngle theta,
                                                const std::vector<long>& sites) {
  std::vector<long> sorted = sites;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("apply_measurements: sites must be distinct");
  if (!sorted.empty() && (sorted.front() < 0 || sorted.back() >= state.n_qubits))
    throw std::invalid_argument("apply_measurements: site out of range");

  const auto proj = build_projector(theta);
  const double m0 = proj.direction(0), m1 = proj.direction(1);

  PureState cur = state;
  cur.amplitudes /= cur.amplitudes.norm();
  double prob = 1.0;
  // remove highest-index sites first so lower indices keep their positions
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    const long q = *it;
    const long n = cur.n_qubits;
    const long pos = n - 1 - q;  // bit position
    const long stride = 1L << pos;
    const long dim = 1L << (n - 1);
    VectorXcd next(dim);
    for (long j = 0; j < dim; ++j) {
      const long high = j >> pos;
      const long low = j & (stride - 1);
      const long base = (high << (pos + 1)) | low;
      next(j) = m0 * cur.amplitudes(base) + m1 * cur.amplitudes(base | stride);
    }
    const double p = next.squaredNorm();
    if (p < 1e-300) throw std::runtime_error("apply_measurements: zero-probability outcome");
    prob *= p;
    cur.amplitudes = next / std::sqrt(p);
    cur.n_qubits = n - 1;
  }
  return {std::move(cur), prob};
}

VectorXcd peps_patch_amplitudes(long lx, long ly) {
  if (lx * ly > 24) throw std::invalid_argument("peps_patch_amplitudes: patch too large");
  const Tensor t = build_site_tensor().tensor;  // (l, r, u, d, s)

  // row object [S, U, D, r], shrinking the open right leg as sites are added
  auto build_row = [&]() {
    Tensor cur({2, 2, 2, 2});  // x = 0 slice with l pinned to 0, axes (s, u, d, r)
    for (long r = 0; r < 2; ++r)
      for (long u = 0; u < 2; ++u)
        for (long d = 0; d < 2; ++d)
          for (long s = 0; s < 2; ++s) cur.at({s, u, d, r}) = t.at({0, r, u, d, s});
    for (long x = 1; x < lx; ++x) {
      Tensor next = contract(cur, t, {{3, 0}});      // [S, U, D, r2, u2, d2, s2]
      next = next.permuted({0, 6, 1, 4, 2, 5, 3});   // [S, s2, U, u2, D, d2, r2]
      const long s = next.dim(0) * 2, u = next.dim(2) * 2, d = next.dim(4) * 2;
      cur = next.reshaped({s, u, d, 2});
    }
    Tensor ones({2});
    ones.at({0}) = ones.at({1}) = 1.0;  // right edge leg summed
    return contract(cur, ones, {{3, 0}});
  };
  const Tensor row = build_row();  // [S, U, D]

  // bottom row has its down legs pinned to 0
  const long srow = row.dim(0), urow = row.dim(1);
  Tensor state({srow, urow});
  for (long s = 0; s < srow; ++s)
    for (long u = 0; u < urow; ++u) state.at({s, u}) = row.at({s, u, 0});

  for (long y = 1; y < ly; ++y) {
    Tensor next = contract(state, row, {{1, 2}});  // [S_old, s_row, u]
    state = next.reshaped({next.dim(0) * next.dim(1), next.dim(2)});
  }

  // top edge legs summed
  Tensor ones({urow});
  for (long u = 0; u < urow; ++u) ones.at({u}) = 1.0;
  Tensor amp = contract(state, ones, {{1, 0}});
  VectorXcd v(amp.size());
  for (long i = 0; i < amp.size(); ++i) v(i) = amp.data()[static_cast<std::size_t>(i)];
  return v;
}

double validate_peps(long lx, long ly) {
  if (lx * ly > 20) throw std::invalid_argument("validate_peps: patch capped at 20 qubits");
  const VectorXcd peps = peps_patch_amplitudes(lx, ly);
  const PureState exact = exact_cluster_state(lx, ly);
  const Complex ov = exact.amplitudes.dot(peps);
  return std::norm(ov) / (exact.amplitudes.squaredNorm() * peps.squaredNorm());
}

double validate_mpo_evolution(long lx, long ly, MeasurementAngle theta, long chi) {
  if (lx > 10) throw std::invalid_argument("validate_mpo_evolution: lx capped at 10");
  if (lx * (ly + 2) > 24) throw std::invalid_argument("validate_mpo_evolution: patch too large");

  // dense reference: measure the lower boundary and all bulk rows
  const PureState full = exact_cluster_state(lx, ly + 2);
  std::vector<long> measured;
  for (long y = 0; y <= ly; ++y)
    for (long x = 0; x < lx; ++x) measured.push_back(site_index(x, y, lx));
  auto [exact_boundary, prob] = apply_measurements(full, theta, measured);
  (void)prob;

  // MPS evolution on the virtual row, then the upper-boundary map
  const RowOperator h = build_bulk_mpo(theta);
  FiniteMPS psi = lower_boundary_finite(theta, lx);
  for (long k = 0; k < ly; ++k) {
    psi = apply_finite_row(psi, h, chi);
    mps_normalize(psi);
  }
  VectorXcd v = mps_to_statevector(psi);

  // per-site Hadamard then the CZ chain
  const long dim = v.size();
  VectorXcd had = VectorXcd::Zero(dim);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (long q = 0; q < lx; ++q) {
    const long pos = lx - 1 - q;
    const long stride = 1L << pos;
    for (long i = 0; i < dim; ++i) {
      const long base = i & ~stride;
      const long one = base | stride;
      had(i) = inv_sqrt2 * (v(base) + ((i & stride) != 0 ? -v(one) : v(one)));
    }
    v = had;
  }
  for (long i = 0; i < dim; ++i) {
    long parity = 0;
    for (long x = 0; x + 1 < lx; ++x) parity += bit_of(i, x, lx) & bit_of(i, x + 1, lx);
    if (parity % 2 == 1) v(i) = -v(i);
  }

  const Complex ov = exact_boundary.amplitudes.dot(v);
  return std::norm(ov) / (exact_boundary.amplitudes.squaredNorm() * v.squaredNorm());
}

double stabilizer_expectation(const PureState& state, long lx, long ly, long site) {
  const long n = lx * ly;
  if (state.n_qubits != n) throw std::invalid_argument("stabilizer_expectation: size mismatch");
  const long x = site % lx, y = site / lx;
  std::vector<long> nbrs;
  if (x > 0) nbrs.push_back(site_index(x - 1, y, lx));
  if (x + 1 < lx) nbrs.push_back(site_index(x + 1, y, lx));
  if (y > 0) nbrs.push_back(site_index(x, y - 1, lx));
  if (y + 1 < ly) nbrs.push_back(site_index(x, y + 1, lx));

  const long flip = 1L << (n - 1 - site);
  Complex acc(0, 0);
  const long dim = 1L << n;
  for (long i = 0; i < dim; ++i) {
    long parity = 0;
    for (long nb : nbrs) parity += bit_of(i, nb, n);
    const double sign = (parity % 2 == 0) ? 1.0 : -1.0;
    acc += std::conj(state.amplitudes(i ^ flip)) * sign * state.amplitudes(i);
  }
  return acc.real() / state.amplitudes.squaredNorm();
}

double prefix_entropy(const PureState& state, long prefix) {
  if (prefix < 1 || prefix >= state.n_qubits) throw std::invalid_argument("prefix_entropy: bad cut");
  const long rows = 1L << prefix;
  const long cols = 1L << (state.n_qubits - prefix);
  MatrixXcd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = state.amplitudes(r * cols + c);
  Eigen::BDCSVD<MatrixXcd> svd;
  svd.compute(m);
  double total = svd.singularValues().squaredNorm();
  double ee = 0;
  for (long i = 0; i < svd.singularValues().size(); ++i) {
    const double p = svd.singularValues()(i) * svd.singularValues()(i) / total;
    if (p > 1e-300) ee -= p * std::log(p);
  }
  return ee;
}

}  // namespace clb
