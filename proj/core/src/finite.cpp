#include "clb/finite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "clb/solvers.hpp"
#include "mps_detail.hpp"

namespace clb {

using detail::mat_to_vec;
using detail::vec_to_mat;

namespace {

using Mats = std::array<MatrixXcd, 2>;  // per-site (left x right) matrices, physical index 0/1

Mats to_mats(const Tensor& t) {
  const long dl = t.dim(0), dr = t.dim(2);
  Mats m{MatrixXcd(dl, dr), MatrixXcd(dl, dr)};
  for (long s = 0; s < 2; ++s)
    for (long l = 0; l < dl; ++l)
      for (long r = 0; r < dr; ++r) m[static_cast<std::size_t>(s)](l, r) = t.at({l, s, r});
  return m;
}

Tensor from_mats(const Mats& m) {
  const long dl = m[0].rows(), dr = m[0].cols();
  Tensor t({dl, 2, dr});
  for (long s = 0; s < 2; ++s)
    for (long l = 0; l < dl; ++l)
      for (long r = 0; r < dr; ++r) t.at({l, s, r}) = m[static_cast<std::size_t>(s)](l, r);
  return t;
}

using WBlocks = std::array<std::array<Eigen::Matrix2cd, 2>, 2>;  // [l][r](u, d)

WBlocks w_blocks(const Tensor& w) {
  WBlocks b;
  for (long l = 0; l < 2; ++l)
    for (long r = 0; r < 2; ++r)
      for (long u = 0; u < 2; ++u)
        for (long d = 0; d < 2; ++d)
          b[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)](u, d) = w.at({l, r, u, d});
  return b;
}

long mps_chi(const FiniteMPS& psi) {
  long chi = 1;
  for (const auto& t : psi.tensors) chi = std::max(chi, t.dim(2));
  return chi;
}

// ---------------------------------------------------------------------------
// open-chain gauge moves

void push_right(std::vector<Mats>& a, long i) {
  const long dl = a[static_cast<std::size_t>(i)][0].rows(), dr = a[static_cast<std::size_t>(i)][0].cols();
  MatrixXcd m(2 * dl, dr);
  m.topRows(dl) = a[static_cast<std::size_t>(i)][0];
  m.bottomRows(dl) = a[static_cast<std::size_t>(i)][1];
  Eigen::HouseholderQR<MatrixXcd> qr(m);
  const long k = std::min(2 * dl, dr);
  MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(2 * dl, k);
  MatrixXcd r = q.adjoint() * m;
  a[static_cast<std::size_t>(i)][0] = q.topRows(dl);
  a[static_cast<std::size_t>(i)][1] = q.bottomRows(dl);
  for (auto& t : a[static_cast<std::size_t>(i + 1)]) t = r * t;
}

void push_left(std::vector<Mats>& a, long i) {
  const long dl = a[static_cast<std::size_t>(i)][0].rows(), dr = a[static_cast<std::size_t>(i)][0].cols();
  MatrixXcd m(dl, 2 * dr);
  m.leftCols(dr) = a[static_cast<std::size_t>(i)][0];
  m.rightCols(dr) = a[static_cast<std::size_t>(i)][1];
  Eigen::HouseholderQR<MatrixXcd> qr(m.adjoint());
  const long k = std::min(2 * dr, dl);
  MatrixXcd q = (qr.householderQ() * MatrixXcd::Identity(2 * dr, k)).adjoint();  // k x 2dr
  MatrixXcd l = m * q.adjoint();
  a[static_cast<std::size_t>(i)][0] = q.leftCols(dr);
  a[static_cast<std::size_t>(i)][1] = q.rightCols(dr);
  for (auto& t : a[static_cast<std::size_t>(i - 1)]) t = t * l;
}

// ---------------------------------------------------------------------------
// OBC variational engine (two-site sweeps)

struct ObcEnv {
  std::array<MatrixXcd, 2> f;  // per MPO bond value, (bra bond x ket bond)
};

ObcEnv left_edge() {
  ObcEnv e;
  e.f[0] = MatrixXcd::Ones(1, 1);  // MPO left leg pinned to 0
  e.f[1] = MatrixXcd::Zero(1, 1);
  return e;
}

ObcEnv right_edge() {
  ObcEnv e;
  e.f[0] = MatrixXcd::Ones(1, 1);  // MPO right leg summed
  e.f[1] = MatrixXcd::Ones(1, 1);
  return e;
}

ObcEnv absorb_left(const ObcEnv& env, const Mats& a, const WBlocks& w) {
  const long dl = a[0].cols();
  ObcEnv out;
  out.f[0] = MatrixXcd::Zero(dl, dl);
  out.f[1] = MatrixXcd::Zero(dl, dl);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t mp = 0; mp < 2; ++mp)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t d = 0; d < 2; ++d) {
          const Complex c = w[m][mp](u, d);
          if (c == Complex(0, 0)) continue;
          out.f[mp] += c * (a[u].adjoint() * env.f[m] * a[d]);
        }
  return out;
}

ObcEnv absorb_right(const ObcEnv& env, const Mats& a, const WBlocks& w) {
  const long dl = a[0].rows();
  ObcEnv out;
  out.f[0] = MatrixXcd::Zero(dl, dl);
  out.f[1] = MatrixXcd::Zero(dl, dl);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t mp = 0; mp < 2; ++mp)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t d = 0; d < 2; ++d) {
          const Complex c = w[m][mp](u, d);
          if (c == Complex(0, 0)) continue;
          out.f[m] += c * (a[u].conjugate() * env.f[mp] * a[d].transpose());
        }
  return out;
}

MatrixXcd overlap_left(const MatrixXcd& env, const Mats& ref, const Mats& a) {
  MatrixXcd out = MatrixXcd::Zero(ref[0].cols(), a[0].cols());
  for (std::size_t s = 0; s < 2; ++s) out += ref[s].adjoint() * env * a[s];
  return out;
}

MatrixXcd overlap_right(const MatrixXcd& env, const Mats& ref, const Mats& a) {
  MatrixXcd out = MatrixXcd::Zero(ref[0].rows(), a[0].rows());
  for (std::size_t s = 0; s < 2; ++s) out += ref[s].conjugate() * env * a[s].transpose();
  return out;
}

struct Deflation {
  bool active = false;
  Complex e0{0, 0};
  const std::vector<Mats>* ref = nullptr;
};

// two-site effective problem at bond (i, i+1); x packs [d1][d2] blocks of chi_l x chi_r
struct TwoSiteOp {
  const ObcEnv* le;
  const ObcEnv* re;
  const WBlocks* w;
  long chi_l, chi_r;
  bool deflate = false;
  Complex e0{0, 0};
  std::array<std::array<MatrixXcd, 2>, 2> kmat;  // window coefficients of <psi0|, [s1][s2]

  VectorXcd apply(const VectorXcd& x) const {
    std::array<std::array<MatrixXcd, 2>, 2> xb;
    for (long d1 = 0; d1 < 2; ++d1)
      for (long d2 = 0; d2 < 2; ++d2)
        xb[static_cast<std::size_t>(d1)][static_cast<std::size_t>(d2)] =
            vec_to_mat(x.segment((d1 * 2 + d2) * chi_l * chi_r, chi_l * chi_r), chi_l, chi_r);

    VectorXcd y = VectorXcd::Zero(x.size());
    for (std::size_t m0 = 0; m0 < 2; ++m0)
      for (std::size_t m1 = 0; m1 < 2; ++m1)
        for (std::size_t u1 = 0; u1 < 2; ++u1)
          for (std::size_t d1 = 0; d1 < 2; ++d1) {
            const Complex c1 = (*w)[m0][m1](u1, d1);
            if (c1 == Complex(0, 0)) continue;
            for (std::size_t m2 = 0; m2 < 2; ++m2)
              for (std::size_t u2 = 0; u2 < 2; ++u2)
                for (std::size_t d2 = 0; d2 < 2; ++d2) {
                  const Complex c2 = (*w)[m1][m2](u2, d2);
                  if (c2 == Complex(0, 0)) continue;
                  MatrixXcd piece = le->f[m0] * xb[d1][d2] * re->f[m2].transpose();
                  y.segment((static_cast<long>(u1) * 2 + static_cast<long>(u2)) * chi_l * chi_r,
                            chi_l * chi_r) += mat_to_vec((c1 * c2) * piece);
                }
          }
    if (deflate) {
      Complex ov(0, 0);
      for (std::size_t s1 = 0; s1 < 2; ++s1)
        for (std::size_t s2 = 0; s2 < 2; ++s2)
          ov += (kmat[s1][s2].array() * xb[s1][s2].array()).sum();
      for (std::size_t s1 = 0; s1 < 2; ++s1)
        for (std::size_t s2 = 0; s2 < 2; ++s2)
          y.segment((static_cast<long>(s1) * 2 + static_cast<long>(s2)) * chi_l * chi_r, chi_l * chi_r) -=
              mat_to_vec((e0 * ov) * kmat[s1][s2].conjugate());
    }
    return y;
  }
};

struct ObcResult {
  Complex lambda{0, 0};
  std::vector<Mats> a;
  long sweeps = 0;
  double residual = 0;
  bool converged = false;
};

std::vector<Mats> obc_initial_state(MeasurementAngle theta, long n, long chi, const RowOperator& h,
                                    std::uint64_t seed, bool randomize) {
  FiniteMPS psi = lower_boundary_finite(theta, n);
  for (int k = 0; k < 4; ++k) {
    if (mps_chi(psi) >= chi) break;
    psi = apply_finite_row(psi, h, chi);
    mps_normalize(psi);
  }
  std::vector<Mats> a;
  a.reserve(static_cast<std::size_t>(n));
  for (const auto& t : psi.tensors) a.push_back(to_mats(t));
  if (randomize) {
    std::mt19937_64 rng(seed ^ 0xdef1a7e);
    auto noise = [&rng]() { return (static_cast<double>(rng() >> 11) / 9007199254740992.0) - 0.5; };
    for (auto& site : a)
      for (auto& m : site)
        for (long i = 0; i < m.rows(); ++i)
          for (long j = 0; j < m.cols(); ++j) m(i, j) += 0.3 * Complex(noise(), noise());
  }
  return a;
}

ObcResult obc_solve(MeasurementAngle theta, long n, long chi, const FiniteOptions& opts,
                    const Deflation& defl) {
  const RowOperator h = build_bulk_mpo(theta);
  const WBlocks w = w_blocks(h.w);

  std::vector<Mats> a;
  if (opts.warm_start != nullptr && opts.warm_start->n == n && opts.warm_start->bc == Boundary::Open) {
    for (const auto& t : opts.warm_start->tensors) a.push_back(to_mats(t));
  } else {
    a = obc_initial_state(theta, n, chi, h, opts.seed, defl.active);
  }

  for (long i = n - 1; i > 0; --i) push_left(a, i);

  std::vector<ObcEnv> re(static_cast<std::size_t>(n) + 1);
  std::vector<MatrixXcd> ro;
  auto rebuild_right = [&]() {
    re[static_cast<std::size_t>(n)] = right_edge();
    for (long i = n - 1; i >= 1; --i)
      re[static_cast<std::size_t>(i)] =
          absorb_right(re[static_cast<std::size_t>(i + 1)], a[static_cast<std::size_t>(i)], w);
    if (defl.active) {
      ro.assign(static_cast<std::size_t>(n) + 1, MatrixXcd());
      ro[static_cast<std::size_t>(n)] = MatrixXcd::Ones(1, 1);
      for (long i = n - 1; i >= 1; --i)
        ro[static_cast<std::size_t>(i)] = overlap_right(
            ro[static_cast<std::size_t>(i + 1)], (*defl.ref)[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(i)]);
    }
  };
  rebuild_right();

  Complex lambda(0, 0), lambda_prev(1e300, 0);
  double residual = 1e300;
  long sweep = 0;
  bool converged = false;

  for (; sweep < opts.max_sweeps; ++sweep) {
    ObcEnv le = left_edge();
    MatrixXcd lo = MatrixXcd::Ones(1, 1);

    for (long i = 0; i + 1 < n; ++i) {
      const long chi_l = a[static_cast<std::size_t>(i)][0].rows();
      const long chi_r = a[static_cast<std::size_t>(i + 1)][0].cols();
      TwoSiteOp op;
      op.le = &le;
      op.re = &re[static_cast<std::size_t>(i + 2)];
      op.w = &w;
      op.chi_l = chi_l;
      op.chi_r = chi_r;
      if (defl.active) {
        op.deflate = true;
        op.e0 = defl.e0;
        const Mats& r1 = (*defl.ref)[static_cast<std::size_t>(i)];
        const Mats& r2 = (*defl.ref)[static_cast<std::size_t>(i + 1)];
        const MatrixXcd& orr = ro[static_cast<std::size_t>(i + 2)];
        // K[s1 s2](a, b) = sum_{q, q'} conj((r1[s1] r2[s2])(q, q')) OL(q, a) OR(q', b)
        for (std::size_t s1 = 0; s1 < 2; ++s1)
          for (std::size_t s2 = 0; s2 < 2; ++s2)
            op.kmat[s1][s2] = lo.transpose() * (r1[s1] * r2[s2]).conjugate() * orr;
      }

      VectorXcd x0(chi_l * 4 * chi_r);
      for (long d1 = 0; d1 < 2; ++d1)
        for (long d2 = 0; d2 < 2; ++d2)
          x0.segment((d1 * 2 + d2) * chi_l * chi_r, chi_l * chi_r) =
              mat_to_vec(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(d1)] *
                         a[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(d2)]);

      LinearMap map = [&op](const VectorXcd& v) { return op.apply(v); };
      ArnoldiOptions ao;
      ao.tol = 1e-11;
      ao.throw_on_fail = false;
      ao.start = &x0;
      auto pairs = dominant_eigs(map, chi_l * 4 * chi_r, 2, opts.seed + static_cast<std::uint64_t>(i), ao);
      std::size_t pick = 0;
      if (pairs.size() > 1 &&
          std::abs(std::abs(pairs[0].value) - std::abs(pairs[1].value)) < 1e-6 * std::abs(pairs[0].value))
        pick = std::abs(x0.normalized().dot(pairs[0].vector)) >=
                       std::abs(x0.normalized().dot(pairs[1].vector))
                   ? 0
                   : 1;
      lambda = pairs[pick].value;
      const VectorXcd& v = pairs[pick].vector;
      residual = (map(v) - lambda * v).norm() / std::max(1.0, std::abs(lambda));

      MatrixXcd block(chi_l * 2, 2 * chi_r);
      for (long d1 = 0; d1 < 2; ++d1)
        for (long d2 = 0; d2 < 2; ++d2)
          block.block(d1 * chi_l, d2 * chi_r, chi_l, chi_r) =
              vec_to_mat(v.segment((d1 * 2 + d2) * chi_l * chi_r, chi_l * chi_r), chi_l, chi_r);
      Eigen::BDCSVD<MatrixXcd> svd;
      svd.compute(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
      long keep = std::min<long>(chi, svd.singularValues().size());
      while (keep > 1 && svd.singularValues()(keep - 1) < 1e-13 * svd.singularValues()(0)) --keep;
      Eigen::VectorXd s = svd.singularValues().head(keep);
      s /= s.norm();
      MatrixXcd u = svd.matrixU().leftCols(keep);
      MatrixXcd vt = svd.matrixV().leftCols(keep).adjoint();
      for (long d = 0; d < 2; ++d) {
        a[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] = u.block(d * chi_l, 0, chi_l, keep);
        a[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(d)] =
            s.asDiagonal() * vt.block(0, d * chi_r, keep, chi_r);
      }
      le = absorb_left(le, a[static_cast<std::size_t>(i)], w);
      if (defl.active)
        lo = overlap_left(lo, (*defl.ref)[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(i)]);
    }

    for (long i = n - 1; i > 0; --i) push_left(a, i);
    rebuild_right();

    if (std::abs(lambda - lambda_prev) <= opts.tol * std::max(1.0, std::abs(lambda)) && sweep >= 1) {
      converged = true;
      ++sweep;
      break;
    }
    lambda_prev = lambda;
  }

  ObcResult out;
  out.lambda = lambda;
  out.a = std::move(a);
  out.sweeps = sweep;
  out.residual = residual;
  out.converged = converged;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// public finite-MPS utilities

FiniteMPS lower_boundary_finite(MeasurementAngle theta, long n) {
  if (n < 2) throw std::invalid_argument("lower_boundary_finite: need n >= 2");
  SiteTensor site = build_lower_boundary_site(theta);  // (l, r, u)
  Tensor bulk = site.tensor.permuted({0, 2, 1});       // (l, u, r)
  FiniteMPS psi;
  psi.n = n;
  psi.bc = Boundary::Open;
  psi.chi = 2;
  psi.tensors.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (i == 0) {
      Tensor t({1, 2, 2});
      for (long u = 0; u < 2; ++u)
        for (long r = 0; r < 2; ++r) t.at({0, u, r}) = bulk.at({0, u, r});  // left leg pinned to 0
      psi.tensors.push_back(std::move(t));
    } else if (i == n - 1) {
      Tensor t({2, 2, 1});
      for (long l = 0; l < 2; ++l)
        for (long u = 0; u < 2; ++u) {
          Complex sum = 0;
          for (long r = 0; r < 2; ++r) sum += bulk.at({l, u, r});  // right leg summed
          t.at({l, u, 0}) = sum;
        }
      psi.tensors.push_back(std::move(t));
    } else {
      psi.tensors.push_back(bulk);
    }
  }
  return psi;
}

FiniteMPS apply_finite_row(const FiniteMPS& psi, const RowOperator& h, long chi_max, double weight_tol) {
  if (psi.bc != Boundary::Open) throw std::invalid_argument("apply_finite_row: open chains only");
  const long n = psi.n;
  FiniteMPS out;
  out.n = n;
  out.bc = Boundary::Open;
  out.tensors.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const Tensor& a = psi.tensors[static_cast<std::size_t>(i)];
    Tensor t = contract(h.w, a, {{3, 1}});   // (wl, wr, u, al, ar)
    Tensor p = t.permuted({0, 3, 2, 1, 4});  // (wl, al, u, wr, ar)
    if (i == 0) {
      Tensor slice({1, a.dim(0), 2, 2, a.dim(2)});
      for (long al = 0; al < a.dim(0); ++al)
        for (long u = 0; u < 2; ++u)
          for (long wr = 0; wr < 2; ++wr)
            for (long ar = 0; ar < a.dim(2); ++ar) slice.at({0, al, u, wr, ar}) = p.at({0, al, u, wr, ar});
      p = std::move(slice);
    }
    if (i == n - 1) {
      Tensor summed({p.dim(0), p.dim(1), 2, 1, p.dim(4)});
      for (long wl = 0; wl < p.dim(0); ++wl)
        for (long al = 0; al < p.dim(1); ++al)
          for (long u = 0; u < 2; ++u)
            for (long ar = 0; ar < p.dim(4); ++ar) {
              Complex sum = 0;
              for (long wr = 0; wr < 2; ++wr) sum += p.at({wl, al, u, wr, ar});
              summed.at({wl, al, u, 0, ar}) = sum;
            }
      p = std::move(summed);
    }
    out.tensors.push_back(p.reshaped({p.dim(0) * p.dim(1), 2, p.dim(3) * p.dim(4)}));
  }

  std::vector<Mats> a;
  for (const auto& t : out.tensors) a.push_back(to_mats(t));
  for (long i = n - 1; i > 0; --i) push_left(a, i);
  for (long i = 0; i + 1 < n; ++i) {
    const long dl = a[static_cast<std::size_t>(i)][0].rows();
    const long dr = a[static_cast<std::size_t>(i)][0].cols();
    MatrixXcd m(2 * dl, dr);
    m.topRows(dl) = a[static_cast<std::size_t>(i)][0];
    m.bottomRows(dl) = a[static_cast<std::size_t>(i)][1];
    Eigen::BDCSVD<MatrixXcd> svd;
    svd.compute(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    long keep = svd.singularValues().size();
    if (chi_max > 0) keep = std::min(keep, chi_max);
    while (keep > 1 && svd.singularValues()(keep - 1) < weight_tol * svd.singularValues()(0)) --keep;
    MatrixXcd u = svd.matrixU().leftCols(keep);
    MatrixXcd sv = svd.singularValues().head(keep).asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
    a[static_cast<std::size_t>(i)][0] = u.topRows(dl);
    a[static_cast<std::size_t>(i)][1] = u.bottomRows(dl);
    for (auto& t : a[static_cast<std::size_t>(i + 1)]) t = sv * t;
  }
  for (long i = 0; i < n; ++i)
    out.tensors[static_cast<std::size_t>(i)] = from_mats(a[static_cast<std::size_t>(i)]);
  out.chi = mps_chi(out);
  return out;
}

VectorXcd mps_to_statevector(const FiniteMPS& psi) {
  if (psi.n > 24) throw std::invalid_argument("mps_to_statevector: chain too long");
  if (psi.bc == Boundary::Open) {
    MatrixXcd acc = MatrixXcd::Ones(1, 1);  // (configs x bond), site 0 most significant
    for (const auto& t : psi.tensors) {
      const long dr = t.dim(2);
      Mats m = to_mats(t);
      MatrixXcd next(acc.rows() * 2, dr);
      MatrixXcd n0 = acc * m[0];
      MatrixXcd n1 = acc * m[1];
      for (long b = 0; b < acc.rows(); ++b) {
        next.row(2 * b) = n0.row(b);
        next.row(2 * b + 1) = n1.row(b);
      }
      acc = std::move(next);
    }
    return acc.col(0);
  }
  const long chi = psi.tensors[0].dim(0);
  std::vector<MatrixXcd> acc{MatrixXcd::Identity(chi, chi)};
  for (const auto& t : psi.tensors) {
    Mats m = to_mats(t);
    std::vector<MatrixXcd> next(acc.size() * 2);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      next[2 * c] = acc[c] * m[0];
      next[2 * c + 1] = acc[c] * m[1];
    }
    acc = std::move(next);
  }
  VectorXcd v(static_cast<long>(acc.size()));
  for (std::size_t c = 0; c < acc.size(); ++c) v(static_cast<long>(c)) = acc[c].trace();
  return v;
}

Complex mps_inner(const FiniteMPS& bra, const FiniteMPS& ket) {
  if (bra.n != ket.n || bra.bc != ket.bc) throw std::invalid_argument("mps_inner: incompatible chains");
  if (bra.bc == Boundary::Open) {
    MatrixXcd e = MatrixXcd::Ones(1, 1);
    for (long i = 0; i < bra.n; ++i) {
      Mats b = to_mats(bra.tensors[static_cast<std::size_t>(i)]);
      Mats k = to_mats(ket.tensors[static_cast<std::size_t>(i)]);
      MatrixXcd next = MatrixXcd::Zero(b[0].cols(), k[0].cols());
      for (std::size_t s = 0; s < 2; ++s) next += b[s].adjoint() * e * k[s];
      e = std::move(next);
    }
    return e(0, 0);
  }
  const long cb = bra.tensors[0].dim(0), ck = ket.tensors[0].dim(0);
  MatrixXcd e = MatrixXcd::Identity(cb * ck, cb * ck);
  for (long i = 0; i < bra.n; ++i) {
    Mats b = to_mats(bra.tensors[static_cast<std::size_t>(i)]);
    Mats k = to_mats(ket.tensors[static_cast<std::size_t>(i)]);
    MatrixXcd t = MatrixXcd::Zero(cb * ck, cb * ck);
    for (std::size_t s = 0; s < 2; ++s)
      for (long i1 = 0; i1 < cb; ++i1)
        for (long j1 = 0; j1 < cb; ++j1)
          for (long i2 = 0; i2 < ck; ++i2)
            for (long j2 = 0; j2 < ck; ++j2)
              t(i1 * ck + i2, j1 * ck + j2) += std::conj(b[s](i1, j1)) * k[s](i2, j2);
    e = e * t;
  }
  return e.trace();
}

double mps_normalize(FiniteMPS& psi) {
  const double norm = std::sqrt(std::abs(mps_inner(psi, psi)));
  if (norm <= 0 || !std::isfinite(norm)) throw std::runtime_error("mps_normalize: degenerate state norm");
  const double per_site = std::pow(norm, 1.0 / static_cast<double>(psi.n));
  for (auto& t : psi.tensors) t *= Complex(1.0 / per_site, 0);
  return norm;
}

SchmidtSpectrum mid_chain_spectrum(const FiniteMPS& psi) {
  const long n = psi.n;
  const long mid = n / 2;
  if (psi.bc == Boundary::Open) {
    std::vector<Mats> a;
    for (const auto& t : psi.tensors) a.push_back(to_mats(t));
    for (long i = n - 1; i > mid; --i) push_left(a, i);
    for (long i = 0; i < mid; ++i) push_right(a, i);
    const long dl = a[static_cast<std::size_t>(mid)][0].rows();
    const long dr = a[static_cast<std::size_t>(mid)][0].cols();
    MatrixXcd m(dl, 2 * dr);
    m.leftCols(dr) = a[static_cast<std::size_t>(mid)][0];
    m.rightCols(dr) = a[static_cast<std::size_t>(mid)][1];
    CanonicalForm cf;
    cf.c = Tensor::from_matrix(m, {dl}, {2 * dr});
    return entanglement_spectrum(cf);
  }

  // periodic: nonzero spectrum of rho_A from half-ring Gram matrices.
  //   G[(q q'),(r r')] = sum_{s-half} conj(L(q, r)) L(q', r')
  const long chi = psi.tensors[0].dim(0);
  auto gram_half = [&](long begin, long end) {
    MatrixXcd g = MatrixXcd::Identity(chi * chi, chi * chi);
    for (long i = begin; i < end; ++i) {
      Mats m = to_mats(psi.tensors[static_cast<std::size_t>(i)]);
      MatrixXcd t = MatrixXcd::Zero(chi * chi, chi * chi);
      for (std::size_t s = 0; s < 2; ++s)
        for (long q = 0; q < chi; ++q)
          for (long qp = 0; qp < chi; ++qp)
            for (long r = 0; r < chi; ++r)
              for (long rp = 0; rp < chi; ++rp)
                t(q * chi + qp, r * chi + rp) += std::conj(m[s](q, r)) * m[s](qp, rp);
      g = g * t;
    }
    return g;
  };
  MatrixXcd ga = gram_half(0, mid);
  MatrixXcd gb = gram_half(mid, n);

  // rho_A has the nonzero spectrum of K * Gl with
  //   Gl[(u v),(x y)] = sum_A conj(L(u,v)) L(x,y) = ga[(u x),(v y)]
  //   K[(x y),(u v)]  = sum_B R(y,x) conj(R(v,u)) = gb[(v y),(u x)]
  MatrixXcd gl(chi * chi, chi * chi), kk(chi * chi, chi * chi);
  for (long u = 0; u < chi; ++u)
    for (long v = 0; v < chi; ++v)
      for (long x = 0; x < chi; ++x)
        for (long y = 0; y < chi; ++y) {
          gl(u * chi + v, x * chi + y) = ga(u * chi + x, v * chi + y);
          kk(x * chi + y, u * chi + v) = gb(v * chi + y, u * chi + x);
        }
  Eigen::ComplexEigenSolver<MatrixXcd> es(kk * gl);
  std::vector<double> p;
  for (long i = 0; i < es.eigenvalues().size(); ++i) p.push_back(std::max(0.0, es.eigenvalues()(i).real()));
  std::sort(p.begin(), p.end(), std::greater<double>());
  double tot = 0;
  for (double x : p) tot += x;
  const long np = static_cast<long>(p.size());
  Tensor c({np, np});
  for (long i = 0; i < np; ++i) c.at({i, i}) = std::sqrt(std::max(0.0, p[static_cast<std::size_t>(i)] / tot));
  CanonicalForm cf;
  cf.c = std::move(c);
  return entanglement_spectrum(cf);
}

// ---------------------------------------------------------------------------
// PBC variational engine (one-site ring updates, environments rebuilt per sweep)

namespace {

struct RingEngine {
  long n, chi;
  WBlocks w;
  std::vector<Mats> a;
  bool deflate = false;
  Complex e0{0, 0};
  const std::vector<Mats>* ref = nullptr;

  long dimT() const { return 2 * chi * chi; }
  long dimE() const { return chi * chi; }
  long dimF() const { return deflate ? (*ref)[0][0].rows() * chi : 0; }

  // row index (m, bra, ket) at the left cut; column likewise at the right cut
  MatrixXcd site_T(long i) const {
    const Mats& m = a[static_cast<std::size_t>(i)];
    const long de = chi * chi;
    MatrixXcd t = MatrixXcd::Zero(dimT(), dimT());
    for (std::size_t mm = 0; mm < 2; ++mm)
      for (std::size_t mp = 0; mp < 2; ++mp)
        for (std::size_t u = 0; u < 2; ++u)
          for (std::size_t d = 0; d < 2; ++d) {
            const Complex c = w[mm][mp](u, d);
            if (c == Complex(0, 0)) continue;
            for (long a1 = 0; a1 < chi; ++a1)
              for (long a2 = 0; a2 < chi; ++a2) {
                const Complex cb = c * std::conj(m[u](a1, a2));
                if (cb == Complex(0, 0)) continue;
                t.block(static_cast<long>(mm) * de + a1 * chi, static_cast<long>(mp) * de + a2 * chi, chi,
                        chi) += cb * m[d];
              }
          }
    return t;
  }

  MatrixXcd site_E(long i) const {
    const Mats& m = a[static_cast<std::size_t>(i)];
    MatrixXcd t = MatrixXcd::Zero(dimE(), dimE());
    for (std::size_t s = 0; s < 2; ++s)
      for (long a1 = 0; a1 < chi; ++a1)
        for (long a2 = 0; a2 < chi; ++a2) {
          const Complex cb = std::conj(m[s](a1, a2));
          if (cb == Complex(0, 0)) continue;
          t.block(a1 * chi, a2 * chi, chi, chi) += cb * m[s];
        }
    return t;
  }

  MatrixXcd site_F(long i) const {
    const Mats& r = (*ref)[static_cast<std::size_t>(i)];
    const Mats& m = a[static_cast<std::size_t>(i)];
    const long cr = r[0].rows();
    MatrixXcd t = MatrixXcd::Zero(cr * chi, cr * chi);
    for (std::size_t s = 0; s < 2; ++s)
      for (long a1 = 0; a1 < cr; ++a1)
        for (long a2 = 0; a2 < cr; ++a2) {
          const Complex cb = std::conj(r[s](a1, a2));
          if (cb == Complex(0, 0)) continue;
          t.block(a1 * chi, a2 * chi, chi, chi) += cb * m[s];
        }
    return t;
  }
};

struct RingSolveStats {
  Complex lambda{0, 0};
  double residual = 0;
};

// suffix products over one checkpoint segment, rebuilt when the sweep enters it
struct SegmentCache {
  long lo = -1, hi = -1;              // covers suffix indices j in [lo, hi]
  std::vector<MatrixXcd> t, e, f;     // seg[j - lo] = S_j = X_j X_{j+1} ... X_{n-1}
};

RingSolveStats ring_sweep(RingEngine& eng, std::uint64_t seed) {
  const long n = eng.n, chi = eng.chi;
  const long dt = eng.dimT();
  const long de = eng.dimE();
  const long df = eng.dimF();
  const long ckpt = std::max<long>(4, std::min<long>(16, n));

  // checkpointed suffixes S_j = X_j ... X_{n-1} for j = marks
  std::vector<long> marks;
  std::vector<MatrixXcd> ckT, ckE, ckF;
  {
    MatrixXcd st = MatrixXcd::Identity(dt, dt);
    MatrixXcd se = MatrixXcd::Identity(de, de);
    MatrixXcd sf = eng.deflate ? MatrixXcd(MatrixXcd::Identity(df, df)) : MatrixXcd();
    for (long j = n - 1; j >= 1; --j) {
      st = eng.site_T(j) * st;
      se = eng.site_E(j) * se;
      if (eng.deflate) sf = eng.site_F(j) * sf;
      if ((j - 1) % ckpt == 0) {
        marks.push_back(j);
        ckT.push_back(st);
        ckE.push_back(se);
        if (eng.deflate) ckF.push_back(sf);
      }
    }
  }
  auto mark_index = [&](long j) {
    // smallest mark >= j (marks are descending)
    long best = -1;
    for (std::size_t k = 0; k < marks.size(); ++k)
      if (marks[k] >= j) best = static_cast<long>(k);
    return best;
  };

  SegmentCache seg;
  auto load_segment = [&](long j) {
    // fill seg with suffixes for [j, mark] where mark is the smallest mark >= j
    const long mi = mark_index(j);
    const long mark = mi >= 0 ? marks[static_cast<std::size_t>(mi)] : n;
    seg.lo = j;
    seg.hi = mark;
    const long len = mark - j + 1;
    seg.t.assign(static_cast<std::size_t>(len), MatrixXcd());
    seg.e.assign(static_cast<std::size_t>(len), MatrixXcd());
    if (eng.deflate) seg.f.assign(static_cast<std::size_t>(len), MatrixXcd());
    seg.t[static_cast<std::size_t>(len - 1)] = mi >= 0 ? ckT[static_cast<std::size_t>(mi)] : MatrixXcd::Identity(dt, dt);
    seg.e[static_cast<std::size_t>(len - 1)] = mi >= 0 ? ckE[static_cast<std::size_t>(mi)] : MatrixXcd::Identity(de, de);
    if (eng.deflate)
      seg.f[static_cast<std::size_t>(len - 1)] =
          mi >= 0 ? ckF[static_cast<std::size_t>(mi)] : MatrixXcd::Identity(df, df);
    for (long t = len - 2; t >= 0; --t) {
      const long site = j + t;
      seg.t[static_cast<std::size_t>(t)] = eng.site_T(site) * seg.t[static_cast<std::size_t>(t + 1)];
      seg.e[static_cast<std::size_t>(t)] = eng.site_E(site) * seg.e[static_cast<std::size_t>(t + 1)];
      if (eng.deflate)
        seg.f[static_cast<std::size_t>(t)] = eng.site_F(site) * seg.f[static_cast<std::size_t>(t + 1)];
    }
  };

  MatrixXcd preT = MatrixXcd::Identity(dt, dt);
  MatrixXcd preE = MatrixXcd::Identity(de, de);
  MatrixXcd preF = eng.deflate ? MatrixXcd(MatrixXcd::Identity(df, df)) : MatrixXcd();

  RingSolveStats stats;
  for (long i = 0; i < n; ++i) {
    const long j = i + 1;  // suffix starts after the active site
    if (j > seg.hi || seg.lo < 0 || j < seg.lo) {
      if (j >= n) {
        seg.lo = seg.hi = j;
        seg.t.assign(1, MatrixXcd::Identity(dt, dt));
        seg.e.assign(1, MatrixXcd::Identity(de, de));
        if (eng.deflate) seg.f.assign(1, MatrixXcd::Identity(df, df));
      } else {
        load_segment(j);
      }
    }
    const auto off = static_cast<std::size_t>(j - seg.lo);
    MatrixXcd mt = seg.t[off] * preT;
    MatrixXcd me = seg.e[off] * preE;
    MatrixXcd mf;
    if (eng.deflate) mf = seg.f[off] * preF;

    // metric G[(a a'),(b b')] = Me[(a' b'),(a b)], Hermitian PSD up to noise
    MatrixXcd g(de, de);
    for (long a1 = 0; a1 < chi; ++a1)
      for (long a2 = 0; a2 < chi; ++a2)
        for (long b1 = 0; b1 < chi; ++b1)
          for (long b2 = 0; b2 < chi; ++b2)
            g(a1 * chi + a2, b1 * chi + b2) = me(a2 * chi + b2, a1 * chi + b1);
    g = 0.5 * (g + g.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> ges(g);
    const double gtop = ges.eigenvalues().maxCoeff();
    std::vector<long> gidx;
    for (long t = de - 1; t >= 0; --t)
      if (ges.eigenvalues()(t) > 1e-12 * gtop) gidx.push_back(t);
    const long grank = static_cast<long>(gidx.size());
    MatrixXcd gv(de, grank);
    Eigen::VectorXd gs(grank);
    for (long t = 0; t < grank; ++t) {
      gv.col(t) = ges.eigenvectors().col(gidx[static_cast<std::size_t>(t)]);
      gs(t) = ges.eigenvalues()(gidx[static_cast<std::size_t>(t)]);
    }
    MatrixXcd to_full = gv * gs.cwiseSqrt().cwiseInverse().asDiagonal();  // (b b') x k
    MatrixXcd to_red_metric = gs.cwiseSqrt().asDiagonal() * gv.adjoint();
    MatrixXcd from_metric = gs.cwiseSqrt().cwiseInverse().asDiagonal() * gv.adjoint();

    // deflation coefficients K[u](b, b') = sum_{q q'} conj(ref_i[u](q, q')) Mf[(q' b'),(q b)]
    std::array<MatrixXcd, 2> kmat;
    if (eng.deflate) {
      const Mats& r = (*eng.ref)[static_cast<std::size_t>(i)];
      const long cr = r[0].rows();
      for (std::size_t u = 0; u < 2; ++u) {
        kmat[u] = MatrixXcd::Zero(chi, chi);
        for (long q = 0; q < cr; ++q)
          for (long qp = 0; qp < cr; ++qp) {
            const Complex c = std::conj(r[u](q, qp));
            if (c == Complex(0, 0)) continue;
            for (long b1 = 0; b1 < chi; ++b1)
              for (long b2 = 0; b2 < chi; ++b2) kmat[u](b1, b2) += c * mf(qp * chi + b2, q * chi + b1);
          }
      }
    }

    auto h_apply = [&](const VectorXcd& xr) {
      std::array<MatrixXcd, 2> xb;
      for (long u = 0; u < 2; ++u)
        xb[static_cast<std::size_t>(u)] = vec_to_mat(to_full * xr.segment(u * grank, grank), chi, chi);
      std::array<MatrixXcd, 2> yb{MatrixXcd::Zero(chi, chi), MatrixXcd::Zero(chi, chi)};
      for (std::size_t mm = 0; mm < 2; ++mm)
        for (std::size_t mp = 0; mp < 2; ++mp)
          for (std::size_t u = 0; u < 2; ++u)
            for (std::size_t d = 0; d < 2; ++d) {
              const Complex c = eng.w[mm][mp](u, d);
              if (c == Complex(0, 0)) continue;
              // y[u](a, a') += c * sum_{b b'} Mt[(mp a' b'),(mm a b)] x[d](b, b')
              for (long a1 = 0; a1 < chi; ++a1)
                for (long a2 = 0; a2 < chi; ++a2) {
                  const auto row = static_cast<long>(mp) * de + a2 * chi;
                  const auto col = static_cast<long>(mm) * de + a1 * chi;
                  yb[u](a1, a2) += c * (mt.block(row, col, chi, chi).transpose().array() *
                                        xb[d].array())
                                           .sum();
                }
            }
      if (eng.deflate) {
        Complex ov(0, 0);
        for (std::size_t u = 0; u < 2; ++u) ov += (kmat[u].array() * xb[u].array()).sum();
        for (std::size_t u = 0; u < 2; ++u) yb[u] -= (eng.e0 * ov) * kmat[u].conjugate();
      }
      VectorXcd yr(2 * grank);
      for (long u = 0; u < 2; ++u)
        yr.segment(u * grank, grank) = from_metric * mat_to_vec(yb[static_cast<std::size_t>(u)]);
      return yr;
    };

    VectorXcd x0(2 * grank);
    for (long u = 0; u < 2; ++u)
      x0.segment(u * grank, grank) =
          to_red_metric * mat_to_vec(eng.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)]);
    if (x0.norm() < 1e-12) x0 = seeded_vector(2 * grank, seed + static_cast<std::uint64_t>(i));

    ArnoldiOptions ao;
    ao.tol = 1e-10;
    ao.throw_on_fail = false;
    ao.start = &x0;
    auto pairs = dominant_eigs(h_apply, 2 * grank, 2, seed + static_cast<std::uint64_t>(i), ao);
    std::size_t pick = 0;
    if (pairs.size() > 1 &&
        std::abs(std::abs(pairs[0].value) - std::abs(pairs[1].value)) < 1e-6 * std::abs(pairs[0].value))
      pick = std::abs(x0.normalized().dot(pairs[0].vector)) >=
                     std::abs(x0.normalized().dot(pairs[1].vector))
                 ? 0
                 : 1;
    stats.lambda = pairs[pick].value;
    const VectorXcd& v = pairs[pick].vector;
    stats.residual = (h_apply(v) - stats.lambda * v).norm() / std::max(1.0, std::abs(stats.lambda));

    // metric normalization of the winner fixes <psi|psi> = 1
    for (std::size_t u = 0; u < 2; ++u)
      eng.a[static_cast<std::size_t>(i)][u] = vec_to_mat(to_full * v.segment(static_cast<long>(u) * grank, grank), chi, chi);

    preT = preT * eng.site_T(i);
    preE = preE * eng.site_E(i);
    if (eng.deflate) preF = preF * eng.site_F(i);
  }
  return stats;
}

std::vector<Mats> ring_initial_state(MeasurementAngle theta, long n, long chi, std::uint64_t seed,
                                     bool randomize) {
  // embed the infinite fixed-point tensor, breaking exact uniformity slightly
  FixedPointResult fp = power_fixed_point(theta, chi, 1e-8, 600);
  auto al = detail::site_mats(fp.psi.a);
  const long k = al[0].rows();
  std::mt19937_64 rng(seed ^ 0x21c5);
  auto noise = [&rng]() { return (static_cast<double>(rng() >> 11) / 9007199254740992.0) - 0.5; };
  std::vector<Mats> a(static_cast<std::size_t>(n));
  const double amp = randomize ? 0.2 : 0.02;
  for (long i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < 2; ++s) {
      MatrixXcd m = MatrixXcd::Zero(chi, chi);
      m.topLeftCorner(k, k) = al[s];
      for (long r = 0; r < chi; ++r)
        for (long c = 0; c < chi; ++c) m(r, c) += amp * noise();
      a[static_cast<std::size_t>(i)][s] = m;
    }
  }
  return a;
}

struct RingResult {
  Complex lambda{0, 0};
  std::vector<Mats> a;
  long sweeps = 0;
  double residual = 0;
  bool converged = false;
};

RingResult ring_solve(MeasurementAngle theta, long n, long chi, const FiniteOptions& opts,
                      const Deflation& defl, const std::vector<Mats>* ref_mats) {
  RingEngine eng;
  eng.n = n;
  eng.chi = chi;
  eng.w = w_blocks(build_bulk_mpo(theta).w);
  eng.deflate = defl.active;
  eng.e0 = defl.e0;
  eng.ref = ref_mats;

  if (opts.warm_start != nullptr && opts.warm_start->n == n && opts.warm_start->bc == Boundary::Periodic &&
      opts.warm_start->tensors[0].dim(0) == chi) {
    eng.a.clear();
    for (const auto& t : opts.warm_start->tensors) eng.a.push_back(to_mats(t));
  } else {
    eng.a = ring_initial_state(theta, n, chi, opts.seed, defl.active);
  }

  RingResult out;
  Complex prev(1e300, 0);
  for (long sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    RingSolveStats stats = ring_sweep(eng, opts.seed + 1000 * static_cast<std::uint64_t>(sweep));
    out.lambda = stats.lambda;
    out.residual = stats.residual;
    out.sweeps = sweep + 1;
    if (std::abs(stats.lambda - prev) <= opts.tol * std::max(1.0, std::abs(stats.lambda)) && sweep >= 1) {
      out.converged = true;
      break;
    }
    prev = stats.lambda;
  }
  out.a = std::move(eng.a);
  return out;
}

FiniteMPS pack_mps(std::vector<Mats>&& a, long n, Boundary bc) {
  FiniteMPS psi;
  psi.n = n;
  psi.bc = bc;
  psi.tensors.reserve(a.size());
  for (auto& m : a) psi.tensors.push_back(from_mats(m));
  psi.chi = mps_chi(psi);
  return psi;
}

PhaseBranch classify(const FiniteMPS& psi) {
  SchmidtSpectrum sp = mid_chain_spectrum(psi);
  return sp.pair_degeneracy <= 0.1 ? PhaseBranch::TwoFold : PhaseBranch::Trivial;
}

}  // namespace

GroundResult ground_state(MeasurementAngle theta, long n, Boundary bc, long chi, const FiniteOptions& opts) {
  if (n < 4) throw std::invalid_argument("ground_state: need n >= 4");
  GroundResult out;
  Deflation none;
  if (bc == Boundary::Open) {
    ObcResult r = obc_solve(theta, n, chi, opts, none);
    out.e0 = r.lambda;
    out.psi = pack_mps(std::move(r.a), n, bc);
    out.sweeps = r.sweeps;
    out.residual = r.residual;
    out.converged = r.converged;
  } else {
    RingResult r = ring_solve(theta, n, chi, opts, none, nullptr);
    out.e0 = r.lambda;
    out.psi = pack_mps(std::move(r.a), n, bc);
    out.sweeps = r.sweeps;
    out.residual = r.residual;
    out.converged = r.converged;
  }
  return out;
}

ExcitedResult excited_state(MeasurementAngle theta, long n, Boundary bc, long chi, const FiniteMPS& psi0,
                            Complex e0, const FiniteOptions& opts) {
  if (psi0.n != n || psi0.bc != bc) throw std::invalid_argument("excited_state: psi0 does not match");
  FiniteMPS ref_norm = psi0;
  mps_normalize(ref_norm);
  std::vector<Mats> ref;
  for (const auto& t : ref_norm.tensors) ref.push_back(to_mats(t));
  Deflation defl;
  defl.active = true;
  defl.e0 = e0;
  defl.ref = &ref;

  ExcitedResult out;
  if (bc == Boundary::Open) {
    ObcResult r = obc_solve(theta, n, chi, opts, defl);
    out.e1 = r.lambda;
    out.psi = pack_mps(std::move(r.a), n, bc);
    out.sweeps = r.sweeps;
    out.residual = r.residual;
    out.converged = r.converged;
  } else {
    RingResult r = ring_solve(theta, n, chi, opts, defl, &ref);
    out.e1 = r.lambda;
    out.psi = pack_mps(std::move(r.a), n, bc);
    out.sweeps = r.sweeps;
    out.residual = r.residual;
    out.converged = r.converged;
  }
  FiniteMPS a = out.psi;
  mps_normalize(a);
  out.overlap = std::abs(mps_inner(ref_norm, a));
  return out;
}

std::vector<SpectrumPair> gap_scan(std::span<const double> thetas, std::span<const long> ns, Boundary bc,
                                   long chi, const FiniteOptions& opts) {
  if (thetas.empty() || ns.empty()) throw std::invalid_argument("gap_scan: empty grid");
  std::vector<double> grid(thetas.begin(), thetas.end());
  std::sort(grid.begin(), grid.end());

  std::vector<SpectrumPair> out;
  for (long n : ns) {
    std::vector<SpectrumPair> row(grid.size());
    const long nthreads = std::max<long>(1, opts.threads);
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mu;
    auto worker = [&]() {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= grid.size()) return;
          i = next++;
        }
        FiniteOptions local = opts;
        local.threads = 1;
        local.warm_start = nullptr;
        GroundResult g = ground_state(MeasurementAngle(grid[i]), n, bc, chi, local);
        ExcitedResult e = excited_state(MeasurementAngle(grid[i]), n, bc, chi, g.psi, g.e0, local);
        SpectrumPair sp;
        sp.theta = grid[i];
        sp.n = n;
        sp.e0 = g.e0;
        sp.e1 = e.e1;
        sp.gap = std::abs(g.e0) - std::abs(e.e1);
        sp.branch0 = classify(g.psi);
        sp.branch1 = classify(e.psi);
        sp.ee0 = mid_chain_spectrum(g.psi).ee;
        sp.ee1 = mid_chain_spectrum(e.psi).ee;
        sp.converged = g.converged && e.converged;
        row[i] = std::move(sp);
      }
    };
    for (long t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& sp : row) out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace clb
