#include "clb/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "mps_detail.hpp"

namespace clb {

using detail::apply_right;
using detail::canonicalize_mats;
using detail::mat_to_vec;
using detail::mats_to_tensor;
using detail::site_mats;
using detail::vec_to_mat;

namespace {

// One MPO layer: contract W (l, r, u, d) with A (a, s, b) over (d, s).
// New bonds are (w, a) pairs, so the bond dimension multiplies by the MPO bond.
Tensor apply_row(const Tensor& a, const Tensor& w) {
  Tensor t = contract(w, a, {{3, 1}});            // (wl, wr, u, a, b)
  Tensor p = t.permuted({0, 3, 2, 1, 4});         // (wl, a, u, wr, b)
  const long chi = a.dim(0);
  const long wb = w.dim(0);
  return p.reshaped({wb * chi, w.dim(2), wb * chi});
}

double spectrum_distance(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double d2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    d2 += (x - y) * (x - y);
  }
  return std::sqrt(d2);
}

Complex growth_phase(const Tensor& before, const Tensor& after) {
  // dominant eigenvalue of the mixed transfer map between the input state and
  // its single-layer image fixes the sign of the per-site eigenvalue
  auto ket = site_mats(after);
  auto bra = site_mats(before);
  const long rows = ket[0].rows(), cols = bra[0].rows();
  LinearMap map = [&](const VectorXcd& v) {
    MatrixXcd x = vec_to_mat(v, ket[0].cols(), bra[0].cols());
    MatrixXcd y = MatrixXcd::Zero(rows, cols);
    for (std::size_t s = 0; s < ket.size(); ++s) y += ket[s] * x * bra[s].adjoint();
    return mat_to_vec(y);
  };
  if (ket[0].cols() != ket[0].rows() || bra[0].cols() != bra[0].rows()) return Complex(1, 0);
  auto p = dominant_eigs(map, rows * cols, 1, 77, {.tol = 1e-8, .max_restarts = 200, .throw_on_fail = false});
  const Complex lam = p[0].value;
  return std::abs(lam) > 0 ? lam / std::abs(lam) : Complex(1, 0);
}

}  // namespace

PowerStepResult power_step(const UniformMPS& psi, const RowOperator& h, long chi) {
  if (psi.a.dim(1) != h.w.dim(3)) throw std::invalid_argument("power_step: physical dimensions differ");
  Tensor raw = apply_row(psi.a, h.w);
  if (!raw.all_finite()) throw std::runtime_error("power_step: non-finite tensor after layer");
  auto parts = canonicalize_mats(site_mats(raw));
  PowerStepResult out;
  out.growth = std::sqrt(parts.lambda);
  out.psi = detail::truncate_parts(parts, chi, out.report);
  if (!out.psi.a.all_finite()) throw std::runtime_error("power_step: truncation produced non-finite data");
  return out;
}

FixedPointResult power_fixed_point(MeasurementAngle theta, long chi, double tol, long max_layers) {
  const RowOperator h = build_bulk_mpo(theta);
  const bool at_limit = std::abs(theta.theta - M_PI_2) < 1e-12;

  UniformMPS psi = build_lower_boundary_imps(theta);
  TruncationReport rep;
  psi = truncate_to(psi, chi, rep);  // canonical, normalized
  std::vector<double> prev = rep.spectrum;

  FixedPointResult out;
  double growth = 0;
  double dist = 1e300;
  long layer = 0;
  Tensor before = psi.a;
  for (; layer < max_layers; ++layer) {
    before = psi.a;
    PowerStepResult step = power_step(psi, h, chi);
    psi = std::move(step.psi);
    growth = step.growth;
    dist = spectrum_distance(step.report.spectrum, prev);
    prev = std::move(step.report.spectrum);
    if (dist < tol) {
      ++layer;
      break;
    }
  }

  out.psi = std::move(psi);
  out.iterations = layer;
  out.residual = dist;
  out.converged = !at_limit && dist < tol;
  out.per_site_eigenvalue = growth * growth_phase(before, out.psi.a);
  return out;
}

namespace {

struct VumpsState {
  std::vector<MatrixXcd> al, ar, ac;
  MatrixXcd c;
  long chi = 0;
};

// w(l, r, u, d) indexed [l][r](u, d)
using WBlocks = std::array<std::array<Eigen::Matrix2cd, 2>, 2>;

WBlocks w_blocks(const Tensor& w) {
  WBlocks b;
  for (long l = 0; l < 2; ++l)
    for (long r = 0; r < 2; ++r)
      for (long u = 0; u < 2; ++u)
        for (long d = 0; d < 2; ++d)
          b[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)](u, d) = w.at({l, r, u, d});
  return b;
}

// environment slices FL[m], FR[m] are chi x chi matrices over (bra bond, ket bond)
std::vector<MatrixXcd> env_left_apply(const std::vector<MatrixXcd>& fl, const std::vector<MatrixXcd>& al,
                                      const WBlocks& w) {
  const long chi = al[0].rows();
  std::vector<MatrixXcd> out(2, MatrixXcd::Zero(chi, chi));
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t mp = 0; mp < 2; ++mp)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t d = 0; d < 2; ++d) {
          const Complex coeff = w[m][mp](u, d);
          if (coeff == Complex(0, 0)) continue;
          out[mp] += coeff * (al[u].adjoint() * fl[m] * al[d]);
        }
  return out;
}

std::vector<MatrixXcd> env_right_apply(const std::vector<MatrixXcd>& fr, const std::vector<MatrixXcd>& ar,
                                       const WBlocks& w) {
  const long chi = ar[0].rows();
  std::vector<MatrixXcd> out(2, MatrixXcd::Zero(chi, chi));
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t mp = 0; mp < 2; ++mp)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t d = 0; d < 2; ++d) {
          const Complex coeff = w[m][mp](u, d);
          if (coeff == Complex(0, 0)) continue;
          out[m] += coeff * (ar[u].conjugate() * fr[mp] * ar[d].transpose());
        }
  return out;
}

VectorXcd env_to_vec(const std::vector<MatrixXcd>& f) {
  const long chi = f[0].rows();
  VectorXcd v(2 * chi * chi);
  v.segment(0, chi * chi) = mat_to_vec(f[0]);
  v.segment(chi * chi, chi * chi) = mat_to_vec(f[1]);
  return v;
}

std::vector<MatrixXcd> vec_to_env(const VectorXcd& v, long chi) {
  return {vec_to_mat(v.segment(0, chi * chi), chi, chi), vec_to_mat(v.segment(chi * chi, chi * chi), chi, chi)};
}

// pick the eigenpair closest in direction to the previous vector
const EigPair& continuity_pick(const std::vector<EigPair>& pairs, const VectorXcd* prev) {
  if (prev == nullptr || prev->size() == 0) return pairs[0];
  double best = -1;
  std::size_t bi = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (std::abs(pairs[i].value) < 0.5 * std::abs(pairs[0].value)) break;
    const double ov = std::abs(prev->dot(pairs[i].vector));
    if (ov > best) {
      best = ov;
      bi = i;
    }
  }
  return pairs[bi];
}

void phase_align(VectorXcd& v, const VectorXcd* prev) {
  Complex ov;
  if (prev != nullptr && prev->size() == v.size() && (ov = prev->dot(v), std::abs(ov) > 1e-12)) {
    v *= std::conj(ov) / std::abs(ov);
    return;
  }
  long imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  v *= std::conj(v(imax)) / std::abs(v(imax));
}

}  // namespace

FixedPointResult vumps_fixed_point(MeasurementAngle theta, long chi, double tol, const VumpsOptions& opts,
                                   const std::optional<UniformMPS>& init) {
  const RowOperator h = build_bulk_mpo(theta);
  const WBlocks w = w_blocks(h.w);

  // inflate the bond dimension with coarse power layers, then refine variationally
  UniformMPS warm = init.value_or(build_lower_boundary_imps(theta));
  {
    TruncationReport rep;
    warm = truncate_to(warm, chi, rep);
    std::vector<double> prev = rep.spectrum;
    for (long i = 0; i < opts.warmup_layers; ++i) {
      PowerStepResult step = power_step(warm, h, chi);
      warm = std::move(step.psi);
      const double dist = spectrum_distance(step.report.spectrum, prev);
      prev = std::move(step.report.spectrum);
      if (warm.chi >= chi && dist < 1e-4) break;
    }
  }

  auto parts = canonicalize_mats(site_mats(warm.a));
  VumpsState st;
  st.al = parts.al;
  st.ar = parts.ar;
  st.chi = parts.schmidt.size();
  st.c = MatrixXcd::Zero(st.chi, st.chi);
  for (long i = 0; i < st.chi; ++i) st.c(i, i) = parts.schmidt(i);
  st.ac.assign(st.al.size(), MatrixXcd());
  for (std::size_t s = 0; s < st.al.size(); ++s) st.ac[s] = st.al[s] * st.c;

  const long chi_run = st.chi;
  const long d = static_cast<long>(st.al.size());
  const long env_dim = 2 * chi_run * chi_run;
  const long ac_dim = d * chi_run * chi_run;

  VectorXcd fl_prev, fr_prev, ac_prev, c_prev;
  FixedPointResult out;
  double err = 1e300;
  double best_err = 1e300;
  long stall = 0;
  Complex lambda(0, 0);

  long iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    // dominant environments of the MPO-dressed transfer channels
    LinearMap lmap = [&](const VectorXcd& v) {
      return env_to_vec(env_left_apply(vec_to_env(v, chi_run), st.al, w));
    };
    LinearMap rmap = [&](const VectorXcd& v) {
      return env_to_vec(env_right_apply(vec_to_env(v, chi_run), st.ar, w));
    };
    ArnoldiOptions eo;
    eo.tol = std::max(1e-12, std::min(1e-8, err * 1e-3));
    eo.throw_on_fail = false;
    eo.start = fl_prev.size() == env_dim ? &fl_prev : nullptr;
    VectorXcd flv = dominant_eigs(lmap, env_dim, 1, opts.seed, eo)[0].vector;
    phase_align(flv, fl_prev.size() == env_dim ? &fl_prev : nullptr);
    eo.start = fr_prev.size() == env_dim ? &fr_prev : nullptr;
    VectorXcd frv = dominant_eigs(rmap, env_dim, 1, opts.seed + 1, eo)[0].vector;
    phase_align(frv, fr_prev.size() == env_dim ? &fr_prev : nullptr);
    fl_prev = flv;
    fr_prev = frv;
    auto fl = vec_to_env(flv, chi_run);
    auto fr = vec_to_env(frv, chi_run);

    // effective single-site problem for AC
    LinearMap ac_map = [&](const VectorXcd& v) {
      std::vector<MatrixXcd> x(static_cast<std::size_t>(d));
      for (long s = 0; s < d; ++s) x[static_cast<std::size_t>(s)] = vec_to_mat(v.segment(s * chi_run * chi_run, chi_run * chi_run), chi_run, chi_run);
      VectorXcd y(ac_dim);
      for (std::size_t u = 0; u < static_cast<std::size_t>(d); ++u) {
        MatrixXcd acc = MatrixXcd::Zero(chi_run, chi_run);
        for (std::size_t m = 0; m < 2; ++m)
          for (std::size_t mp = 0; mp < 2; ++mp)
            for (std::size_t dn = 0; dn < static_cast<std::size_t>(d); ++dn) {
              const Complex coeff = w[m][mp](u, dn);
              if (coeff == Complex(0, 0)) continue;
              acc += coeff * (fl[m] * x[dn] * fr[mp].transpose());
            }
        y.segment(static_cast<long>(u) * chi_run * chi_run, chi_run * chi_run) = mat_to_vec(acc);
      }
      return y;
    };
    ArnoldiOptions ao;
    ao.tol = std::max(1e-13, std::min(1e-9, err * 1e-4));
    ao.throw_on_fail = false;
    ao.start = ac_prev.size() == ac_dim ? &ac_prev : nullptr;
    auto ac_pairs = dominant_eigs(ac_map, ac_dim, 2, opts.seed + 2, ao);
    const EigPair& ac_best = continuity_pick(ac_pairs, ac_prev.size() == ac_dim ? &ac_prev : nullptr);
    VectorXcd acv = ac_best.vector;
    phase_align(acv, ac_prev.size() == ac_dim ? &ac_prev : nullptr);
    const Complex lam_ac = ac_best.value;
    ac_prev = acv;

    // zero-site problem for C
    LinearMap c_map = [&](const VectorXcd& v) {
      MatrixXcd x = vec_to_mat(v, chi_run, chi_run);
      MatrixXcd y = MatrixXcd::Zero(chi_run, chi_run);
      for (std::size_t m = 0; m < 2; ++m) y += fl[m] * x * fr[m].transpose();
      return mat_to_vec(y);
    };
    ArnoldiOptions co = ao;
    co.start = c_prev.size() == chi_run * chi_run ? &c_prev : nullptr;
    auto c_pairs = dominant_eigs(c_map, chi_run * chi_run, 2, opts.seed + 3, co);
    const EigPair& c_best = continuity_pick(c_pairs, c_prev.size() == chi_run * chi_run ? &c_prev : nullptr);
    VectorXcd cv = c_best.vector;
    phase_align(cv, c_prev.size() == chi_run * chi_run ? &c_prev : nullptr);
    const Complex lam_c = c_best.value;
    c_prev = cv;

    lambda = lam_ac / lam_c;

    // gauge update: AL, AR from the polar decompositions of AC against C
    for (long s = 0; s < d; ++s) st.ac[static_cast<std::size_t>(s)] = vec_to_mat(acv.segment(s * chi_run * chi_run, chi_run * chi_run), chi_run, chi_run);
    st.c = vec_to_mat(cv, chi_run, chi_run);

    MatrixXcd ac_l(chi_run * d, chi_run);  // rows (bond, s)? rows (s major: (s, a)) -- consistent packing below
    for (long s = 0; s < d; ++s) ac_l.middleRows(s * chi_run, chi_run) = st.ac[static_cast<std::size_t>(s)];
    MatrixXcd ml = ac_l * st.c.adjoint();
    Eigen::BDCSVD<MatrixXcd> svd_l;
    svd_l.compute(ml, Eigen::ComputeThinU | Eigen::ComputeThinV);
    MatrixXcd al_mat = svd_l.matrixU() * svd_l.matrixV().adjoint();
    for (long s = 0; s < d; ++s) st.al[static_cast<std::size_t>(s)] = al_mat.middleRows(s * chi_run, chi_run);

    MatrixXcd ac_r(chi_run, chi_run * d);
    for (long s = 0; s < d; ++s) ac_r.middleCols(s * chi_run, chi_run) = st.ac[static_cast<std::size_t>(s)];
    MatrixXcd mr = st.c.adjoint() * ac_r;
    Eigen::BDCSVD<MatrixXcd> svd_r;
    svd_r.compute(mr, Eigen::ComputeThinU | Eigen::ComputeThinV);
    MatrixXcd ar_mat = svd_r.matrixU() * svd_r.matrixV().adjoint();
    for (long s = 0; s < d; ++s) st.ar[static_cast<std::size_t>(s)] = ar_mat.middleCols(s * chi_run, chi_run);

    double el = 0, er = 0;
    for (long s = 0; s < d; ++s) {
      el += (st.ac[static_cast<std::size_t>(s)] - st.al[static_cast<std::size_t>(s)] * st.c).squaredNorm();
      er += (st.ac[static_cast<std::size_t>(s)] - st.c * st.ar[static_cast<std::size_t>(s)]).squaredNorm();
    }
    err = std::sqrt(std::max(el, er));
    if (err < tol) {
      ++iter;
      break;
    }
    if (err < best_err * 0.998) {
      best_err = err;
      stall = 0;
    } else if (++stall > 40) {
      break;  // residual plateau
    }
  }

  out.iterations = iter;
  out.residual = err;
  out.converged = err < tol;
  out.per_site_eigenvalue = lambda;
  out.psi = UniformMPS(mats_to_tensor(st.al), d, chi_run);
  return out;
}

namespace {

struct ProbeDiagnostics {
  ProbeRow row;
  UniformMPS psi_power;
};

ProbeDiagnostics probe_theta(double theta, long chi, const CriticalScanOptions& opts) {
  ProbeDiagnostics out;
  MeasurementAngle ang(theta);

  FixedPointResult pw = power_fixed_point(ang, chi, opts.power_tol, opts.power_max_layers);
  FixedPointResult vm = vumps_fixed_point(ang, chi, opts.vumps_tol);

  auto ts_p = transfer_spectrum(pw.psi, 8);
  auto ts_v = transfer_spectrum(vm.psi, 8);
  auto sp_p = entanglement_spectrum(canonicalize(pw.psi));
  auto sp_v = entanglement_spectrum(canonicalize(vm.psi));

  out.row.theta = theta;
  out.row.paired_power = ts_p.paired;
  out.row.paired_vumps = ts_v.paired;
  out.row.pair_degeneracy_power = sp_p.pair_degeneracy;
  out.row.pair_degeneracy_vumps = sp_v.pair_degeneracy;
  out.row.ee_power = sp_p.ee;
  out.row.ee_vumps = sp_v.ee;
  out.row.cx_inf = correlator(pw.psi, PauliOp::X, 2).inf_magnitude;
  out.row.cz_inf = correlator(pw.psi, PauliOp::Z, 2).inf_magnitude;
  out.row.agreed = ts_p.paired == ts_v.paired;
  // the power-method contraction is the defining limit; it breaks disagreements
  out.row.two_fold = ts_p.paired;
  out.psi_power = std::move(pw.psi);
  return out;
}

std::string probe_table(const std::vector<ProbeRow>& rows) {
  std::ostringstream os;
  os << "theta paired_power paired_vumps pair_deg_power pair_deg_vumps\n";
  for (const auto& r : rows)
    os << r.theta << " " << r.paired_power << " " << r.paired_vumps << " " << r.pair_degeneracy_power << " "
       << r.pair_degeneracy_vumps << "\n";
  return os.str();
}

}  // namespace

CriticalPointResult find_theta_c(long chi, std::pair<double, double> bracket, double resolution,
                                 const CriticalScanOptions& opts) {
  CriticalPointResult out;
  out.chi = chi;
  out.indicator = "transfer_pairing";

  auto lo_probe = probe_theta(bracket.first, chi, opts);
  auto hi_probe = probe_theta(bracket.second, chi, opts);
  out.probes.push_back(lo_probe.row);
  out.probes.push_back(hi_probe.row);
  if (lo_probe.row.two_fold || !hi_probe.row.two_fold)
    throw std::invalid_argument("find_theta_c: degenerate bracket, indicator does not differ at endpoints\n" +
                                probe_table(out.probes));

  double lo = bracket.first, hi = bracket.second;
  while (hi - lo > resolution && out.probes.size() < 48) {
    const double mid = 0.5 * (lo + hi);
    auto probe = probe_theta(mid, chi, opts);
    out.probes.push_back(probe.row);
    if (probe.row.two_fold)
      hi = mid;
    else
      lo = mid;
  }

  // the indicator must be monotone across the recorded probes
  double max_false = -1e300, min_true = 1e300;
  for (const auto& r : out.probes) {
    if (r.two_fold)
      min_true = std::min(min_true, r.theta);
    else
      max_false = std::max(max_false, r.theta);
  }
  if (max_false > min_true)
    throw std::runtime_error("find_theta_c: indicator non-monotone within bracket\n" + probe_table(out.probes));

  std::sort(out.probes.begin(), out.probes.end(),
            [](const ProbeRow& a, const ProbeRow& b) { return a.theta < b.theta; });
  out.bracket = {lo, hi};
  out.theta_c = 0.5 * (lo + hi);
  return out;
}

std::vector<TrajectoryRecord> noisy_trajectory(const NoiseSpec& spec, long chi) {
  if (spec.epsilon < 0) throw std::invalid_argument("noisy_trajectory: epsilon must be nonnegative");
  if (spec.layers < 1) throw std::invalid_argument("noisy_trajectory: need at least one layer");
  MeasurementAngle mean(spec.theta_mean);

  std::mt19937_64 rng(spec.seed ^ 0xb0a71a7e5ull);
  auto uniform = [&rng]() { return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0); };
  auto normal = [&]() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * M_PI * u2);
  };

  UniformMPS psi = build_lower_boundary_imps(mean);
  psi = truncate_to(psi, chi);

  std::vector<TrajectoryRecord> records;
  records.reserve(static_cast<std::size_t>(spec.layers));
  for (long layer = 1; layer <= spec.layers; ++layer) {
    double theta = spec.theta_mean + spec.epsilon * normal();
    bool clamped = false;
    if (theta < 0) {
      theta = 0;
      clamped = true;
    } else if (theta > M_PI_2) {
      theta = M_PI_2;
      clamped = true;
    }
    const RowOperator h = build_bulk_mpo(MeasurementAngle(theta));
    psi = power_step(psi, h, chi).psi;

    TrajectoryRecord rec;
    rec.layer = layer;
    rec.theta_used = theta;
    rec.clamped = clamped;
    rec.cx_100 = correlator(psi, PauliOp::X, 100).values.back();
    rec.cz_100 = correlator(psi, PauliOp::Z, 100).values.back();
    rec.ee = entanglement_spectrum(canonicalize(psi)).ee;
    records.push_back(rec);
  }
  return records;
}

}  // namespace clb
