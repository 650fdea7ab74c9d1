#include "clb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace clb {

namespace {

long shape_product(std::span<const long> shape) {
  long n = 1;
  for (long d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative extent");
    n *= d;
  }
  return n;
}

std::string shape_string(std::span<const long> shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace

Tensor::Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(shape_product(shape_)), Complex(0, 0));
}

Tensor::Tensor(std::vector<long> shape, std::vector<Complex> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != static_cast<long>(data_.size()))
    throw std::invalid_argument("tensor: data size does not match shape " + shape_string(shape_));
}

Complex& Tensor::at(std::span<const long> idx) {
  return const_cast<Complex&>(std::as_const(*this).at(idx));
}

const Complex& Tensor::at(std::span<const long> idx) const {
  if (static_cast<long>(idx.size()) != rank()) throw std::out_of_range("tensor: wrong index rank");
  long off = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (idx[a] < 0 || idx[a] >= shape_[a])
      throw std::out_of_range("tensor: index " + std::to_string(idx[a]) + " out of range for axis " +
                              std::to_string(a));
    off = off * shape_[a] + idx[a];
  }
  return data_[static_cast<std::size_t>(off)];
}

Tensor Tensor::permuted(std::span<const long> axes) const {
  if (static_cast<long>(axes.size()) != rank()) throw std::invalid_argument("permute: wrong axis count");
  std::vector<long> seen(shape_.size(), 0);
  std::vector<long> new_shape(shape_.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] < 0 || axes[i] >= rank() || seen[static_cast<std::size_t>(axes[i])]++)
      throw std::invalid_argument("permute: invalid axis list");
    new_shape[i] = shape_[static_cast<std::size_t>(axes[i])];
  }
  Tensor out(new_shape);
  const long r = rank();
  if (r == 0) {
    out.data_ = data_;
    return out;
  }
  std::vector<long> old_strides(shape_.size(), 1);
  for (long a = r - 2; a >= 0; --a)
    old_strides[static_cast<std::size_t>(a)] =
        old_strides[static_cast<std::size_t>(a + 1)] * shape_[static_cast<std::size_t>(a + 1)];
  // stride of new axis i in the old linearization
  std::vector<long> strides(shape_.size());
  for (std::size_t i = 0; i < axes.size(); ++i) strides[i] = old_strides[static_cast<std::size_t>(axes[i])];

  std::vector<long> idx(shape_.size(), 0);
  long old_off = 0;
  const long n = size();
  for (long lin = 0; lin < n; ++lin) {
    out.data_[static_cast<std::size_t>(lin)] = data_[static_cast<std::size_t>(old_off)];
    for (long a = r - 1; a >= 0; --a) {
      auto ua = static_cast<std::size_t>(a);
      if (++idx[ua] < new_shape[ua]) {
        old_off += strides[ua];
        break;
      }
      idx[ua] = 0;
      old_off -= strides[ua] * (new_shape[ua] - 1);
    }
  }
  return out;
}

Tensor Tensor::reshaped(std::vector<long> shape) const {
  long known = 1;
  long infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw std::invalid_argument("reshape: more than one inferred extent");
      infer = static_cast<long>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || size() % known != 0) throw std::invalid_argument("reshape: cannot infer extent");
    shape[static_cast<std::size_t>(infer)] = size() / known;
  } else if (known != size()) {
    throw std::invalid_argument("reshape: size mismatch " + shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

Tensor Tensor::conjugated() const {
  Tensor out = *this;
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

double Tensor::norm() const {
  double s = 0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const Complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

Tensor& Tensor::operator*=(Complex s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (shape_ != other.shape_) throw std::invalid_argument("tensor add: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  if (shape_ != other.shape_) throw std::invalid_argument("tensor sub: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

MatrixXcd Tensor::matrix(long row_axes) const {
  if (row_axes < 0 || row_axes > rank()) throw std::invalid_argument("matrix: bad row axis count");
  long rows = 1, cols = 1;
  for (long a = 0; a < row_axes; ++a) rows *= dim(a);
  for (long a = row_axes; a < rank(); ++a) cols *= dim(a);
  MatrixXcd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = data_[static_cast<std::size_t>(r * cols + c)];
  return m;
}

Tensor Tensor::from_matrix(const MatrixXcd& m, std::vector<long> row_shape, std::vector<long> col_shape) {
  if (shape_product(row_shape) != m.rows() || shape_product(col_shape) != m.cols())
    throw std::invalid_argument("from_matrix: shape mismatch");
  std::vector<long> shape = row_shape;
  shape.insert(shape.end(), col_shape.begin(), col_shape.end());
  Tensor out(std::move(shape));
  const long cols = m.cols();
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < cols; ++c) out.data_[static_cast<std::size_t>(r * cols + c)] = m(r, c);
  return out;
}

Tensor contract(const Tensor& a, const Tensor& b, std::span<const std::pair<long, long>> pairs) {
  std::vector<long> a_used(a.shape().size(), 0), b_used(b.shape().size(), 0);
  for (const auto& [pa, pb] : pairs) {
    if (pa < 0 || pa >= a.rank() || pb < 0 || pb >= b.rank())
      throw std::invalid_argument("contract: axis out of range");
    if (a_used[static_cast<std::size_t>(pa)]++ || b_used[static_cast<std::size_t>(pb)]++)
      throw std::invalid_argument("contract: axis listed twice");
    if (a.dim(pa) != b.dim(pb))
      throw std::invalid_argument("contract: dimension mismatch on pair (" + std::to_string(pa) + "," +
                                  std::to_string(pb) + ")");
  }
  std::vector<long> a_free, b_free, a_perm, b_perm;
  for (long ax = 0; ax < a.rank(); ++ax)
    if (!a_used[static_cast<std::size_t>(ax)]) a_free.push_back(ax);
  for (long ax = 0; ax < b.rank(); ++ax)
    if (!b_used[static_cast<std::size_t>(ax)]) b_free.push_back(ax);

  a_perm = a_free;
  for (const auto& p : pairs) a_perm.push_back(p.first);
  for (const auto& p : pairs) b_perm.push_back(p.second);
  b_perm.insert(b_perm.end(), b_free.begin(), b_free.end());

  Tensor ap = a.permuted(a_perm);
  Tensor bp = b.permuted(b_perm);
  MatrixXcd am = ap.matrix(static_cast<long>(a_free.size()));
  MatrixXcd bm = bp.matrix(static_cast<long>(pairs.size()));
  MatrixXcd rm = am * bm;

  std::vector<long> row_shape, col_shape;
  for (long ax : a_free) row_shape.push_back(a.dim(ax));
  for (long ax : b_free) col_shape.push_back(b.dim(ax));
  return Tensor::from_matrix(rm, std::move(row_shape), std::move(col_shape));
}

Tensor contract(const Tensor& a, const Tensor& b, std::initializer_list<std::pair<long, long>> pairs) {
  return contract(a, b, std::span<const std::pair<long, long>>(pairs.begin(), pairs.size()));
}

SvdResult svd_truncate(const Tensor& m, long chi_max, double weight_tol) {
  if (m.rank() != 2) throw std::invalid_argument("svd_truncate: tensor must have two indices");
  if (chi_max < 1) throw std::invalid_argument("svd_truncate: chi_max must be positive");
  if (!m.all_finite()) throw std::runtime_error("svd_truncate: non-finite input");

  MatrixXcd mat = m.matrix(1);
  Eigen::BDCSVD<MatrixXcd> svd;
  svd.compute(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();

  const long full = sv.size();
  const double smax = full > 0 ? sv(0) : 0.0;
  long keep = std::min<long>(chi_max, full);
  while (keep > 1 && sv(keep - 1) < weight_tol * smax) --keep;

  SvdResult out;
  out.report.kept = keep;
  out.report.spectrum.assign(sv.data(), sv.data() + keep);
  double dw = 0;
  for (long i = keep; i < full; ++i) dw += sv(i) * sv(i);
  out.report.discarded_weight = dw;
  out.s.assign(sv.data(), sv.data() + keep);
  MatrixXcd u = svd.matrixU().leftCols(keep);
  MatrixXcd vt = svd.matrixV().leftCols(keep).adjoint();
  out.u = Tensor::from_matrix(u, {m.dim(0)}, {keep});
  out.vt = Tensor::from_matrix(vt, {keep}, {m.dim(1)});
  return out;
}

VectorXcd seeded_vector(long dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  VectorXcd v(dim);
  // Box-Muller; std::normal_distribution is not pinned across library versions
  auto uniform = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  for (long i = 0; i < dim; ++i) {
    double u1 = uniform(), u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    v(i) = Complex(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
  }
  v.normalize();
  return v;
}

namespace {

struct RitzPair {
  Complex value;
  VectorXcd vector;
  double residual;
};

bool eig_order(const Complex& a, const Complex& b) {
  double ma = std::abs(a), mb = std::abs(b);
  if (std::abs(ma - mb) > 1e-14 * std::max(ma, mb)) return ma > mb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

std::vector<EigPair> dense_eigs(const LinearMap& apply, long dim, long k) {
  MatrixXcd full(dim, dim);
  VectorXcd e = VectorXcd::Zero(dim);
  for (long j = 0; j < dim; ++j) {
    e(j) = 1.0;
    full.col(j) = apply(e);
    e(j) = 0.0;
  }
  Eigen::ComplexEigenSolver<MatrixXcd> es(full);
  std::vector<long> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](long i, long j) { return eig_order(es.eigenvalues()(i), es.eigenvalues()(j)); });
  std::vector<EigPair> out;
  for (long i = 0; i < k; ++i) {
    VectorXcd v = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    v.normalize();
    out.push_back({es.eigenvalues()(order[static_cast<std::size_t>(i)]), v});
  }
  return out;
}

}  // namespace

std::vector<EigPair> dominant_eigs(const LinearMap& apply, long dim, long k, std::uint64_t seed,
                                   const ArnoldiOptions& opts) {
  if (k < 1 || k > dim) throw std::invalid_argument("dominant_eigs: need 1 <= k <= dim");
  if (dim <= std::max<long>(300, 3 * k + 10)) return dense_eigs(apply, dim, k);

  // Restarted Arnoldi with locked deflation: eigenpairs are converged one at a
  // time against the map projected off the already-locked (Schur-like) vectors,
  // then the small projected eigenproblem recovers the true eigenpairs.
  const long m_base = std::min<long>(dim, opts.subspace > 0 ? opts.subspace : std::max<long>(3 * k + 10, 24));

  std::vector<VectorXcd> locked;
  auto deflate = [&](VectorXcd v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : locked) v -= u.dot(v) * u;
    return v;
  };
  auto apply_deflated = [&](const VectorXcd& v) { return deflate(apply(deflate(v))); };

  double top_scale = 0.0;
  VectorXcd start = (opts.start != nullptr && opts.start->size() == dim) ? opts.start->normalized()
                                                                         : seeded_vector(dim, seed);
  const long restart_budget = std::max<long>(opts.max_restarts / k, 40);
  bool all_locked = true;

  for (long slot = 0; slot < k; ++slot) {
    VectorXcd v0 = deflate(start);
    if (v0.norm() < 1e-12) v0 = deflate(seeded_vector(dim, seed + 17 * static_cast<std::uint64_t>(slot)));
    v0.normalize();

    VectorXcd best_v;
    Complex best_lam(0, 0);
    double best_res = std::numeric_limits<double>::infinity();
    long stall = 0;
    long m = m_base;

    for (long restart = 0; restart < restart_budget; ++restart) {
      std::vector<VectorXcd> basis;
      basis.reserve(static_cast<std::size_t>(m) + 1);
      MatrixXcd h = MatrixXcd::Zero(m + 1, m);
      basis.push_back(v0);
      long built = m;
      for (long j = 0; j < m; ++j) {
        VectorXcd w = apply_deflated(basis[static_cast<std::size_t>(j)]);
        for (int pass = 0; pass < 2; ++pass) {
          for (long i = 0; i <= j; ++i) {
            Complex c = basis[static_cast<std::size_t>(i)].dot(w);
            w -= c * basis[static_cast<std::size_t>(i)];
            h(i, j) += c;
          }
        }
        const double nw = w.norm();
        h(j + 1, j) = nw;
        if (nw < 1e-14) {
          built = j + 1;  // invariant subspace exhausted
          break;
        }
        basis.push_back(w / nw);
      }

      MatrixXcd hm = h.topLeftCorner(built, built);
      Eigen::ComplexEigenSolver<MatrixXcd> es(hm);
      long oi = 0;
      for (long i = 1; i < built; ++i)
        if (eig_order(es.eigenvalues()(i), es.eigenvalues()(oi))) oi = i;
      VectorXcd v = VectorXcd::Zero(dim);
      for (long j = 0; j < built; ++j) v += es.eigenvectors()(j, oi) * basis[static_cast<std::size_t>(j)];
      v.normalize();
      const Complex lam = es.eigenvalues()(oi);
      const double res = (apply_deflated(v) - lam * v).norm();

      if (res < best_res) {
        best_res = res;
        best_v = v;
        best_lam = lam;
        stall = 0;
      } else if (++stall >= 12 && m < std::min(dim, 4 * m_base)) {
        m = std::min(dim, 2 * m);  // widen the subspace when restarts stagnate
        stall = 0;
      }
      const double scale = std::max({std::abs(best_lam), 0.01 * top_scale, 1e-300});
      if (best_res <= opts.tol * scale || built < m) break;
      v0 = best_v;
    }

    if (slot == 0) top_scale = std::abs(best_lam);
    const double scale = std::max({std::abs(best_lam), 0.01 * top_scale, 1e-300});
    if (best_res > std::max(opts.tol, 1e-9) * scale) all_locked = false;

    // orthonormalize into the locked set
    VectorXcd u = deflate(best_v);
    if (u.norm() > 1e-12) {
      u.normalize();
      locked.push_back(std::move(u));
    } else {
      locked.push_back(seeded_vector(dim, seed + 31 * static_cast<std::uint64_t>(slot)));
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i + 1 < locked.size(); ++i)
          locked.back() -= locked[i].dot(locked.back()) * locked[i];
      locked.back().normalize();
    }
    start = seeded_vector(dim, seed + 7 + static_cast<std::uint64_t>(slot));
  }

  // projected eigenproblem on the locked subspace recovers the true eigenpairs
  const long nk = static_cast<long>(locked.size());
  MatrixXcd proj(nk, nk);
  std::vector<VectorXcd> images(static_cast<std::size_t>(nk));
  for (long j = 0; j < nk; ++j) {
    images[static_cast<std::size_t>(j)] = apply(locked[static_cast<std::size_t>(j)]);
    for (long i = 0; i < nk; ++i) proj(i, j) = locked[static_cast<std::size_t>(i)].dot(images[static_cast<std::size_t>(j)]);
  }
  Eigen::ComplexEigenSolver<MatrixXcd> pes(proj);
  std::vector<long> order(static_cast<std::size_t>(nk));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](long i, long j) { return eig_order(pes.eigenvalues()(i), pes.eigenvalues()(j)); });

  std::vector<EigPair> out;
  double worst = std::numeric_limits<double>::infinity();
  const double top = std::abs(pes.eigenvalues()(order[0]));
  worst = 0;
  for (long i = 0; i < k; ++i) {
    const long oi = order[static_cast<std::size_t>(i)];
    VectorXcd v = VectorXcd::Zero(dim);
    for (long j = 0; j < nk; ++j) v += pes.eigenvectors()(j, oi) * locked[static_cast<std::size_t>(j)];
    v.normalize();
    const Complex lam = pes.eigenvalues()(oi);
    const double res = (apply(v) - lam * v).norm();
    worst = std::max(worst, res / std::max({std::abs(lam), 0.01 * top, 1e-300}));
    out.push_back({lam, std::move(v)});
  }
  if ((worst > opts.tol || !all_locked) && opts.throw_on_fail)
    throw std::runtime_error("dominant_eigs: no convergence, relative residual " + std::to_string(worst));
  return out;
}

}  // namespace clb
