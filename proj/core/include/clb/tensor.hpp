#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace clb {

using Complex = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;
using VectorXcd = Eigen::VectorXcd;

/// Dense multi-index complex tensor with a fixed row-major linearization.
/// The last index runs fastest.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape);
  Tensor(std::vector<long> shape, std::vector<Complex> data);

  long rank() const { return static_cast<long>(shape_.size()); }
  long dim(long axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  const std::vector<long>& shape() const { return shape_; }
  long size() const { return static_cast<long>(data_.size()); }

  const std::vector<Complex>& data() const { return data_; }
  std::vector<Complex>& data() { return data_; }

  Complex& at(std::span<const long> idx);
  const Complex& at(std::span<const long> idx) const;
  Complex& at(std::initializer_list<long> idx) { return at(std::span<const long>(idx.begin(), idx.size())); }
  const Complex& at(std::initializer_list<long> idx) const {
    return at(std::span<const long>(idx.begin(), idx.size()));
  }

  Tensor permuted(std::span<const long> axes) const;
  Tensor permuted(std::initializer_list<long> axes) const {
    return permuted(std::span<const long>(axes.begin(), axes.size()));
  }
  /// Reshape without moving data; an extent of -1 is inferred.
  Tensor reshaped(std::vector<long> shape) const;
  Tensor conjugated() const;

  double norm() const;
  bool all_finite() const;

  Tensor& operator*=(Complex s);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  friend Tensor operator*(Complex s, Tensor t) {
    t *= s;
    return t;
  }
  friend Tensor operator+(Tensor a, const Tensor& b) {
    a += b;
    return a;
  }
  friend Tensor operator-(Tensor a, const Tensor& b) {
    a -= b;
    return a;
  }

  /// View the first `row_axes` indices as rows and the rest as columns.
  MatrixXcd matrix(long row_axes) const;
  static Tensor from_matrix(const MatrixXcd& m, std::vector<long> row_shape, std::vector<long> col_shape);

private:
  std::vector<long> shape_;
  std::vector<Complex> data_;
};

/// Sum over the paired axes of a and b. The result carries the unpaired axes
/// of a (in order) followed by the unpaired axes of b.
Tensor contract(const Tensor& a, const Tensor& b, std::span<const std::pair<long, long>> pairs);
Tensor contract(const Tensor& a, const Tensor& b, std::initializer_list<std::pair<long, long>> pairs);

struct TruncationReport {
  long kept = 0;
  double discarded_weight = 0.0;        // sum of squared discarded singular values
  std::vector<double> spectrum;         // retained singular values, descending
};

struct SvdResult {
  Tensor u;                   // orthonormal columns
  std::vector<double> s;      // descending
  Tensor vt;                  // orthonormal rows
  TruncationReport report;
};

/// Truncated SVD of a two-index tensor. Keeps at most chi_max values and drops
/// values below weight_tol * s_max.
SvdResult svd_truncate(const Tensor& m, long chi_max, double weight_tol = 0.0);

struct EigPair {
  Complex value;
  VectorXcd vector;  // normalized
};

/// y = apply(x); must be a deterministic linear map on C^dim.
using LinearMap = std::function<VectorXcd(const VectorXcd&)>;

struct ArnoldiOptions {
  double tol = 1e-10;     // residual tolerance, relative to |lambda|
  long subspace = 0;      // 0: max(3k+10, 24)
  long max_restarts = 500;
  bool throw_on_fail = true;
  const VectorXcd* start = nullptr;  // warm start; overrides the seeded vector
};

/// The k eigenpairs of largest modulus of a (generally non-Hermitian) map,
/// by restarted Arnoldi iteration with a seeded start vector. Small problems
/// fall back to a dense solve. Equal-modulus eigenvalues are all returned;
/// ties are ordered by descending real part, then descending imaginary part.
std::vector<EigPair> dominant_eigs(const LinearMap& apply, long dim, long k, std::uint64_t seed,
                                   const ArnoldiOptions& opts = {});

/// Deterministic seeded start vector used by dominant_eigs.
VectorXcd seeded_vector(long dim, std::uint64_t seed);

}  // namespace clb
