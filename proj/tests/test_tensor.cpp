#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "clb/tensor.hpp"

using namespace clb;

namespace {

std::mt19937_64 rng(42);

Tensor random_tensor(std::vector<long> shape) {
  std::normal_distribution<double> dist;
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = Complex(dist(rng), dist(rng));
  return t;
}

Tensor tensor_from(const MatrixXcd& m) { return Tensor::from_matrix(m, {m.rows()}, {m.cols()}); }

}  // namespace

TEST_CASE("contract: identity leaves a vector unchanged") {
  Tensor id({2, 2});
  id.at({0, 0}) = id.at({1, 1}) = 1.0;
  Tensor v({2});
  v.at({0}) = Complex(0.3, 1.0);
  v.at({1}) = Complex(-2.0, 0.25);
  Tensor out = contract(id, v, {{1, 0}});
  REQUIRE(out.shape() == std::vector<long>{2});
  CHECK(std::abs(out.at({0}) - v.at({0})) < 1e-15);
  CHECK(std::abs(out.at({1}) - v.at({1})) < 1e-15);
}

TEST_CASE("contract: M times its inverse gives the identity") {
  MatrixXcd m = MatrixXcd::Random(3, 3);
  while (std::abs(m.determinant()) < 0.1) m = MatrixXcd::Random(3, 3);
  Tensor a = tensor_from(m);
  Tensor b = tensor_from(m.inverse());
  Tensor out = contract(a, b, {{1, 0}});
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 3; ++j) CHECK(std::abs(out.at({i, j}) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("contract: CZ squared is the identity") {
  Tensor cz({2, 2, 2, 2});  // (in1, in2, out1, out2)
  for (long a = 0; a < 2; ++a)
    for (long b = 0; b < 2; ++b) cz.at({a, b, a, b}) = (a == 1 && b == 1) ? -1.0 : 1.0;
  Tensor prod = contract(cz, cz, {{2, 0}, {3, 1}});  // contract over the outputs
  Tensor m = prod.reshaped({4, 4});
  for (long i = 0; i < 4; ++i)
    for (long j = 0; j < 4; ++j) CHECK(std::abs(m.at({i, j}) - (i == j ? 1.0 : 0.0)) < 1e-15);
}

TEST_CASE("contract: rejects mismatched dimensions and repeated axes") {
  Tensor a({2, 3});
  Tensor b({2, 2});
  CHECK_THROWS_AS((void)contract(a, b, {{1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS((void)contract(a, b, {{0, 0}, {0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS((void)contract(a, b, {{5, 0}}), std::invalid_argument);
}

TEST_CASE("contract: associativity on a random triple") {
  Tensor a = random_tensor({3, 4});
  Tensor b = random_tensor({4, 5});
  Tensor c = random_tensor({5, 2});
  Tensor ab_c = contract(contract(a, b, {{1, 0}}), c, {{1, 0}});
  Tensor a_bc = contract(a, contract(b, c, {{1, 0}}), {{1, 0}});
  double diff = 0, norm = 0;
  for (long i = 0; i < ab_c.size(); ++i) {
    diff += std::norm(ab_c.data()[i] - a_bc.data()[i]);
    norm += std::norm(ab_c.data()[i]);
  }
  CHECK(std::sqrt(diff / norm) < 1e-12);
}

TEST_CASE("svd_truncate: diagonal input") {
  Tensor m({3, 3});
  m.at({0, 0}) = 1.0;
  m.at({1, 1}) = 0.5;
  m.at({2, 2}) = 0.1;
  auto res = svd_truncate(m, 2);
  REQUIRE(res.s.size() == 2);
  CHECK(res.s[0] == doctest::Approx(1.0));
  CHECK(res.s[1] == doctest::Approx(0.5));
  CHECK(res.report.discarded_weight == doctest::Approx(0.01).epsilon(1e-10));
}

TEST_CASE("svd_truncate: lossless case and reconstruction") {
  Tensor m = random_tensor({6, 4});
  auto res = svd_truncate(m, 10);
  CHECK(res.report.discarded_weight <= 1e-12);

  // reconstruction ||U S Vt - m||_F^2 <= 1e-10 ||m||^2
  MatrixXcd u = res.u.matrix(1);
  MatrixXcd vt = res.vt.matrix(1);
  Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(res.s.data(), static_cast<long>(res.s.size()));
  MatrixXcd rec = u * s.asDiagonal() * vt;
  MatrixXcd orig = m.matrix(1);
  CHECK((rec - orig).squaredNorm() <= 1e-10 * orig.squaredNorm());

  // orthonormal columns / rows
  CHECK((u.adjoint() * u - MatrixXcd::Identity(4, 4)).norm() < 1e-12);
  CHECK((vt * vt.adjoint() - MatrixXcd::Identity(4, 4)).norm() < 1e-12);
}

TEST_CASE("svd_truncate: rank-1 outer product") {
  VectorXcd u = VectorXcd::Random(5), v = VectorXcd::Random(3);
  MatrixXcd m = u * v.transpose();
  auto res = svd_truncate(tensor_from(m), 1);
  REQUIRE(res.s.size() == 1);
  CHECK(res.s[0] == doctest::Approx(u.norm() * v.norm()).epsilon(1e-12));
}

TEST_CASE("svd_truncate: discarded weight matches the full decomposition") {
  Tensor m = random_tensor({8, 8});
  auto full = svd_truncate(m, 8);
  auto cut = svd_truncate(m, 3);
  double expect = 0;
  for (std::size_t i = 3; i < full.s.size(); ++i) expect += full.s[i] * full.s[i];
  CHECK(std::abs(cut.report.discarded_weight - expect) < 1e-12);
}

TEST_CASE("svd_truncate: rejects non-matrix input and bad chi") {
  CHECK_THROWS_AS((void)svd_truncate(random_tensor({2, 2, 2}), 2), std::invalid_argument);
  CHECK_THROWS_AS((void)svd_truncate(random_tensor({2, 2}), 0), std::invalid_argument);
  Tensor bad({2, 2});
  bad.at({0, 0}) = Complex(std::nan(""), 0);
  CHECK_THROWS_AS((void)svd_truncate(bad, 2), std::runtime_error);
}

namespace {

LinearMap matrix_map(const MatrixXcd& m) {
  return [m](const VectorXcd& v) { return VectorXcd(m * v); };
}

}  // namespace

TEST_CASE("dominant_eigs: diagonal map") {
  MatrixXcd m = MatrixXcd::Zero(3, 3);
  m(0, 0) = 3;
  m(1, 1) = 1;
  m(2, 2) = -1;
  auto pairs = dominant_eigs(matrix_map(m), 3, 1, 7);
  REQUIRE(pairs.size() == 1);
  CHECK(std::abs(pairs[0].value - Complex(3, 0)) < 1e-10);
  CHECK(std::abs(std::abs(pairs[0].vector(0)) - 1.0) < 1e-10);
}

TEST_CASE("dominant_eigs: rotation by pi/2 has eigenvalues +-i") {
  MatrixXcd m(2, 2);
  m << 0, -1, 1, 0;
  auto pairs = dominant_eigs(matrix_map(m), 2, 2, 7);
  REQUIRE(pairs.size() == 2);
  CHECK(std::abs(std::abs(pairs[0].value) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(pairs[1].value) - 1.0) < 1e-12);
  CHECK(std::abs(pairs[0].value + pairs[1].value) < 1e-10);  // conjugate pair
  CHECK(std::abs(std::abs(pairs[0].value.imag()) - 1.0) < 1e-10);
}

TEST_CASE("dominant_eigs: equal-modulus pair is returned whole") {
  MatrixXcd m = MatrixXcd::Zero(3, 3);
  m(0, 0) = 2;
  m(1, 1) = -2;
  m(2, 2) = 1;
  auto pairs = dominant_eigs(matrix_map(m), 3, 2, 7);
  REQUIRE(pairs.size() == 2);
  std::vector<double> vals{pairs[0].value.real(), pairs[1].value.real()};
  std::sort(vals.begin(), vals.end());
  CHECK(vals[0] == doctest::Approx(-2.0));
  CHECK(vals[1] == doctest::Approx(2.0));
}

TEST_CASE("dominant_eigs: residuals on a large random map") {
  const long n = 160;
  MatrixXcd m = MatrixXcd::Random(n, n);
  auto pairs = dominant_eigs(matrix_map(m), n, 3, 11);
  REQUIRE(pairs.size() == 3);
  for (const auto& p : pairs) {
    const VectorXcd r = m * p.vector - p.value * p.vector;
    CHECK(r.norm() <= 1e-8 * std::abs(p.value));
  }
  // deterministic given the seed
  auto again = dominant_eigs(matrix_map(m), n, 3, 11);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(pairs[i].value - again[i].value) < 1e-14);
}

TEST_CASE("dominant_eigs: non-Hermitian map with known spectrum") {
  // upper-triangular, eigenvalues on the diagonal
  const long n = 120;
  MatrixXcd m = MatrixXcd::Zero(n, n);
  for (long i = 0; i < n; ++i) m(i, i) = 0.95 * std::pow(0.97, i);
  for (long i = 0; i + 1 < n; ++i) m(i, i + 1) = 0.1;
  auto pairs = dominant_eigs(matrix_map(m), n, 2, 3);
  CHECK(std::abs(pairs[0].value - m(0, 0)) < 1e-8);
}
