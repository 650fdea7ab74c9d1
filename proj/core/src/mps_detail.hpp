#pragma once

// Private helpers shared by the uniform-MPS, solver and finite-chain translation
// units. Site tensors (l, s, r) are handled as d matrices of shape chi_l x chi_r.

#include <vector>

#include "clb/tensor.hpp"
#include "clb/umps.hpp"

namespace clb::detail {

std::vector<MatrixXcd> site_mats(const Tensor& a);
Tensor mats_to_tensor(const std::vector<MatrixXcd>& m);
MatrixXcd vec_to_mat(const VectorXcd& v, long rows, long cols);
VectorXcd mat_to_vec(const MatrixXcd& m);

MatrixXcd apply_right(const std::vector<MatrixXcd>& as, const MatrixXcd& x);
MatrixXcd apply_left(const std::vector<MatrixXcd>& as, const MatrixXcd& x);

struct CanonicalParts {
  std::vector<MatrixXcd> al, ar;
  Eigen::VectorXd schmidt;  // descending, normalized
  MatrixXcd ul, vr;         // gauge rotations used for the diagonal center
  double lambda = 0.0;      // dominant transfer eigenvalue of the input tensor
};

CanonicalParts canonicalize_mats(const std::vector<MatrixXcd>& as);

void polish_left(std::vector<MatrixXcd>& al);
void polish_right(std::vector<MatrixXcd>& ar);

UniformMPS truncate_parts(const CanonicalParts& parts, long chi, TruncationReport& report);

}  // namespace clb::detail
