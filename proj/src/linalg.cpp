#include "longcat/linalg.hpp"

#include <cmath>

#include "longcat/error.hpp"

namespace longcat {

Cholesky cholesky(const Eigen::MatrixXd& m, double jitter_scale, const char* where) {
  if (m.rows() != m.cols()) throw NumericalError(where, "matrix is not square");
  Cholesky llt(m);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return llt;
  double scale = jitter_scale;
  if (!(scale > 0)) scale = m.rows() > 0 ? m.diagonal().mean() : 1.0;
  if (!(scale > 0) || !std::isfinite(scale)) scale = 1.0;
  Eigen::MatrixXd jittered = m;
  jittered.diagonal().array() += 1e-8 * scale;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    throw NumericalError(where, "matrix not positive definite after jitter");
  return llt;
}

double log_det(const Cholesky& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd inverse(const Cholesky& llt) {
  const auto n = llt.matrixLLT().rows();
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return symmetrize(inv);
}

Eigen::VectorXd solve_upper_transposed(const Cholesky& llt, const Eigen::VectorXd& e) {
  return llt.matrixU().solve(e);
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace longcat
