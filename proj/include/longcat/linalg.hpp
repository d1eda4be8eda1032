#pragma once

#include <vector>

#include <Eigen/Dense>

namespace longcat {

using Cholesky = Eigen::LLT<Eigen::MatrixXd>;

/// Cholesky factorization under the jitter policy: on failure add
/// 1e-8 * jitter_scale to the diagonal and retry once, then throw
/// NumericalError tagged with `where`. A non-positive jitter_scale means
/// "use the mean diagonal".
Cholesky cholesky(const Eigen::MatrixXd& m, double jitter_scale, const char* where);

double log_det(const Cholesky& llt);

/// A^{-1} from its factor.
Eigen::MatrixXd inverse(const Cholesky& llt);

/// mean + L^{-T} e for e ~ N(0, I) given the factor of a precision matrix.
Eigen::VectorXd solve_upper_transposed(const Cholesky& llt, const Eigen::VectorXd& e);

/// Symmetric part, (m + m^T) / 2.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Gathers rows/cols `rows` x `cols` of m.
Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols);
Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx);

}  // namespace longcat
