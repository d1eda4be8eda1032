#pragma once

#include <vector>

#include <Eigen/Dense>

#include "longcat/linalg.hpp"
#include "longcat/rng.hpp"

namespace longcat {

/// Polya-Gamma PG(1, c) by the exact alternating-series rejection sampler.
double sample_pg1(double c, Rng& rng);

/// E[PG(1, c)] = tanh(c/2) / (2c), with limit 1/4 at c = 0.
double pg1_mean(double c);

/// Gamma with shape/rate. Throws std::invalid_argument on bad parameters.
double sample_gamma(double shape, double rate, Rng& rng);
/// Inverse gamma with shape/scale (mean scale / (shape - 1)).
double sample_invgamma(double shape, double scale, Rng& rng);
double sample_uniform(double lo, double hi, Rng& rng);

/// Multivariate normal through the jittered Cholesky of cov.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);
/// mean + L e where factor = chol(cov).
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Cholesky& factor, Rng& rng);
/// Draw with precision Q = LL^T: mean + L^{-T} e.
Eigen::VectorXd sample_mvn_precision(const Eigen::VectorXd& mean, const Cholesky& precision, Rng& rng);

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// Standard inverse-Wishart with `df` degrees of freedom and scale psi
/// (mean psi / (df - p - 1)), via Bartlett decomposition.
Eigen::MatrixXd sample_invwishart(double df, const Eigen::MatrixXd& psi, Rng& rng);
Eigen::MatrixXd sample_invwishart(double df, const Cholesky& psi_factor, Rng& rng);

/// Shape-parameterized inverse-Wishart: df = nu + p - 1, mean psi / (nu - 2).
/// Throws std::invalid_argument for nu <= 2.
Eigen::MatrixXd sample_invwishart_dawid(double nu, const Eigen::MatrixXd& psi, Rng& rng);

/// log Gamma_p(a).
double log_multigamma(int p, double a);

/// Standard-df inverse-Wishart log density of sigma.
double invwishart_logpdf(const Eigen::MatrixXd& sigma, double df, const Eigen::MatrixXd& psi);

/// Multivariate t parameterized by its covariance: E = mean, Cov = cov.
struct MvtParams {
  double nu = 5.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

double mvt_logpdf(const Eigen::VectorXd& x, const MvtParams& p);
Eigen::VectorXd sample_mvt(const MvtParams& p, Rng& rng);

/// Conditional of block A given block B = observed_b. The result has df
/// nu + |B| and covariance scaled by (nu + S - 2) / (nu + |B| - 2).
struct MvtConditional {
  MvtParams params;
  double mahalanobis = 0.0;  ///< S = (z_B - mu_B)^T Psi_BB^{-1} (z_B - mu_B)
  double scale = 1.0;
};

MvtConditional mvt_conditional(const MvtParams& p, const std::vector<int>& block_a,
                               const std::vector<int>& block_b, const Eigen::VectorXd& observed_b);

}  // namespace longcat
