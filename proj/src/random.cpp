#include "longcat/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

namespace longcat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;  // switch point between the two series envelopes
constexpr double kLog2Pi = 1.8378770664093454836;

double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic tail expansion.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * kLog2Pi + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// n-th term of the alternating series for the J*(1, 0) density.
double series_term(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x > 0.0) {
    const double e = -1.5 * (std::log(0.5 * kPi) + std::log(x)) + std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(e);
  }
  return 0.0;
}

// Probability of the exponential piece of the proposal.
double exponential_mass(double z) {
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / kTrunc) * (kTrunc * z - 1.0);
  const double a = -std::sqrt(1.0 / kTrunc) * (kTrunc * z + 1.0);
  const double x0 = std::log(fz) + fz * kTrunc;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

// Inverse Gaussian(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Rng& rng) {
  double x = kTrunc + 1.0;
  if (1.0 / kTrunc > z) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = 1.0 + e1 * kTrunc;
      x = kTrunc / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
    return x;
  }
  const double mu = 1.0 / z;
  while (x > kTrunc) {
    double y = rng.normal();
    y *= y;
    const double half_mu = 0.5 * mu;
    const double mu_y = mu * y;
    x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
  }
  return x;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Eigen::MatrixXd bartlett_factor(double df, Eigen::Index p, Rng& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_square(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  return a;
}

}  // namespace

double sample_pg1(double c, Rng& rng) {
  require(std::isfinite(c), "PG tilt must be finite");
  const double z = 0.5 * std::fabs(c);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double p_exp = exponential_mass(z);
  for (;;) {
    double x = rng.uniform() < p_exp ? kTrunc + rng.exponential() / fz : truncated_inverse_gaussian(z, rng);
    double s = series_term(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_term(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_term(n, x);
        if (y > s) break;
      }
    }
  }
}

double pg1_mean(double c) {
  if (std::fabs(c) < 1e-6) return 0.25 - c * c / 48.0;
  return std::tanh(0.5 * c) / (2.0 * c);
}

double sample_gamma(double shape, double rate, Rng& rng) {
  require(shape > 0 && std::isfinite(shape), "gamma shape must be positive");
  require(rate > 0 && std::isfinite(rate), "gamma rate must be positive");
  return rng.gamma(shape) / rate;
}

double sample_invgamma(double shape, double scale, Rng& rng) {
  require(shape > 0 && std::isfinite(shape), "inverse-gamma shape must be positive");
  require(scale > 0 && std::isfinite(scale), "inverse-gamma scale must be positive");
  return scale / rng.gamma(shape);
}

double sample_uniform(double lo, double hi, Rng& rng) {
  require(lo < hi, "uniform bounds must satisfy lo < hi");
  return rng.uniform(lo, hi);
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  return sample_mvn(mean, cholesky(cov, 0.0, "sample_mvn"), rng);
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Cholesky& factor, Rng& rng) {
  Eigen::VectorXd e(mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  return mean + factor.matrixL() * e;
}

Eigen::VectorXd sample_mvn_precision(const Eigen::VectorXd& mean, const Cholesky& precision, Rng& rng) {
  Eigen::VectorXd e(mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  return mean + solve_upper_transposed(precision, e);
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const auto llt = cholesky(cov, 0.0, "mvn_logpdf");
  const Eigen::VectorXd r = llt.matrixL().solve(x - mean);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det(llt) + r.squaredNorm());
}

Eigen::MatrixXd sample_invwishart(double df, const Eigen::MatrixXd& psi, Rng& rng) {
  return sample_invwishart(df, cholesky(psi, 0.0, "sample_invwishart"), rng);
}

Eigen::MatrixXd sample_invwishart(double df, const Cholesky& psi_factor, Rng& rng) {
  const Eigen::Index p = psi_factor.matrixLLT().rows();
  require(df > static_cast<double>(p) - 1.0, "inverse-Wishart df must exceed p - 1");
  // W = L^{-T} A A^T L^{-1} ~ Wishart(df, psi^{-1}); return W^{-1} = N^T N, N = A^{-1} L^T.
  const Eigen::MatrixXd a = bartlett_factor(df, p, rng);
  const Eigen::MatrixXd lt = psi_factor.matrixU();
  const Eigen::MatrixXd n = a.triangularView<Eigen::Lower>().solve(lt);
  return symmetrize(n.transpose() * n);
}

Eigen::MatrixXd sample_invwishart_dawid(double nu, const Eigen::MatrixXd& psi, Rng& rng) {
  require(nu > 2.0, "shape-parameterized inverse-Wishart needs nu > 2");
  return sample_invwishart(nu + static_cast<double>(psi.rows()) - 1.0, psi, rng);
}

double log_multigamma(int p, double a) {
  double out = 0.25 * p * (p - 1) * std::log(kPi);
  for (int j = 0; j < p; ++j) out += boost::math::lgamma(a - 0.5 * j);
  return out;
}

double invwishart_logpdf(const Eigen::MatrixXd& sigma, double df, const Eigen::MatrixXd& psi) {
  const int p = static_cast<int>(sigma.rows());
  const auto ls = cholesky(sigma, 0.0, "invwishart_logpdf");
  const auto lp = cholesky(psi, 0.0, "invwishart_logpdf");
  const double trace = ls.solve(psi).trace();
  return 0.5 * df * log_det(lp) - 0.5 * df * p * std::log(2.0) - log_multigamma(p, 0.5 * df) -
         0.5 * (df + p + 1.0) * log_det(ls) - 0.5 * trace;
}

double mvt_logpdf(const Eigen::VectorXd& x, const MvtParams& p) {
  require(p.nu > 2.0, "multivariate t needs nu > 2");
  const double d = static_cast<double>(x.size());
  const auto llt = cholesky(p.cov, 0.0, "mvt_logpdf");
  const Eigen::VectorXd r = llt.matrixL().solve(x - p.mean);
  const double q = r.squaredNorm();
  return std::lgamma(0.5 * (p.nu + d)) - std::lgamma(0.5 * p.nu) - 0.5 * d * std::log((p.nu - 2.0) * kPi) -
         0.5 * log_det(llt) - 0.5 * (p.nu + d) * std::log1p(q / (p.nu - 2.0));
}

Eigen::VectorXd sample_mvt(const MvtParams& p, Rng& rng) {
  require(p.nu > 2.0, "multivariate t needs nu > 2");
  const auto llt = cholesky(p.cov, 0.0, "sample_mvt");
  Eigen::VectorXd e(p.mean.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  const double w = rng.chi_square(p.nu);
  const Eigen::VectorXd g = llt.matrixL() * e;
  return p.mean + std::sqrt((p.nu - 2.0) / w) * g;
}

MvtConditional mvt_conditional(const MvtParams& p, const std::vector<int>& block_a,
                               const std::vector<int>& block_b, const Eigen::VectorXd& observed_b) {
  require(p.nu > 2.0, "multivariate t needs nu > 2");
  require(static_cast<std::size_t>(observed_b.size()) == block_b.size(), "conditioning values differ in length");
  MvtConditional out;
  const Eigen::MatrixXd aa = submatrix(p.cov, block_a, block_a);
  if (block_b.empty()) {
    out.params = {p.nu, subvector(p.mean, block_a), aa};
    return out;
  }
  const Eigen::MatrixXd ab = submatrix(p.cov, block_a, block_b);
  const auto llt = cholesky(submatrix(p.cov, block_b, block_b), 0.0, "mvt_conditional");
  const Eigen::VectorXd diff = observed_b - subvector(p.mean, block_b);
  const Eigen::VectorXd alpha = llt.solve(diff);
  const double s = diff.dot(alpha);
  const double nb = static_cast<double>(block_b.size());
  out.mahalanobis = s;
  out.scale = (p.nu + s - 2.0) / (p.nu + nb - 2.0);
  out.params.nu = p.nu + nb;
  out.params.mean = subvector(p.mean, block_a) + ab * alpha;
  out.params.cov = symmetrize(out.scale * (aa - ab * llt.solve(ab.transpose())));
  return out;
}

}  // namespace longcat
