#include "longcat/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

#include "longcat/error.hpp"

namespace longcat {

namespace {
const double kSqrt5 = std::sqrt(5.0);
}

void MaternParams::validate() const {
  if (!(sigma2 > 0) || !(rho > 0)) throw ValidationError("Matern parameters must be positive");
}

double matern52_correlation(double x) {
  const double s = kSqrt5 * x;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double matern52(double d, const MaternParams& p) {
  if (d < 0) throw std::invalid_argument("matern52: negative distance");
  return p.sigma2 * matern52_correlation(d / p.rho);
}

Eigen::MatrixXd covariance_matrix(std::span<const double> a, std::span<const double> b, const MaternParams& p) {
  Eigen::MatrixXd k(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      k(i, j) = p.sigma2 * matern52_correlation(std::abs(a[i] - b[j]) / p.rho);
  return k;
}

Eigen::MatrixXd covariance_matrix(const TimeGrid& a, const TimeGrid& b, const MaternParams& p) {
  return covariance_matrix(a.times(), b.times(), p);
}

Eigen::MatrixXd covariance_matrix(std::span<const double> a, const MaternParams& p) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = p.sigma2;
    for (Eigen::Index j = 0; j < i; ++j)
      k(i, j) = k(j, i) = p.sigma2 * matern52_correlation(std::abs(a[i] - a[j]) / p.rho);
  }
  return k;
}

namespace {

// Root of corr(d / rho) = target in d, bracketed by doubling.
double solve_range(double rho, double target) {
  auto f = [rho, target](double d) { return matern52_correlation(d / rho) - target; };
  double hi = rho;
  while (f(hi) > 0) hi *= 2.0;
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, 0.0, hi, f(0.0), f(hi),
                                             boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

double correlation_range(double target) {
  if (!(target > 0 && target < 1)) throw std::invalid_argument("correlation target must be in (0,1)");
  return solve_range(1.0, target);
}

RangeSummary practical_range(std::span<const double> rho_draws, double level) {
  if (rho_draws.empty()) throw std::invalid_argument("practical_range: no draws");
  RangeSummary out;
  out.per_draw.reserve(rho_draws.size());
  for (double rho : rho_draws) {
    if (!(rho > 0)) throw std::invalid_argument("practical_range: range draw must be positive");
    out.per_draw.push_back(solve_range(rho, 0.05));
  }
  out.summary = summarize(out.per_draw, level);
  return out;
}

}  // namespace longcat
