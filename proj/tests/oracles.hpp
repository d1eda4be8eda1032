#pragma once

// Test-side reference computations, independent of the library code paths.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "longcat/types.hpp"

namespace oracle {

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Gauss-Hermite nodes/weights (physicists' weight e^{-x^2}) via Golub-Welsch.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  std::vector<double> x(n), w(n);
  for (int k = 0; k < n; ++k) {
    x[k] = es.eigenvalues()(k);
    w[k] = std::sqrt(std::numbers::pi) * es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  }
  return {x, w};
}

/// E[f(X)] for X ~ N(mean, var) by n-point Gauss-Hermite quadrature.
template <class F>
double normal_expectation(F f, double mean, double var, int n = 50) {
  if (var <= 0) return f(mean);
  const auto [x, w] = gauss_hermite(n);
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += w[k] * f(mean + std::sqrt(2.0 * var) * x[k]);
  return acc / std::sqrt(std::numbers::pi);
}

/// Hand-built posterior draws for one or more subjects on a pooled grid.
struct DrawSpec {
  double noise_var = 0.0;
  double mu0 = 0.0;
  double sigma2 = 1.0;
  double rho = 1.0;
  double nu = 10.0;
  std::vector<Eigen::VectorXd> signals;  // one per subject
};

inline longcat::PosteriorDraws make_draws(const std::vector<double>& pooled, const std::vector<std::string>& ids,
                                          const std::vector<DrawSpec>& specs) {
  longcat::PosteriorDraws d;
  d.layout.subject_ids = ids;
  d.layout.pooled_times = pooled;
  std::vector<int> all;
  for (std::size_t k = 0; k < pooled.size(); ++k) all.push_back(static_cast<int>(k));
  d.layout.observed.assign(ids.size(), all);
  const auto p = static_cast<Eigen::Index>(pooled.size());
  d.mean.resize(static_cast<Eigen::Index>(specs.size()), p);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto& sp = specs[s];
    d.noise_var.push_back(sp.noise_var);
    d.mu0.push_back(sp.mu0);
    d.sigma2.push_back(sp.sigma2);
    d.rho.push_back(sp.rho);
    d.nu.push_back(sp.nu);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(ids.size()), p);
    for (std::size_t i = 0; i < ids.size(); ++i) z.row(static_cast<Eigen::Index>(i)) = sp.signals.at(i).transpose();
    d.signal.push_back(z);
    d.mean.row(static_cast<Eigen::Index>(s)).setConstant(sp.mu0);
  }
  return d;
}

}  // namespace oracle
