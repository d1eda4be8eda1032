#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "longcat/summary.hpp"
#include "longcat/types.hpp"

namespace longcat {

/// Matern smoothness is fixed at 5/2.
inline constexpr double kMaternSmoothness = 2.5;

/// Scale sigma2 (signal variance) and range rho (time units).
struct MaternParams {
  double sigma2 = 1.0;
  double rho = 1.0;

  void validate() const;
};

/// Correlation (1 + sqrt5 x + 5x^2/3) exp(-sqrt5 x) at x = d / rho.
double matern52_correlation(double scaled_distance);

/// Throws std::invalid_argument for d < 0.
double matern52(double d, const MaternParams& p);

Eigen::MatrixXd covariance_matrix(std::span<const double> a, std::span<const double> b, const MaternParams& p);
Eigen::MatrixXd covariance_matrix(const TimeGrid& a, const TimeGrid& b, const MaternParams& p);
/// Symmetric self-covariance of one set of points.
Eigen::MatrixXd covariance_matrix(std::span<const double> a, const MaternParams& p);

/// Scaled distance x where the Matern-5/2 correlation equals `target`.
double correlation_range(double target = 0.05);

struct RangeSummary {
  IntervalSummary summary;
  std::vector<double> per_draw;
};

/// Practical range (correlation 0.05) per posterior range draw.
RangeSummary practical_range(std::span<const double> rho_draws, double level = 0.95);

}  // namespace longcat
