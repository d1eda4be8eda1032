#pragma once

#include <span>
#include <vector>

namespace longcat {

/// Sample quantile with linear interpolation between order statistics.
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> values);

/// Mean and equal-tailed central interval.
struct IntervalSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

IntervalSummary summarize(std::span<const double> values, double level = 0.95);

}  // namespace longcat
