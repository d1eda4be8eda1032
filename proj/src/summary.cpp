#include "longcat/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace longcat {

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

IntervalSummary summarize(std::span<const double> values, double level) {
  const double tail = 0.5 * (1.0 - level);
  return {mean(values), quantile(values, tail), quantile(values, 1.0 - tail)};
}

}  // namespace longcat
