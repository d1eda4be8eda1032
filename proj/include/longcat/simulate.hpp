#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longcat/types.hpp"

namespace longcat {

enum class Link { Expit, Probit };

enum class KernelKind {
  SquaredExponential,  ///< variance * exp(-d^2 / (2 length^2))
  Exponential,         ///< variance * exp(-d / length)
  CompoundSymmetry,    ///< variance * (d == 0 ? 1 : correlation)
  Mixture,             ///< variance * (weight * exp(-d/length) + (1-weight) * CS(correlation))
};

struct KernelSpec {
  KernelKind kind = KernelKind::SquaredExponential;
  double variance = 1.0;
  double length = 1.0;
  double correlation = 0.0;
  double weight = 1.0;

  double operator()(double d) const;
  void validate() const;
};

/// f(t) = offset + sin_amp * sin(sin_freq * t) + cos_amp * cos(cos_freq * t).
struct SignalSpec {
  double offset = 0.0;
  double sin_amp = 0.0;
  double sin_freq = 1.0;
  double cos_amp = 0.0;
  double cos_freq = 1.0;

  double operator()(double t) const;
};

/// One data-generating model: link, signal and within-subject process.
struct ScenarioComponent {
  Link link = Link::Expit;
  SignalSpec signal;
  KernelSpec kernel;
  bool student_t = false;  ///< MVT(df, 0, K) instead of N(0, K)
  double df = 5.0;
};

enum class GridKind {
  Regular,        ///< 0, 1, ..., points - 1
  UniformRandom,  ///< `points` sorted uniform draws on (lo, hi)
};

struct GridSpec {
  GridKind kind = GridKind::Regular;
  int points = 31;
  double lo = 0.0;
  double hi = 30.0;
};

/// Each subject follows one component chosen with equal probability.
struct SimScenario {
  std::vector<ScenarioComponent> components;
  double noise_var = 0.25;
  int subjects = 30;
  GridSpec grid;
  double sparsity = 0.0;
  std::uint64_t seed = 0;

  /// Throws ValidationError.
  void validate() const;
};

/// Built-in scenarios of the benchmark studies.
/// Trend study: case 1 (expit, Gaussian), 2 (probit, Student-t), 3 (mixture).
SimScenario trend_scenario(int case_id, double sparsity, std::uint64_t seed);
/// Kernel study (n = 100, t = 0..10): cases 1..4.
SimScenario kernel_scenario(int case_id, std::uint64_t seed);
/// Irregular grid: 30 uniform points on (0, 30), n = 50, 30% dropout.
SimScenario irregular_scenario(std::uint64_t seed);

/// Kernel-study covariance K_case(d); throws std::invalid_argument on an
/// unknown case or d < 0.
double builtin_kernel(int case_id, double d);

double link_function(Link link, double x);
/// E[link(x + e)], e ~ N(0, noise_var).
double smoothed_link(Link link, double x, double noise_var);

struct SimResult {
  BinaryDataset data;
  std::vector<double> grid;
  /// Component index of each subject.
  std::vector<int> component;
  /// Population signal f of each subject's component on the grid (n x T).
  Eigen::MatrixXd signal;
  /// Subject signal f + omega (n x T).
  Eigen::MatrixXd latent;
  /// Realized probability link(f + omega + eps) (n x T).
  Eigen::MatrixXd probability;
  /// Noise-averaged probability E[link(f + omega + eps) | omega] (n x T).
  Eigen::MatrixXd curve;
  /// kept(i, t) is 1 when observation t of subject i survived dropout.
  Eigen::MatrixXi kept;
  /// Kernel of the first component on the grid.
  Eigen::MatrixXd kernel;
};

SimResult generate(const SimScenario& scenario);

}  // namespace longcat
