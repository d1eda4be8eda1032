#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longcat/rng.hpp"
#include "longcat/summary.hpp"
#include "longcat/types.hpp"

namespace longcat {

/// Requested prediction times merged with the pooled grid. Requested points
/// within 1e-9 of a pooled point are identified with it.
struct FineGrid {
  std::vector<double> times;
  /// pooled_index[k]: pooled-grid index of fine point k, or -1 if new.
  std::vector<int> pooled_index;
  std::vector<int> pooled_positions;  ///< fine positions that are pooled points
  std::vector<int> new_positions;     ///< fine positions off the pooled grid

  static FineGrid build(std::span<const double> pooled, std::span<const double> requested);
  std::size_t size() const { return times.size(); }
};

/// Parses "start:end:step" (step may be a fraction "num/den"), giving
/// start + k*num/den up to end, or a comma-separated list of times.
std::vector<double> parse_grid_spec(const std::string& spec);

/// Scalar parameters of one posterior draw.
struct DrawParams {
  double noise_var = 0.0;
  double mu0 = 0.0;
  double sigma2 = 1.0;
  double rho = 1.0;
  double nu = 10.0;
};

DrawParams draw_params(const PosteriorDraws& draws, std::size_t s);

/// Completes a pooled-grid signal to the fine grid by sampling the
/// off-grid points from the Student-t process conditional.
Eigen::VectorXd extend_signal_to_fine_grid(const Eigen::VectorXd& pooled_signal,
                                           std::span<const double> pooled_times, const DrawParams& params,
                                           const FineGrid& fine, Rng& rng);

/// Fresh signal on the fine grid from the marginal Student-t process.
Eigen::VectorXd new_subject_signal(const DrawParams& params, const FineGrid& fine, Rng& rng);

/// E[expit(z + e)], e ~ N(0, noise_var), by `mc` Monte Carlo draws.
double expected_expit(double z, double noise_var, int mc, Rng& rng);

struct PredictOptions {
  int mc_inner = 200;
  double level = 0.95;
  bool keep_draws = false;
};

/// Per-draw signal on the fine grid (rows = posterior draws) for a subject
/// id or "new". Draw s uses substream s of `seed`.
Eigen::MatrixXd signal_draws(const PosteriorDraws& draws, const std::string& subject, const FineGrid& fine,
                             std::uint64_t seed);

/// Per-draw probability curves from signal draws and noise variances.
Eigen::MatrixXd probability_draws(const Eigen::MatrixXd& signals, std::span<const double> noise_var, int mc_inner,
                                  std::uint64_t seed);

struct CurveEstimate {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
  std::optional<Eigen::MatrixXd> per_draw;
};

/// Pointwise mean and equal-tailed band of per-draw curves (columns = times).
CurveEstimate summarize_curves(const Eigen::MatrixXd& per_draw, std::span<const double> times, double level,
                               bool keep_draws);

CurveEstimate probability_response_curve(const PosteriorDraws& draws, const std::string& subject,
                                         const FineGrid& fine, const PredictOptions& options, std::uint64_t seed);

struct BinaryCovariance {
  std::vector<double> variance;    ///< per draw, Var(Y_t | Z)
  std::vector<double> covariance;  ///< per draw, Cov(Y_t, Y_t' | Z) by inner Monte Carlo
  IntervalSummary variance_summary;
  IntervalSummary covariance_summary;
  /// Cov(Y_t, Y_t' | data): mean conditional covariance plus the covariance
  /// of the conditional probabilities across draws.
  double marginal_covariance = 0.0;
};

/// Fine-grid positions a, b. Throws std::out_of_range when invalid.
BinaryCovariance binary_covariance(const PosteriorDraws& draws, const std::string& subject, const FineGrid& fine,
                                   std::size_t a, std::size_t b, int mc_inner, std::uint64_t seed);

/// Second-order expansion of the logistic moments.
double delta_probability(double mean, double var, double noise_var);
double delta_covariance(double mean_a, double var_a, double mean_b, double var_b, double cov, double noise_var);

struct KernelCurve {
  std::vector<double> distances;
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Posterior summary of sigma2 * Matern(d / rho) over the given distances.
KernelCurve posterior_covariance_kernel(const PosteriorDraws& draws, std::span<const double> distances,
                                        double level = 0.95);

}  // namespace longcat
