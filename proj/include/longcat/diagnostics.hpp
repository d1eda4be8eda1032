#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longcat/types.hpp"

namespace longcat {

/// sqrt(mean over subjects and times of (estimate - truth)^2).
double rmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);
/// One RMSE per posterior draw of the pooled-grid signals.
std::vector<double> rmse_signal(const PosteriorDraws& draws, const Eigen::MatrixXd& truth);
/// Posterior mean of the subject signals (n x |pooled|).
Eigen::MatrixXd posterior_mean_signal(const PosteriorDraws& draws);

/// Observed responses flattened in draws-layout order (subject by subject).
/// Throws ValidationError if the data do not match the layout.
Eigen::VectorXd observed_responses(const BinaryDataset& data, const DrawsLayout& layout);

/// replicates x observations matrix of posterior predictive responses;
/// replicate r uses draw r mod S.
Eigen::MatrixXd replicate_responses(const PosteriorDraws& draws, int replicates, std::uint64_t seed);

struct PredictiveLoss {
  double G = 0.0;
  double P = 0.0;
  double total = 0.0;
};

/// G = sum (y - mean_rep)^2, P = sum Var(rep) with 1/R normalization.
PredictiveLoss posterior_predictive_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates);

/// Mean binary CRPS, |p - y| - p(1 - p) with p the replicate frequency.
double crps_binary(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates);

struct ScoreReport {
  PredictiveLoss loss;
  double crps = 0.0;
};

ScoreReport score(const PosteriorDraws& draws, const BinaryDataset& data, int replicates, std::uint64_t seed);

/// Pearson correlation of paired values; nullopt if either side is constant
/// or fewer than two pairs exist.
std::optional<double> pearson(std::span<const int> a, std::span<const int> b);
/// Tetrachoric correlation of paired binary values (maximum likelihood
/// under a latent bivariate normal); nullopt when undefined.
std::optional<double> tetrachoric(std::span<const int> a, std::span<const int> b);
/// From 2x2 counts n00, n01, n10, n11 (first index = a).
std::optional<double> tetrachoric(double n00, double n01, double n10, double n11);

/// Bivariate standard normal CDF with correlation r.
double bivariate_normal_cdf(double h, double k, double r);

struct CorrelationMatrices {
  Eigen::MatrixXd pearson;      ///< NaN for undefined cells
  Eigen::MatrixXd tetrachoric;  ///< NaN for undefined cells
};

/// columns[j][r] in {0, 1} or negative for missing; pairs use rows where
/// both columns are present.
CorrelationMatrices correlation_matrices(const std::vector<std::vector<int>>& columns);

/// Gaussian 2-Wasserstein distance. Throws NumericalError for non-SPD input.
double wasserstein2_gaussian(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                             const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b);

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;
};

/// Initial-positive-sequence effective sample size.
EssResult effective_sample_size(std::span<const double> chain);

struct TraceSummary {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  EssResult ess;
};

/// Summaries of the scalar traces noise_var, mu0, sigma2, rho, nu.
std::map<std::string, TraceSummary> chain_diagnostics(const PosteriorDraws& draws);

/// Standard error of the mean by non-overlapping batch means.
double batch_means_se(std::span<const double> chain, int batches = 50);

struct NoisePrior {
  double a_eps = 0.0;
  double b_eps = 0.0;
};

/// Inverse-gamma hyperparameters from a measurement-error range R, degrees
/// of freedom upsilon and coverage q: a = upsilon/2,
/// b = R^2 upsilon / (2 t_{1-(1-q)/2, upsilon}^2).
NoisePrior elicit_noise_prior(double range, double upsilon, double q = 0.99);
/// Coverage q at which elicit_noise_prior(range, upsilon, q) yields b_eps.
double implied_coverage(double range, double upsilon, double b_eps);

struct EnergyTest {
  double statistic = 0.0;  ///< mean of the per-block energy statistics
  double t = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

/// Blocked two-sample energy-distance test: the unbiased per-block energy
/// statistic has mean zero under equal distributions and is positive
/// otherwise; a one-sided t-test on the block values at level alpha.
EnergyTest energy_two_sample_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int blocks,
                                  double alpha = 0.01);

}  // namespace longcat
