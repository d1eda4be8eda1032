#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "longcat/kernels.hpp"
#include "longcat/rng.hpp"
#include "longcat/types.hpp"

namespace longcat {

/// Cell midpoints a + (l + 1/2)(b - a)/G, l = 0..G-1.
std::vector<double> griddy_points(double lo, double hi, int size);

/// Normalized probabilities from log-weights (log-sum-exp). Throws
/// NumericalError(where, "degenerate griddy weights") when no weight is finite.
std::vector<double> griddy_probabilities(const std::vector<double>& log_weights, const char* where);

/// Index drawn from normalized probabilities.
std::size_t sample_index(const std::vector<double>& probabilities, Rng& rng);

/// Moments of a Gaussian full conditional.
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Gibbs sampler for the binary model on a fixed dataset. Steps may be
/// called individually (tests) or through iterate()/run().
class GibbsSampler {
 public:
  GibbsSampler(const BinaryDataset& data, PriorConfig priors, SamplerConfig config);

  const PriorConfig& priors() const { return priors_; }
  const SamplerConfig& config() const { return config_; }
  std::size_t subjects() const { return y_.size(); }
  std::size_t grid_size() const { return times_.size(); }
  const std::vector<double>& pooled_times() const { return times_; }
  const std::vector<std::vector<int>>& observed() const { return observed_; }
  const std::vector<std::vector<int>>& missing() const { return missing_; }
  const std::vector<Eigen::VectorXd>& responses() const { return y_; }
  const std::vector<double>& rho_grid() const { return rho_grid_; }
  const std::vector<double>& nu_grid() const { return nu_grid_; }
  DrawsLayout layout() const;

  /// Replaces the binary responses (same shapes), e.g. for data regeneration.
  void set_responses(std::vector<Eigen::VectorXd> y);

  /// Scale matrix sigma2 * Matern(rho) on the pooled grid.
  Eigen::MatrixXd scale_matrix(double sigma2, double rho) const;
  Eigen::MatrixXd correlation_matrix(double rho) const;

  ChainState init_state(Rng& rng) const;

  void step1_update_latent_noisy(ChainState& s, Rng& rng) const;
  void step2_update_pg(ChainState& s, Rng& rng) const;
  void step3_update_noise_var(ChainState& s, Rng& rng) const;
  void step4_update_signals(ChainState& s, Rng& rng) const;
  void step5_update_niw(ChainState& s, Rng& rng) const;
  void step6_update_mu0(ChainState& s, Rng& rng) const;
  void step7_update_sigma2(ChainState& s, Rng& rng) const;
  void step8_update_rho_griddy(ChainState& s, Rng& rng) const;
  void step9_update_nu_griddy(ChainState& s, Rng& rng) const;

  /// Unnormalized log full-conditional weights on the griddy grids.
  std::vector<double> rho_log_weights(const ChainState& s) const;
  std::vector<double> nu_log_weights(const ChainState& s) const;

  /// Step-4 conditionals for subject i: unobserved block given the observed
  /// block, then observed block given the unobserved block and latents.
  GaussianMoments missing_conditional(const ChainState& s, std::size_t i) const;
  GaussianMoments observed_conditional(const ChainState& s, std::size_t i) const;

  /// One full sweep of the nine steps. Adds per-step wall time if given.
  void iterate(ChainState& s, Rng& rng, std::array<double, 9>* seconds = nullptr) const;

  /// Log joint density of data, latents and parameters with the PG
  /// variables integrated out (Bernoulli-logit likelihood).
  double log_joint(const ChainState& s) const;

  /// Runs config().total_iterations sweeps from init_state with seed
  /// config().seed. `on_iteration` (optional) sees every state.
  PosteriorDraws run(const std::function<void(int, const ChainState&)>& on_iteration = {}) const;

 private:
  double trace_with_precision(const Eigen::MatrixXd& a, const Eigen::MatrixXd& precision) const;

  PriorConfig priors_;
  SamplerConfig config_;
  std::vector<std::string> ids_;
  std::vector<double> times_;
  std::vector<std::vector<int>> observed_;
  std::vector<std::vector<int>> missing_;
  std::vector<Eigen::VectorXd> y_;
  Eigen::MatrixXd distance_;
  std::vector<double> rho_grid_;
  std::vector<double> nu_grid_;
  std::vector<Eigen::MatrixXd> rho_corr_;  // Matern correlation at each rho grid point
  std::vector<double> rho_logdet_;
};

/// Convenience wrapper: GibbsSampler(data, priors, config).run().
PosteriorDraws run_chain(const BinaryDataset& data, const PriorConfig& priors, const SamplerConfig& config);

}  // namespace longcat
