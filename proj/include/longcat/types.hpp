#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace longcat {

/// Strictly increasing, nonempty list of observation times.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> times);

  std::span<const double> times() const { return times_; }
  const std::vector<double>& values() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double operator[](std::size_t i) const { return times_[i]; }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> times_;
};

/// Union of the subject grids, with each subject's observed/unobserved
/// positions on it.
struct PooledGrid {
  std::vector<double> times;
  /// observed[i][t]: pooled index of subject i's t-th observation.
  std::vector<std::vector<int>> observed;
  /// missing[i]: pooled indices where subject i has no observation.
  std::vector<std::vector<int>> missing;
  /// mask[i][k] is true iff pooled point k is observed for subject i.
  std::vector<std::vector<bool>> mask;

  std::size_t size() const { return times.size(); }
  bool common() const;
};

/// Throws ValidationError("no subjects") on an empty list.
PooledGrid pool_grids(std::span<const TimeGrid> grids);

/// One subject's series: raw ingestion form (no invariants enforced).
struct SubjectRecord {
  std::string id;
  std::vector<double> times;
  std::vector<int> responses;
};

struct ValidationIssue {
  std::string subject;
  std::optional<std::size_t> index;
  std::string message;
};

using ValidationReport = std::vector<ValidationIssue>;

/// Every violated invariant; empty iff the records form a valid binary set.
ValidationReport validate_binary(std::span<const SubjectRecord> records);
/// Same for ordinal data with categories 1..C.
ValidationReport validate_ordinal(std::span<const SubjectRecord> records, int categories);

std::string format_report(const ValidationReport& report);

struct Subject {
  std::string id;
  TimeGrid grid;
  std::vector<int> responses;
};

class BinaryDataset {
 public:
  /// Validates; throws ValidationError carrying the formatted report.
  static BinaryDataset from_records(std::span<const SubjectRecord> records);

  const std::vector<Subject>& subjects() const { return subjects_; }
  const PooledGrid& pooled() const { return pooled_; }
  std::size_t size() const { return subjects_.size(); }
  std::size_t observation_count() const;
  /// Index of a subject id, or nullopt.
  std::optional<std::size_t> find(const std::string& id) const;

  std::vector<SubjectRecord> to_records() const;

 private:
  BinaryDataset(std::vector<Subject> subjects, PooledGrid pooled)
      : subjects_(std::move(subjects)), pooled_(std::move(pooled)) {}

  std::vector<Subject> subjects_;
  PooledGrid pooled_;
};

class OrdinalDataset {
 public:
  static OrdinalDataset from_records(std::span<const SubjectRecord> records, int categories);

  int categories() const { return categories_; }
  const std::vector<Subject>& subjects() const { return subjects_; }
  std::size_t size() const { return subjects_.size(); }
  std::size_t observation_count() const;
  std::vector<SubjectRecord> to_records() const;

 private:
  OrdinalDataset(int categories, std::vector<Subject> subjects)
      : categories_(categories), subjects_(std::move(subjects)) {}

  int categories_;
  std::vector<Subject> subjects_;
};

/// Hyperparameters. Normal(a_mu, b_mu) for mu0 (b_mu is a variance),
/// Gamma(a_sigma, rate b_sigma) for sigma^2, Unif(a_rho, b_rho),
/// Unif(a_nu, b_nu), InvGamma(a_eps, scale b_eps) for the noise variance.
struct PriorConfig {
  double a_mu = 0.0;
  double b_mu = 100.0;
  double a_sigma = 2.0;
  double b_sigma = 1.0;
  double a_rho = 3.0;
  double b_rho = 12.0;
  double a_nu = 4.0;
  double b_nu = 30.0;
  double a_eps = 5.0;
  double b_eps = 0.001;

  /// Throws ValidationError naming the first violated constraint.
  void validate() const;
};

/// Full parameter state of one Gibbs iteration.
struct ChainState {
  std::vector<Eigen::VectorXd> latent;  ///< noisy latent signal per observation
  std::vector<Eigen::VectorXd> pg;      ///< Polya-Gamma variable per observation
  std::vector<Eigen::VectorXd> signal;  ///< subject signal on the pooled grid
  Eigen::VectorXd mean;                 ///< mean function on the pooled grid
  Eigen::MatrixXd cov;                  ///< covariance on the pooled grid
  double noise_var = 1.0;
  double mu0 = 0.0;
  double sigma2 = 1.0;
  double rho = 1.0;
  double nu = 10.0;

  double kappa() const { return 1.0 / (nu - 3.0); }
};

enum class MeanStructure {
  Hierarchical,  ///< mu ~ GP(mu0, Sigma/kappa)
  Constant,      ///< mu(t) == mu0 (simplified comparison model)
};

const char* to_string(MeanStructure m);
MeanStructure mean_structure_from_string(const std::string& s);

struct SamplerConfig {
  int total_iterations = 30000;
  int burn_in = 10000;
  int thinning = 4;
  std::uint64_t seed = 0;
  int griddy_size = 100;
  bool store_latents = false;
  MeanStructure mean_structure = MeanStructure::Hierarchical;

  void validate() const;
  /// Number of draws a run retains.
  int retained() const;
};

/// Subject ids and grid layout needed to interpret stored draws.
struct DrawsLayout {
  std::vector<std::string> subject_ids;
  std::vector<double> pooled_times;
  std::vector<std::vector<int>> observed;

  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t observation_count() const;
};

inline constexpr std::array<const char*, 9> kStepNames = {
    "step1_update_latent_noisy", "step2_update_pg",        "step3_update_noise_var",
    "step4_update_signals",      "step5_update_niw",       "step6_update_mu0",
    "step7_update_sigma2",       "step8_update_rho_griddy", "step9_update_nu_griddy"};

struct SamplerMetadata {
  std::uint64_t seed = 0;
  int burn_in = 0;
  int thinning = 1;
  int total_iterations = 0;
  int griddy_size = 0;
  bool store_latents = false;
  MeanStructure mean_structure = MeanStructure::Hierarchical;
  std::array<double, 9> step_seconds{};
};

/// Thinned post-burn-in chain output. Every stored array has leading
/// dimension size().
struct PosteriorDraws {
  DrawsLayout layout;
  PriorConfig priors;
  SamplerMetadata meta;

  std::vector<double> noise_var;
  std::vector<double> mu0;
  std::vector<double> sigma2;
  std::vector<double> rho;
  std::vector<double> nu;
  /// signal[s] is n x |pooled|.
  std::vector<Eigen::MatrixXd> signal;
  /// mean.row(s) is the mean function on the pooled grid.
  Eigen::MatrixXd mean;
  /// Optional (store_latents): covariance, latent and PG draws.
  std::vector<Eigen::MatrixXd> cov;
  std::vector<Eigen::VectorXd> latent;  ///< flattened over subjects
  std::vector<Eigen::VectorXd> pg;

  std::size_t size() const { return noise_var.size(); }
  std::size_t subjects() const { return layout.subject_ids.size(); }
  std::size_t grid_size() const { return layout.pooled_times.size(); }
  Eigen::VectorXd subject_signal(std::size_t s, std::size_t i) const {
    return signal[s].row(static_cast<Eigen::Index>(i)).transpose();
  }
  /// Throws if arrays disagree on S or on per-draw shapes.
  void check_consistent() const;
};

}  // namespace longcat
