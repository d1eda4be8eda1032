#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longcat/predict.hpp"
#include "longcat/types.hpp"

namespace longcat {

/// Position of a retained observation in the original ordinal dataset.
struct OriginalIndex {
  std::size_t subject = 0;
  std::size_t position = 0;
};

/// Continuation-ratio split of ordinal data into C-1 binary datasets:
/// (i,t) is kept in category j iff Y_it >= j, with value 1 iff Y_it == j.
struct OrdinalDecomposition {
  int categories = 0;
  /// records[j-1]: binary records of category j (subjects with no retained
  /// observation are dropped).
  std::vector<std::vector<SubjectRecord>> records;
  /// index[j-1][k]: origin of the k-th retained observation (record order).
  std::vector<std::vector<OriginalIndex>> index;

  std::size_t size() const { return records.size(); }
  /// Throws ValidationError("category unreachable") when category j is empty.
  BinaryDataset dataset(int j) const;
  /// Inverse mapping: original responses rebuilt from the indicators.
  std::vector<SubjectRecord> reconstruct(const std::vector<SubjectRecord>& original_layout) const;
};

OrdinalDecomposition decompose(const OrdinalDataset& data);

/// Seed used for category j (1-based) of an ordinal fit with base seed.
std::uint64_t category_seed(std::uint64_t seed, int category);

struct OrdinalFitOptions {
  /// One prior per category, or a single prior shared by value.
  std::vector<PriorConfig> priors;
  SamplerConfig config;
  /// Explicit per-category seeds; defaults to category_seed(config.seed, j).
  std::vector<std::uint64_t> seeds;
  int threads = 1;
};

/// Fits every category independently; results do not depend on `threads`.
std::vector<PosteriorDraws> fit_ordinal(const OrdinalDecomposition& decomposition, const OrdinalFitOptions& options);

/// Union of every category's pooled grid with the requested times.
std::vector<double> ordinal_time_grid(const std::vector<PosteriorDraws>& fits, std::span<const double> requested);

struct OrdinalCurves {
  std::vector<double> times;
  std::vector<CurveEstimate> curves;     ///< C entries
  std::vector<Eigen::MatrixXd> per_draw;  ///< C matrices, draws x times
};

/// Category probability curves P_j(t) for a subject id or "new". Subjects
/// absent from a category's data are treated as new for that category.
OrdinalCurves ordinal_probability_curves(const std::vector<PosteriorDraws>& fits, const std::string& subject,
                                         std::span<const double> times, const PredictOptions& options,
                                         std::uint64_t seed);

/// Per-draw C x C matrix of P(Y_t = j, Y_t' = j') for positions a, b of
/// `times`; every matrix sums to one.
std::vector<Eigen::MatrixXd> ordinal_joint_probability(const std::vector<PosteriorDraws>& fits,
                                                       const std::string& subject, std::span<const double> times,
                                                       std::size_t a, std::size_t b, int mc_inner,
                                                       std::uint64_t seed);

}  // namespace longcat
