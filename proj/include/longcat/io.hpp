#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "longcat/diagnostics.hpp"
#include "longcat/ordinal.hpp"
#include "longcat/predict.hpp"
#include "longcat/simulate.hpp"
#include "longcat/types.hpp"

namespace longcat {

/// Parses `subject,time,response` CSV text. Rows are grouped by subject in
/// order of first appearance and sorted by time within a subject. Throws
/// ValidationError with the offending line number.
std::vector<SubjectRecord> parse_csv(const std::string& text);
std::vector<SubjectRecord> read_csv(const std::filesystem::path& path);
std::string format_csv(const std::vector<SubjectRecord>& records);
void write_csv(const std::filesystem::path& path, const std::vector<SubjectRecord>& records);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

nlohmann::json to_json(const PriorConfig& p);
/// Missing keys keep their defaults; unknown keys are an error.
PriorConfig priors_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SamplerConfig& c);
SamplerConfig config_from_json(const nlohmann::json& j);
SimScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimScenario& s);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Archive directory: draws.bin (columnar little-endian float64),
/// draws.json (fields, shapes, offsets, seed, config, priors, layout) and
/// traces.csv (scalar traces).
void write_draws(const std::filesystem::path& dir, const PosteriorDraws& draws);
PosteriorDraws read_draws(const std::filesystem::path& dir);

/// Tidy `time,mean,lower,upper` rows.
std::string format_curve_csv(const CurveEstimate& curve);

nlohmann::json to_json(const ScoreReport& r);
/// `G,P,G+P,CRPS` header plus one row.
std::string format_score_csv(const ScoreReport& r);

/// One CSV per category (category_<j>.csv) plus index.json mapping each
/// retained row to (subject, position) in the original data.
void write_decomposition(const std::filesystem::path& dir, const OrdinalDecomposition& d);

/// data.csv, truth.csv (subject,time,signal,latent,probability,curve,observed),
/// kernel.csv (distance,value) and scenario.json.
void write_simulation(const std::filesystem::path& dir, const SimScenario& scenario, const SimResult& result);

}  // namespace longcat
