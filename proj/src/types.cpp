#include "longcat/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "longcat/error.hpp"

namespace longcat {

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw ValidationError("time grid is empty");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) throw ValidationError("time grid has a non-finite point");
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw ValidationError("time grid is not strictly increasing at index " + std::to_string(i));
  }
}

bool PooledGrid::common() const {
  return std::all_of(missing.begin(), missing.end(), [](const auto& m) { return m.empty(); });
}

PooledGrid pool_grids(std::span<const TimeGrid> grids) {
  if (grids.empty()) throw ValidationError("no subjects");
  PooledGrid pooled;
  for (const auto& g : grids) pooled.times.insert(pooled.times.end(), g.values().begin(), g.values().end());
  std::sort(pooled.times.begin(), pooled.times.end());
  pooled.times.erase(std::unique(pooled.times.begin(), pooled.times.end()), pooled.times.end());

  const std::size_t p = pooled.times.size();
  for (const auto& g : grids) {
    std::vector<int> obs;
    std::vector<bool> mask(p, false);
    obs.reserve(g.size());
    for (double t : g.values()) {
      auto it = std::lower_bound(pooled.times.begin(), pooled.times.end(), t);
      const int k = static_cast<int>(it - pooled.times.begin());
      obs.push_back(k);
      mask[static_cast<std::size_t>(k)] = true;
    }
    std::vector<int> miss;
    for (std::size_t k = 0; k < p; ++k)
      if (!mask[k]) miss.push_back(static_cast<int>(k));
    pooled.observed.push_back(std::move(obs));
    pooled.missing.push_back(std::move(miss));
    pooled.mask.push_back(std::move(mask));
  }
  return pooled;
}

namespace {

void check_common(std::span<const SubjectRecord> records, ValidationReport& report) {
  if (records.empty()) {
    report.push_back({"", std::nullopt, "no subjects"});
    return;
  }
  std::vector<std::string> seen;
  for (const auto& r : records) {
    if (std::find(seen.begin(), seen.end(), r.id) != seen.end())
      report.push_back({r.id, std::nullopt, "duplicate subject id"});
    seen.push_back(r.id);
    if (r.times.empty()) report.push_back({r.id, std::nullopt, "subject has no observations"});
    if (r.times.size() != r.responses.size())
      report.push_back({r.id, std::nullopt, "times and responses differ in length"});
    for (std::size_t t = 0; t < r.times.size(); ++t) {
      if (!std::isfinite(r.times[t])) report.push_back({r.id, t, "non-finite time"});
      if (t > 0 && !(r.times[t] > r.times[t - 1]))
        report.push_back({r.id, t, "times not strictly increasing (duplicate or unsorted)"});
    }
  }
}

std::vector<Subject> to_subjects(std::span<const SubjectRecord> records) {
  std::vector<Subject> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.id, TimeGrid(r.times), r.responses});
  return out;
}

std::vector<SubjectRecord> to_records_impl(const std::vector<Subject>& subjects) {
  std::vector<SubjectRecord> out;
  for (const auto& s : subjects) out.push_back({s.id, s.grid.values(), s.responses});
  return out;
}

}  // namespace

ValidationReport validate_binary(std::span<const SubjectRecord> records) {
  ValidationReport report;
  check_common(records, report);
  for (const auto& r : records)
    for (std::size_t t = 0; t < r.responses.size(); ++t)
      if (r.responses[t] != 0 && r.responses[t] != 1)
        report.push_back({r.id, t, "binary response " + std::to_string(r.responses[t]) + " not in {0,1}"});
  return report;
}

ValidationReport validate_ordinal(std::span<const SubjectRecord> records, int categories) {
  ValidationReport report;
  if (categories < 2) report.push_back({"", std::nullopt, "ordinal data needs at least 2 categories"});
  check_common(records, report);
  for (const auto& r : records)
    for (std::size_t t = 0; t < r.responses.size(); ++t)
      if (r.responses[t] < 1 || r.responses[t] > categories)
        report.push_back({r.id, t,
                          "ordinal response " + std::to_string(r.responses[t]) + " out of range 1.." +
                              std::to_string(categories)});
  return report;
}

std::string format_report(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& issue : report) {
    os << "subject '" << issue.subject << "'";
    if (issue.index) os << " index " << *issue.index;
    os << ": " << issue.message << '\n';
  }
  return os.str();
}

BinaryDataset BinaryDataset::from_records(std::span<const SubjectRecord> records) {
  const auto report = validate_binary(records);
  if (!report.empty()) throw ValidationError("invalid binary dataset:\n" + format_report(report));
  auto subjects = to_subjects(records);
  std::vector<TimeGrid> grids;
  for (const auto& s : subjects) grids.push_back(s.grid);
  auto pooled = pool_grids(grids);
  return BinaryDataset(std::move(subjects), std::move(pooled));
}

std::size_t BinaryDataset::observation_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.responses.size();
  return n;
}

std::optional<std::size_t> BinaryDataset::find(const std::string& id) const {
  for (std::size_t i = 0; i < subjects_.size(); ++i)
    if (subjects_[i].id == id) return i;
  return std::nullopt;
}

std::vector<SubjectRecord> BinaryDataset::to_records() const { return to_records_impl(subjects_); }

OrdinalDataset OrdinalDataset::from_records(std::span<const SubjectRecord> records, int categories) {
  const auto report = validate_ordinal(records, categories);
  if (!report.empty()) throw ValidationError("invalid ordinal dataset:\n" + format_report(report));
  return OrdinalDataset(categories, to_subjects(records));
}

std::size_t OrdinalDataset::observation_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.responses.size();
  return n;
}

std::vector<SubjectRecord> OrdinalDataset::to_records() const { return to_records_impl(subjects_); }

void PriorConfig::validate() const {
  auto fail = [](const char* what) { throw ValidationError(std::string("invalid priors: ") + what); };
  if (!(b_mu > 0)) fail("b_mu must be > 0");
  if (!(a_sigma > 0)) fail("a_sigma must be > 0");
  if (!(b_sigma > 0)) fail("b_sigma must be > 0");
  if (!(a_rho < b_rho)) fail("a_rho must be < b_rho");
  if (!(a_rho >= 0)) fail("a_rho must be >= 0");
  if (!(a_nu > 3)) fail("a_nu must be > 3");
  if (!(a_nu < b_nu)) fail("a_nu must be < b_nu");
  if (!(a_eps > 0)) fail("a_eps must be > 0");
  if (!(b_eps > 0)) fail("b_eps must be > 0");
}

const char* to_string(MeanStructure m) {
  return m == MeanStructure::Hierarchical ? "hierarchical" : "constant";
}

MeanStructure mean_structure_from_string(const std::string& s) {
  if (s == "hierarchical") return MeanStructure::Hierarchical;
  if (s == "constant") return MeanStructure::Constant;
  throw ValidationError("unknown mean structure '" + s + "'");
}

void SamplerConfig::validate() const {
  auto fail = [](const char* what) { throw ValidationError(std::string("invalid sampler config: ") + what); };
  if (total_iterations < 1) fail("total_iterations must be >= 1");
  if (burn_in < 0 || burn_in >= total_iterations) fail("burn_in must satisfy 0 <= burn_in < total_iterations");
  if (thinning < 1) fail("thinning must be >= 1");
  if (griddy_size < 2) fail("griddy_size must be >= 2");
}

int SamplerConfig::retained() const { return (total_iterations - burn_in) / thinning; }

std::optional<std::size_t> DrawsLayout::find(const std::string& id) const {
  for (std::size_t i = 0; i < subject_ids.size(); ++i)
    if (subject_ids[i] == id) return i;
  return std::nullopt;
}

std::size_t DrawsLayout::observation_count() const {
  std::size_t n = 0;
  for (const auto& o : observed) n += o.size();
  return n;
}

void PosteriorDraws::check_consistent() const {
  const std::size_t s = size();
  auto fail = [](const std::string& what) { throw ValidationError("inconsistent draws: " + what); };
  if (mu0.size() != s || sigma2.size() != s || rho.size() != s || nu.size() != s)
    fail("scalar traces differ in length");
  if (signal.size() != s) fail("signal draws differ in length");
  if (static_cast<std::size_t>(mean.rows()) != s) fail("mean draws differ in length");
  const auto n = static_cast<Eigen::Index>(subjects());
  const auto p = static_cast<Eigen::Index>(grid_size());
  for (const auto& z : signal)
    if (z.rows() != n || z.cols() != p) fail("signal draw has wrong shape");
  if (s > 0 && mean.cols() != p) fail("mean draw has wrong width");
  if (!cov.empty() && cov.size() != s) fail("covariance draws differ in length");
  if (!latent.empty() && latent.size() != s) fail("latent draws differ in length");
  if (!pg.empty() && pg.size() != s) fail("pg draws differ in length");
  if (layout.observed.size() != subjects()) fail("layout observed list differs from subject count");
}

}  // namespace longcat
