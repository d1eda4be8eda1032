#include "longcat/ordinal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "longcat/error.hpp"
#include "longcat/gibbs.hpp"

namespace longcat {

namespace {

double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

std::size_t common_draw_count(const std::vector<PosteriorDraws>& fits) {
  if (fits.empty()) throw ValidationError("no category fits");
  const std::size_t s = fits.front().size();
  for (const auto& f : fits)
    if (f.size() != s) throw ValidationError("categories have mismatched draw counts");
  return s;
}

// Signal draws of one category on exactly `times` (draws x times).
Eigen::MatrixXd aligned_signals(const PosteriorDraws& fit, const std::string& subject, std::span<const double> times,
                                std::uint64_t seed) {
  const FineGrid fine = FineGrid::build(fit.layout.pooled_times, times);
  const std::string who = subject != "new" && fit.layout.find(subject) ? subject : "new";
  const Eigen::MatrixXd z = signal_draws(fit, who, fine, seed);
  Eigen::MatrixXd out(z.rows(), static_cast<Eigen::Index>(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto it = std::lower_bound(fine.times.begin(), fine.times.end(), times[k] - 1e-9);
    out.col(static_cast<Eigen::Index>(k)) = z.col(it - fine.times.begin());
  }
  return out;
}

}  // namespace

BinaryDataset OrdinalDecomposition::dataset(int j) const {
  if (j < 1 || j > static_cast<int>(records.size())) throw ValidationError("category out of range");
  const auto& r = records[static_cast<std::size_t>(j - 1)];
  if (r.empty()) throw ValidationError("category unreachable: no observation reaches category " + std::to_string(j));
  return BinaryDataset::from_records(r);
}

std::vector<SubjectRecord> OrdinalDecomposition::reconstruct(const std::vector<SubjectRecord>& original_layout) const {
  std::vector<SubjectRecord> out = original_layout;
  for (auto& r : out) std::fill(r.responses.begin(), r.responses.end(), categories);
  // Category C unless some indicator is one; the first such category wins.
  for (std::size_t j = records.size(); j-- > 0;) {
    std::size_t k = 0;
    for (const auto& rec : records[j])
      for (int y : rec.responses) {
        const auto& o = index[j][k++];
        if (y == 1) out[o.subject].responses[o.position] = static_cast<int>(j) + 1;
      }
  }
  return out;
}

OrdinalDecomposition decompose(const OrdinalDataset& data) {
  OrdinalDecomposition d;
  d.categories = data.categories();
  const auto levels = static_cast<std::size_t>(d.categories - 1);
  d.records.resize(levels);
  d.index.resize(levels);
  for (std::size_t j = 0; j < levels; ++j) {
    const int level = static_cast<int>(j) + 1;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& s = data.subjects()[i];
      SubjectRecord rec{s.id, {}, {}};
      for (std::size_t t = 0; t < s.responses.size(); ++t) {
        if (s.responses[t] < level) continue;
        rec.times.push_back(s.grid[t]);
        rec.responses.push_back(s.responses[t] == level ? 1 : 0);
        d.index[j].push_back({i, t});
      }
      if (!rec.times.empty()) d.records[j].push_back(std::move(rec));
    }
  }
  return d;
}

std::uint64_t category_seed(std::uint64_t seed, int category) {
  return derive_seed(seed, static_cast<std::uint64_t>(category));
}

std::vector<PosteriorDraws> fit_ordinal(const OrdinalDecomposition& decomposition, const OrdinalFitOptions& options) {
  const int levels = static_cast<int>(decomposition.size());
  if (levels < 1) throw ValidationError("ordinal data needs at least 2 categories");
  if (options.priors.size() != 1 && options.priors.size() != static_cast<std::size_t>(levels))
    throw ValidationError("need one prior per category or a single shared prior");
  if (!options.seeds.empty() && options.seeds.size() != static_cast<std::size_t>(levels))
    throw ValidationError("need one seed per category");

  // Validate everything up front so worker threads only see numerical errors.
  std::vector<BinaryDataset> datasets;
  for (int j = 1; j <= levels; ++j) datasets.push_back(decomposition.dataset(j));

  std::vector<PosteriorDraws> fits(static_cast<std::size_t>(levels));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(levels));
  auto fit_one = [&](std::size_t j) {
    try {
      SamplerConfig cfg = options.config;
      cfg.seed = options.seeds.empty() ? category_seed(options.config.seed, static_cast<int>(j) + 1) : options.seeds[j];
      const auto& prior = options.priors.size() == 1 ? options.priors.front() : options.priors[j];
      fits[j] = run_chain(datasets[j], prior, cfg);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };

  const int workers = std::clamp(options.threads, 1, levels);
  if (workers == 1) {
    for (std::size_t j = 0; j < fits.size(); ++j) fit_one(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < fits.size();) fit_one(j);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return fits;
}

std::vector<double> ordinal_time_grid(const std::vector<PosteriorDraws>& fits, std::span<const double> requested) {
  std::vector<double> pooled;
  for (const auto& f : fits) {
    const auto merged = FineGrid::build(pooled, f.layout.pooled_times);
    pooled = merged.times;
  }
  return FineGrid::build(pooled, requested).times;
}

OrdinalCurves ordinal_probability_curves(const std::vector<PosteriorDraws>& fits, const std::string& subject,
                                         std::span<const double> times, const PredictOptions& options,
                                         std::uint64_t seed) {
  const std::size_t draws = common_draw_count(fits);
  const std::size_t levels = fits.size();
  if (subject != "new" &&
      std::none_of(fits.begin(), fits.end(), [&](const auto& f) { return f.layout.find(subject).has_value(); }))
    throw ValidationError("unknown subject '" + subject + "'");

  const auto nt = static_cast<Eigen::Index>(times.size());
  const auto ns = static_cast<Eigen::Index>(draws);
  OrdinalCurves out;
  out.times.assign(times.begin(), times.end());
  out.per_draw.assign(levels + 1, Eigen::MatrixXd::Zero(ns, nt));
  Eigen::MatrixXd remaining = Eigen::MatrixXd::Ones(ns, nt);  // prod_{k<j} E(1 - pi_k)
  for (std::size_t k = 0; k < levels; ++k) {
    const std::uint64_t s = derive_seed(seed, k + 1);
    const Eigen::MatrixXd z = aligned_signals(fits[k], subject, times, derive_seed(s, 1));
    const Eigen::MatrixXd e = probability_draws(z, fits[k].noise_var, options.mc_inner, derive_seed(s, 2));
    out.per_draw[k] = remaining.cwiseProduct(e);
    remaining = remaining.cwiseProduct((1.0 - e.array()).matrix());
  }
  out.per_draw[levels] = remaining;
  for (const auto& m : out.per_draw) out.curves.push_back(summarize_curves(m, times, options.level, options.keep_draws));
  return out;
}

std::vector<Eigen::MatrixXd> ordinal_joint_probability(const std::vector<PosteriorDraws>& fits,
                                                       const std::string& subject, std::span<const double> times,
                                                       std::size_t a, std::size_t b, int mc_inner,
                                                       std::uint64_t seed) {
  const std::size_t draws = common_draw_count(fits);
  if (a >= times.size() || b >= times.size()) throw std::out_of_range("time position outside the grid");
  if (mc_inner < 1) throw ValidationError("mc_inner must be >= 1");
  const std::size_t levels = fits.size();
  const int c = static_cast<int>(levels) + 1;

  // moments[k][s](u, v) = E[f_u(pi_k(t)) f_v(pi_k(t'))] with f_0 = pi, f_1 = 1 - pi, f_2 = 1.
  std::vector<std::vector<Eigen::Matrix3d>> moments(levels, std::vector<Eigen::Matrix3d>(draws));
  for (std::size_t k = 0; k < levels; ++k) {
    const std::uint64_t s = derive_seed(seed, k + 1);
    const Eigen::MatrixXd z = aligned_signals(fits[k], subject, times, derive_seed(s, 1));
    const Rng base(derive_seed(s, 2));
    for (std::size_t d = 0; d < draws; ++d) {
      Rng rng = base.split(d);
      const double sd = std::sqrt(std::max(fits[k].noise_var[d], 0.0));
      const double za = z(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(a));
      const double zb = z(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(b));
      Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
      for (int r = 0; r < mc_inner; ++r) {
        const double ea = sd * rng.normal();
        const double eb = a == b ? ea : sd * rng.normal();
        const Eigen::Vector3d fa(expit(za + ea), 1.0 - expit(za + ea), 1.0);
        const Eigen::Vector3d fb(expit(zb + eb), 1.0 - expit(zb + eb), 1.0);
        m.noalias() += fa * fb.transpose();
      }
      moments[k][d] = m / mc_inner;
    }
  }

  // Category j contributes pi_j, (1 - pi_k) for k < j and nothing for k > j.
  auto factor = [](std::size_t k, int j) { return static_cast<int>(k) + 1 == j ? 0 : (static_cast<int>(k) + 1 < j ? 1 : 2); };
  std::vector<Eigen::MatrixXd> out(draws, Eigen::MatrixXd::Ones(c, c));
  for (std::size_t d = 0; d < draws; ++d)
    for (int j = 1; j <= c; ++j)
      for (int jp = 1; jp <= c; ++jp) {
        double v = 1.0;
        for (std::size_t k = 0; k < levels; ++k) v *= moments[k][d](factor(k, j), factor(k, jp));
        out[d](j - 1, jp - 1) = v;
      }
  return out;
}

}  // namespace longcat
