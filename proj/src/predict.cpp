#include "longcat/predict.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "longcat/error.hpp"
#include "longcat/kernels.hpp"
#include "longcat/linalg.hpp"
#include "longcat/random.hpp"

namespace longcat {

namespace {

constexpr double kSameTime = 1e-9;

double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError("bad number '" + text + "' in grid spec");
  }
  if (used != text.size() || !std::isfinite(v)) throw ValidationError("bad number '" + text + "' in grid spec");
  return v;
}

MaternParams kernel_of(const DrawParams& p) { return {p.sigma2, p.rho}; }

std::size_t resolve_subject(const PosteriorDraws& draws, const std::string& subject) {
  auto idx = draws.layout.find(subject);
  if (!idx) throw ValidationError("unknown subject '" + subject + "'");
  return *idx;
}

}  // namespace

FineGrid FineGrid::build(std::span<const double> pooled, std::span<const double> requested) {
  std::vector<double> all(pooled.begin(), pooled.end());
  for (double t : requested) {
    if (!std::isfinite(t)) throw ValidationError("non-finite prediction time");
    auto it = std::lower_bound(pooled.begin(), pooled.end(), t - kSameTime);
    if (it != pooled.end() && std::fabs(*it - t) <= kSameTime) continue;
    all.push_back(t);
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end(), [](double a, double b) { return std::fabs(a - b) <= kSameTime; }),
            all.end());
  FineGrid g;
  g.times = all;
  for (std::size_t k = 0; k < all.size(); ++k) {
    auto it = std::lower_bound(pooled.begin(), pooled.end(), all[k] - kSameTime);
    const bool on_pool = it != pooled.end() && std::fabs(*it - all[k]) <= kSameTime;
    const int pos = static_cast<int>(k);
    if (on_pool) {
      g.pooled_index.push_back(static_cast<int>(it - pooled.begin()));
      g.pooled_positions.push_back(pos);
    } else {
      g.pooled_index.push_back(-1);
      g.new_positions.push_back(pos);
    }
  }
  return g;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') == std::string::npos) {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(parse_number(item));
    if (out.empty()) throw ValidationError("empty grid spec");
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw ValidationError("grid spec must be start:end:step");
  const double start = parse_number(parts[0]);
  const double end = parse_number(parts[1]);
  double num = 0.0, den = 1.0;
  if (auto slash = parts[2].find('/'); slash != std::string::npos) {
    num = parse_number(parts[2].substr(0, slash));
    den = parse_number(parts[2].substr(slash + 1));
  } else {
    num = parse_number(parts[2]);
  }
  if (!(num > 0) || !(den > 0)) throw ValidationError("grid step must be positive");
  if (end < start) throw ValidationError("grid end precedes start");
  for (long k = 0;; ++k) {
    const double t = start + (static_cast<double>(k) * num) / den;
    if (t > end + kSameTime) break;
    out.push_back(t);
  }
  return out;
}

DrawParams draw_params(const PosteriorDraws& draws, std::size_t s) {
  return {draws.noise_var.at(s), draws.mu0.at(s), draws.sigma2.at(s), draws.rho.at(s), draws.nu.at(s)};
}

Eigen::VectorXd extend_signal_to_fine_grid(const Eigen::VectorXd& pooled_signal,
                                           std::span<const double> pooled_times, const DrawParams& params,
                                           const FineGrid& fine, Rng& rng) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(fine.size()));
  for (std::size_t k = 0; k < fine.size(); ++k)
    if (fine.pooled_index[k] >= 0) out(static_cast<Eigen::Index>(k)) = pooled_signal(fine.pooled_index[k]);
  if (fine.new_positions.empty()) return out;

  std::vector<double> new_times;
  for (int k : fine.new_positions) new_times.push_back(fine.times[static_cast<std::size_t>(k)]);
  const auto kp = kernel_of(params);
  const auto nb = static_cast<Eigen::Index>(pooled_times.size());
  const auto na = static_cast<Eigen::Index>(new_times.size());

  // Joint covariance with the new block first.
  std::vector<double> joint(new_times);
  joint.insert(joint.end(), pooled_times.begin(), pooled_times.end());
  MvtParams mp;
  mp.nu = params.nu;
  mp.mean = Eigen::VectorXd::Constant(na + nb, params.mu0);
  mp.cov = covariance_matrix(std::span<const double>(joint), kp);
  std::vector<int> a(static_cast<std::size_t>(na)), b(static_cast<std::size_t>(nb));
  for (Eigen::Index k = 0; k < na; ++k) a[static_cast<std::size_t>(k)] = static_cast<int>(k);
  for (Eigen::Index k = 0; k < nb; ++k) b[static_cast<std::size_t>(k)] = static_cast<int>(na + k);
  const auto cond = mvt_conditional(mp, a, b, pooled_signal);
  const Eigen::VectorXd z = sample_mvt(cond.params, rng);
  for (std::size_t k = 0; k < fine.new_positions.size(); ++k)
    out(fine.new_positions[k]) = z(static_cast<Eigen::Index>(k));
  return out;
}

Eigen::VectorXd new_subject_signal(const DrawParams& params, const FineGrid& fine, Rng& rng) {
  MvtParams mp;
  mp.nu = params.nu;
  mp.mean = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(fine.size()), params.mu0);
  mp.cov = covariance_matrix(std::span<const double>(fine.times), kernel_of(params));
  return sample_mvt(mp, rng);
}

double expected_expit(double z, double noise_var, int mc, Rng& rng) {
  if (mc < 1) throw ValidationError("mc_inner must be >= 1");
  if (!(noise_var > 0)) return expit(z);
  const double sd = std::sqrt(noise_var);
  double acc = 0.0;
  for (int r = 0; r < mc; ++r) acc += expit(z + sd * rng.normal());
  return acc / mc;
}

Eigen::MatrixXd signal_draws(const PosteriorDraws& draws, const std::string& subject, const FineGrid& fine,
                             std::uint64_t seed) {
  const bool fresh = subject == "new";
  const std::size_t i = fresh ? 0 : resolve_subject(draws, subject);
  const Rng base(seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), static_cast<Eigen::Index>(fine.size()));
  for (std::size_t s = 0; s < draws.size(); ++s) {
    Rng rng = base.split(s);
    const auto params = draw_params(draws, s);
    const Eigen::VectorXd z = fresh ? new_subject_signal(params, fine, rng)
                                    : extend_signal_to_fine_grid(draws.subject_signal(s, i),
                                                                 draws.layout.pooled_times, params, fine, rng);
    out.row(static_cast<Eigen::Index>(s)) = z.transpose();
  }
  return out;
}

Eigen::MatrixXd probability_draws(const Eigen::MatrixXd& signals, std::span<const double> noise_var, int mc_inner,
                                  std::uint64_t seed) {
  if (static_cast<std::size_t>(signals.rows()) != noise_var.size())
    throw ValidationError("signal draws and noise draws differ in length");
  const Rng base(seed);
  Eigen::MatrixXd out(signals.rows(), signals.cols());
  for (Eigen::Index s = 0; s < signals.rows(); ++s) {
    Rng rng = base.split(static_cast<std::uint64_t>(s));
    for (Eigen::Index k = 0; k < signals.cols(); ++k)
      out(s, k) = expected_expit(signals(s, k), noise_var[static_cast<std::size_t>(s)], mc_inner, rng);
  }
  return out;
}

CurveEstimate summarize_curves(const Eigen::MatrixXd& per_draw, std::span<const double> times, double level,
                               bool keep_draws) {
  if (static_cast<std::size_t>(per_draw.cols()) != times.size())
    throw ValidationError("curve draws and times differ in width");
  if (per_draw.rows() == 0) throw ValidationError("no posterior draws to summarize");
  CurveEstimate c;
  c.times.assign(times.begin(), times.end());
  c.level = level;
  std::vector<double> column(static_cast<std::size_t>(per_draw.rows()));
  for (Eigen::Index k = 0; k < per_draw.cols(); ++k) {
    for (Eigen::Index s = 0; s < per_draw.rows(); ++s) column[static_cast<std::size_t>(s)] = per_draw(s, k);
    const auto sm = summarize(column, level);
    c.mean.push_back(sm.mean);
    c.lower.push_back(sm.lower);
    c.upper.push_back(sm.upper);
  }
  if (keep_draws) c.per_draw = per_draw;
  return c;
}

CurveEstimate probability_response_curve(const PosteriorDraws& draws, const std::string& subject,
                                         const FineGrid& fine, const PredictOptions& options, std::uint64_t seed) {
  const Eigen::MatrixXd z = signal_draws(draws, subject, fine, derive_seed(seed, 1));
  const Eigen::MatrixXd p = probability_draws(z, draws.noise_var, options.mc_inner, derive_seed(seed, 2));
  return summarize_curves(p, fine.times, options.level, options.keep_draws);
}

BinaryCovariance binary_covariance(const PosteriorDraws& draws, const std::string& subject, const FineGrid& fine,
                                   std::size_t a, std::size_t b, int mc_inner, std::uint64_t seed) {
  if (a >= fine.size() || b >= fine.size()) throw std::out_of_range("time position outside the fine grid");
  if (mc_inner < 1) throw ValidationError("mc_inner must be >= 1");
  const Eigen::MatrixXd z = signal_draws(draws, subject, fine, derive_seed(seed, 1));
  const Rng base(derive_seed(seed, 2));
  BinaryCovariance out;
  std::vector<double> pa, pb;
  for (std::size_t s = 0; s < draws.size(); ++s) {
    Rng rng = base.split(s);
    const double sd = std::sqrt(std::max(draws.noise_var[s], 0.0));
    const double za = z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
    const double zb = z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(b));
    double ma = 0.0, mb = 0.0, cab = 0.0;
    for (int r = 0; r < mc_inner; ++r) {
      const double ea = sd * rng.normal();
      const double eb = a == b ? ea : sd * rng.normal();
      const double fa = expit(za + ea);
      const double fb = expit(zb + eb);
      // Running means and co-moment (Welford).
      const double da = fa - ma;
      ma += da / (r + 1);
      mb += (fb - mb) / (r + 1);
      cab += da * (fb - mb);
    }
    const double cond_cov = mc_inner > 1 ? cab / mc_inner : 0.0;
    out.variance.push_back(ma * (1.0 - ma));
    out.covariance.push_back(a == b ? ma * (1.0 - ma) : cond_cov);
    pa.push_back(ma);
    pb.push_back(mb);
  }
  out.variance_summary = summarize(out.variance);
  out.covariance_summary = summarize(out.covariance);
  const double mean_a = mean(pa), mean_b = mean(pb);
  double cross = 0.0;
  for (std::size_t s = 0; s < pa.size(); ++s) cross += (pa[s] - mean_a) * (pb[s] - mean_b);
  cross /= static_cast<double>(pa.size());
  out.marginal_covariance = a == b ? mean_a * (1.0 - mean_a) : mean(out.covariance) + cross;
  return out;
}

double delta_probability(double mean, double var, double noise_var) {
  const double f = expit(mean);
  const double f2 = f * (1.0 - f) * (1.0 - 2.0 * f);
  return f + 0.5 * (var + noise_var) * f2;
}

double delta_covariance(double mean_a, double var_a, double mean_b, double var_b, double cov, double noise_var) {
  const double fa = expit(mean_a), fb = expit(mean_b);
  const double d1a = fa * (1.0 - fa), d1b = fb * (1.0 - fb);
  const double d2a = d1a * (1.0 - 2.0 * fa), d2b = d1b * (1.0 - 2.0 * fb);
  return d1a * d1b * cov - 0.25 * (var_a + noise_var) * (var_b + noise_var) * d2a * d2b;
}

KernelCurve posterior_covariance_kernel(const PosteriorDraws& draws, std::span<const double> distances,
                                        double level) {
  if (draws.size() == 0) throw ValidationError("no posterior draws");
  KernelCurve out;
  out.distances.assign(distances.begin(), distances.end());
  std::vector<double> values(draws.size());
  for (double d : distances) {
    for (std::size_t s = 0; s < draws.size(); ++s) values[s] = matern52(d, {draws.sigma2[s], draws.rho[s]});
    const auto sm = summarize(values, level);
    out.mean.push_back(sm.mean);
    out.lower.push_back(sm.lower);
    out.upper.push_back(sm.upper);
  }
  return out;
}

}  // namespace longcat
