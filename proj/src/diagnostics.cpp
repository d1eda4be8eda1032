#include "longcat/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "longcat/error.hpp"
#include "longcat/linalg.hpp"
#include "longcat/rng.hpp"
#include "longcat/summary.hpp"

namespace longcat {

namespace {

double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double check_replicates(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates) {
  if (replicates.cols() != y.size()) throw ValidationError("replicates and observations differ in width");
  if (replicates.rows() < 1) throw ValidationError("need at least one replicate");
  return static_cast<double>(replicates.rows());
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double rmse(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw ValidationError("rmse inputs differ in shape");
  return std::sqrt((estimate - truth).array().square().mean());
}

std::vector<double> rmse_signal(const PosteriorDraws& draws, const Eigen::MatrixXd& truth) {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& z : draws.signal) out.push_back(rmse(z, truth));
  return out;
}

Eigen::MatrixXd posterior_mean_signal(const PosteriorDraws& draws) {
  if (draws.size() == 0) throw ValidationError("no posterior draws");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(draws.signal.front().rows(), draws.signal.front().cols());
  for (const auto& z : draws.signal) acc += z;
  return acc / static_cast<double>(draws.size());
}

Eigen::VectorXd observed_responses(const BinaryDataset& data, const DrawsLayout& layout) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(layout.observation_count()));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < layout.subject_ids.size(); ++i) {
    const auto idx = data.find(layout.subject_ids[i]);
    if (!idx) throw ValidationError("subject '" + layout.subject_ids[i] + "' missing from data");
    const auto& s = data.subjects()[*idx];
    if (s.responses.size() != layout.observed[i].size())
      throw ValidationError("subject '" + s.id + "' has a different number of observations than the draws");
    for (std::size_t t = 0; t < s.responses.size(); ++t) {
      const double pooled = layout.pooled_times[static_cast<std::size_t>(layout.observed[i][t])];
      if (std::fabs(pooled - s.grid[t]) > 1e-9)
        throw ValidationError("subject '" + s.id + "' observation times differ from the draws");
      y(k++) = s.responses[t];
    }
  }
  if (data.size() != layout.subject_ids.size()) throw ValidationError("data has subjects absent from the draws");
  return y;
}

Eigen::MatrixXd replicate_responses(const PosteriorDraws& draws, int replicates, std::uint64_t seed) {
  if (replicates < 1) throw ValidationError("replicate count must be >= 1");
  if (draws.size() == 0) throw ValidationError("no posterior draws");
  const auto nobs = static_cast<Eigen::Index>(draws.layout.observation_count());
  Eigen::MatrixXd out(replicates, nobs);
  const Rng base(seed);
  for (int r = 0; r < replicates; ++r) {
    Rng rng = base.split(static_cast<std::uint64_t>(r));
    const std::size_t s = static_cast<std::size_t>(r) % draws.size();
    const double sd = std::sqrt(std::max(draws.noise_var[s], 0.0));
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < draws.subjects(); ++i)
      for (int idx : draws.layout.observed[i]) {
        const double z = draws.signal[s](static_cast<Eigen::Index>(i), idx) + sd * rng.normal();
        out(r, k++) = rng.uniform() < expit(z) ? 1.0 : 0.0;
      }
  }
  return out;
}

PredictiveLoss posterior_predictive_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates) {
  const double r = check_replicates(y, replicates);
  PredictiveLoss out;
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double m = replicates.col(k).sum() / r;
    const double var = (replicates.col(k).array() - m).square().sum() / r;
    out.G += (y(k) - m) * (y(k) - m);
    out.P += var;
  }
  out.total = out.G + out.P;
  return out;
}

double crps_binary(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates) {
  const double r = check_replicates(y, replicates);
  if (y.size() == 0) throw ValidationError("no observations to score");
  double acc = 0.0;
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double p = replicates.col(k).sum() / r;
    acc += std::fabs(p - y(k)) - p * (1.0 - p);
  }
  return acc / static_cast<double>(y.size());
}

ScoreReport score(const PosteriorDraws& draws, const BinaryDataset& data, int replicates, std::uint64_t seed) {
  const Eigen::VectorXd y = observed_responses(data, draws.layout);
  const Eigen::MatrixXd reps = replicate_responses(draws, replicates, seed);
  return {posterior_predictive_loss(y, reps), crps_binary(y, reps)};
}

std::optional<double> pearson(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("paired sequences differ in length");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa <= 0 || sbb <= 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

double bivariate_normal_cdf(double h, double k, double r) {
  if (r <= -1.0) return std::max(0.0, normal_cdf(h) + normal_cdf(k) - 1.0);
  if (r >= 1.0) return normal_cdf(std::min(h, k));
  auto density = [h, k](double s) {
    const double q = 1.0 - s * s;
    return std::exp(-(h * h - 2.0 * s * h * k + k * k) / (2.0 * q)) / (2.0 * std::numbers::pi * std::sqrt(q));
  };
  const double integral = r == 0.0 ? 0.0 : boost::math::quadrature::gauss_kronrod<double, 31>::integrate(density, 0.0, r, 15, 1e-13);
  return normal_cdf(h) * normal_cdf(k) + integral;
}

std::optional<double> tetrachoric(double n00, double n01, double n10, double n11) {
  const double n = n00 + n01 + n10 + n11;
  if (!(n >= 2)) return std::nullopt;
  const double pa0 = (n00 + n01) / n;
  const double pb0 = (n00 + n10) / n;
  if (pa0 <= 0 || pa0 >= 1 || pb0 <= 0 || pb0 >= 1) return std::nullopt;
  // With both thresholds free the model is saturated for a 2x2 table: the
  // likelihood is maximized at the marginal thresholds and the correlation
  // reproducing the (0,0) cell.
  const double h = normal_quantile(pa0);
  const double k = normal_quantile(pb0);
  const double p00 = n00 / n;
  const double lo = -1.0 + 1e-12, hi = 1.0 - 1e-12;
  auto f = [&](double r) { return bivariate_normal_cdf(h, k, r) - p00; };
  const double flo = f(lo), fhi = f(hi);
  if (flo >= 0) return -1.0;
  if (fhi <= 0) return 1.0;
  // Start from the cosine odds-ratio approximation to bracket tightly.
  const double odds = (n00 + 0.5) * (n11 + 0.5) / ((n01 + 0.5) * (n10 + 0.5));
  const double guess = std::cos(std::numbers::pi / (1.0 + std::sqrt(odds)));
  double a = lo, b = hi;
  if (const double g = std::clamp(guess, lo, hi); f(g) < 0) a = g; else b = g;
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(f, a, b, tol, iters);
  return 0.5 * (root.first + root.second);
}

std::optional<double> tetrachoric(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("paired sequences differ in length");
  double c[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t k = 0; k < a.size(); ++k) c[a[k] != 0][b[k] != 0] += 1.0;
  return tetrachoric(c[0][0], c[0][1], c[1][0], c[1][1]);
}

CorrelationMatrices correlation_matrices(const std::vector<std::vector<int>>& columns) {
  const auto m = static_cast<Eigen::Index>(columns.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CorrelationMatrices out{Eigen::MatrixXd::Constant(m, m, nan), Eigen::MatrixXd::Constant(m, m, nan)};
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index l = j; l < m; ++l) {
      const auto& cj = columns[static_cast<std::size_t>(j)];
      const auto& cl = columns[static_cast<std::size_t>(l)];
      std::vector<int> a, b;
      for (std::size_t r = 0; r < std::min(cj.size(), cl.size()); ++r)
        if (cj[r] >= 0 && cl[r] >= 0) {
          a.push_back(cj[r]);
          b.push_back(cl[r]);
        }
      if (auto p = pearson(a, b)) out.pearson(j, l) = out.pearson(l, j) = *p;
      if (auto t = tetrachoric(a, b)) out.tetrachoric(j, l) = out.tetrachoric(l, j) = *t;
    }
  return out;
}

double wasserstein2_gaussian(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                             const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b) {
  if (mean_a.size() != mean_b.size() || cov_a.rows() != mean_a.size() || cov_b.rows() != mean_b.size())
    throw ValidationError("Wasserstein inputs differ in dimension");
  for (const auto* c : {&cov_a, &cov_b})
    if (Cholesky(*c).info() != Eigen::Success) throw NumericalError("wasserstein2_gaussian", "covariance not SPD");
  const Eigen::MatrixXd rb = sqrt_psd(cov_b);
  const Eigen::MatrixXd cross = sqrt_psd(rb * cov_a * rb);
  const double w2 = (mean_a - mean_b).squaredNorm() + (cov_a + cov_b - 2.0 * cross).trace();
  return std::sqrt(std::max(w2, 0.0));
}

EssResult effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 4) return {static_cast<double>(n), true};
  const double m = mean(chain);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += (chain[t] - m) * (chain[t + lag] - m);
    return acc / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 1e-300 * (1.0 + m * m))) return {0.0, true};
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (pair <= 0) break;
    pair = std::min(pair, previous);  // initial monotone sequence
    previous = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum / g0, 1e-12);
  return {static_cast<double>(n) / tau, false};
}

std::map<std::string, TraceSummary> chain_diagnostics(const PosteriorDraws& draws) {
  std::map<std::string, TraceSummary> out;
  const std::pair<const char*, const std::vector<double>*> traces[] = {
      {"noise_var", &draws.noise_var}, {"mu0", &draws.mu0}, {"sigma2", &draws.sigma2},
      {"rho", &draws.rho},             {"nu", &draws.nu}};
  for (const auto& [name, v] : traces) {
    if (v->empty()) continue;
    TraceSummary t;
    const auto sm = summarize(*v);
    t.mean = sm.mean;
    t.lower = sm.lower;
    t.upper = sm.upper;
    double ss = 0.0;
    for (double x : *v) ss += (x - t.mean) * (x - t.mean);
    t.sd = v->size() > 1 ? std::sqrt(ss / static_cast<double>(v->size() - 1)) : 0.0;
    t.ess = effective_sample_size(*v);
    out[name] = t;
  }
  return out;
}

double batch_means_se(std::span<const double> chain, int batches) {
  if (batches < 2) throw ValidationError("need at least two batches");
  const std::size_t size = chain.size() / static_cast<std::size_t>(batches);
  if (size < 1) throw ValidationError("chain too short for batch means");
  std::vector<double> means;
  for (int b = 0; b < batches; ++b)
    means.push_back(mean(chain.subspan(static_cast<std::size_t>(b) * size, size)));
  const double m = mean(means);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  return std::sqrt(ss / (batches - 1) / batches);
}

NoisePrior elicit_noise_prior(double range, double upsilon, double q) {
  if (!(range > 0)) throw ValidationError("error range must be > 0");
  if (!(upsilon > 0)) throw ValidationError("upsilon must be > 0");
  if (!(q > 0 && q < 1)) throw ValidationError("coverage q must lie in (0, 1)");
  const boost::math::students_t dist(upsilon);
  const double t = boost::math::quantile(dist, 1.0 - (1.0 - q) / 2.0);
  return {upsilon / 2.0, range * range * upsilon / (2.0 * t * t)};
}

double implied_coverage(double range, double upsilon, double b_eps) {
  if (!(range > 0) || !(upsilon > 0) || !(b_eps > 0)) throw ValidationError("invalid prior elicitation inputs");
  const double t = std::sqrt(range * range * upsilon / (2.0 * b_eps));
  const boost::math::students_t dist(upsilon);
  return 2.0 * boost::math::cdf(dist, t) - 1.0;
}

EnergyTest energy_two_sample_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int blocks, double alpha) {
  if (a.cols() != b.cols()) throw ValidationError("samples differ in dimension");
  if (blocks < 2) throw ValidationError("need at least two blocks");
  const Eigen::Index m = std::min(a.rows(), b.rows()) / blocks;
  if (m < 2) throw ValidationError("samples too small for the block count");
  std::vector<double> stats;
  for (int k = 0; k < blocks; ++k) {
    const auto x = a.middleRows(k * m, m);
    const auto y = b.middleRows(k * m, m);
    double xy = 0, xx = 0, yy = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        xy += (x.row(i) - y.row(j)).norm();
        if (j > i) {
          xx += (x.row(i) - x.row(j)).norm();
          yy += (y.row(i) - y.row(j)).norm();
        }
      }
    const double md = static_cast<double>(m);
    stats.push_back(2.0 * xy / (md * md) - 2.0 * xx / (md * (md - 1)) - 2.0 * yy / (md * (md - 1)));
  }
  EnergyTest out;
  out.statistic = mean(stats);
  double ss = 0.0;
  for (double s : stats) ss += (s - out.statistic) * (s - out.statistic);
  const double se = std::sqrt(ss / (blocks - 1) / blocks);
  out.t = se > 0 ? out.statistic / se : 0.0;
  const boost::math::students_t dist(blocks - 1);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.t));
  out.reject = out.p_value < alpha;
  return out;
}

}  // namespace longcat
