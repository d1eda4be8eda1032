#include "longcat/gibbs.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "longcat/error.hpp"
#include "longcat/linalg.hpp"
#include "longcat/random.hpp"

namespace longcat {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_expit(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

// Standard-df inverse-Wishart log density given precomputed pieces.
double invwishart_log_density(double df, int p, double logdet_scale, double logdet_sigma, double trace) {
  return 0.5 * df * logdet_scale - 0.5 * df * p * std::numbers::ln2 - log_multigamma(p, 0.5 * df) -
         0.5 * (df + p + 1.0) * logdet_sigma - 0.5 * trace;
}

}  // namespace

std::vector<double> griddy_points(double lo, double hi, int size) {
  if (size < 2) throw ValidationError("griddy grid needs at least 2 points");
  if (!(lo < hi)) throw ValidationError("griddy grid needs lo < hi");
  std::vector<double> g(static_cast<std::size_t>(size));
  const double h = (hi - lo) / size;
  for (int l = 0; l < size; ++l) g[static_cast<std::size_t>(l)] = lo + (l + 0.5) * h;
  return g;
}

std::vector<double> griddy_probabilities(const std::vector<double>& log_weights, const char* where) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) {
    if (std::isnan(w)) throw NumericalError(where, "degenerate griddy weights");
    top = std::max(top, w);
  }
  if (!std::isfinite(top)) throw NumericalError(where, "degenerate griddy weights");
  std::vector<double> p(log_weights.size());
  double total = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) total += p[l] = std::exp(log_weights[l] - top);
  for (double& v : p) v /= total;
  return p;
}

std::size_t sample_index(const std::vector<double>& probabilities, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t l = 0; l < probabilities.size(); ++l) {
    acc += probabilities[l];
    if (u < acc) return l;
  }
  // Rounding left u above the final partial sum.
  for (std::size_t l = probabilities.size(); l-- > 0;)
    if (probabilities[l] > 0) return l;
  return probabilities.size() - 1;
}

GibbsSampler::GibbsSampler(const BinaryDataset& data, PriorConfig priors, SamplerConfig config)
    : priors_(priors), config_(config) {
  priors_.validate();
  config_.validate();
  const auto& pooled = data.pooled();
  times_ = pooled.times;
  observed_ = pooled.observed;
  missing_ = pooled.missing;
  for (const auto& s : data.subjects()) {
    ids_.push_back(s.id);
    Eigen::VectorXd y(static_cast<Eigen::Index>(s.responses.size()));
    for (std::size_t t = 0; t < s.responses.size(); ++t) y(static_cast<Eigen::Index>(t)) = s.responses[t];
    y_.push_back(std::move(y));
  }
  const auto p = static_cast<Eigen::Index>(times_.size());
  distance_.resize(p, p);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) distance_(a, b) = std::fabs(times_[a] - times_[b]);

  rho_grid_ = griddy_points(priors_.a_rho, priors_.b_rho, config_.griddy_size);
  nu_grid_ = griddy_points(priors_.a_nu, priors_.b_nu, config_.griddy_size);
  for (double g : rho_grid_) {
    rho_corr_.push_back(correlation_matrix(g));
    rho_logdet_.push_back(log_det(cholesky(rho_corr_.back(), 1.0, kStepNames[7])));
  }
}

DrawsLayout GibbsSampler::layout() const { return {ids_, times_, observed_}; }

void GibbsSampler::set_responses(std::vector<Eigen::VectorXd> y) {
  if (y.size() != y_.size()) throw ValidationError("response replacement changes the subject count");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i].size() != y_[i].size()) throw ValidationError("response replacement changes a subject's length");
  y_ = std::move(y);
}

Eigen::MatrixXd GibbsSampler::correlation_matrix(double rho) const {
  return distance_.unaryExpr([rho](double d) { return matern52_correlation(d / rho); });
}

Eigen::MatrixXd GibbsSampler::scale_matrix(double sigma2, double rho) const {
  return sigma2 * correlation_matrix(rho);
}

double GibbsSampler::trace_with_precision(const Eigen::MatrixXd& a, const Eigen::MatrixXd& precision) const {
  return a.cwiseProduct(precision).sum();
}

ChainState GibbsSampler::init_state(Rng& rng) const {
  ChainState s;
  s.noise_var = priors_.a_eps > 1 ? priors_.b_eps / (priors_.a_eps - 1.0) : priors_.b_eps / (priors_.a_eps + 1.0);
  s.sigma2 = priors_.a_sigma / priors_.b_sigma;
  s.rho = 0.5 * (priors_.a_rho + priors_.b_rho);
  s.nu = 0.5 * (priors_.a_nu + priors_.b_nu);
  s.cov = scale_matrix(s.sigma2, s.rho) / (s.nu - 2.0);
  const auto p = static_cast<Eigen::Index>(grid_size());
  // Mean starts at the logit of the smoothed pooled response frequency.
  Eigen::VectorXd ones = Eigen::VectorXd::Zero(p), counts = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < subjects(); ++i)
    for (Eigen::Index t = 0; t < y_[i].size(); ++t) {
      ones(observed_[i][static_cast<std::size_t>(t)]) += y_[i](t);
      counts(observed_[i][static_cast<std::size_t>(t)]) += 1.0;
    }
  s.mean = ((ones.array() + 0.5) / (counts.array() - ones.array() + 0.5)).log().matrix();
  s.mu0 = s.mean.mean();
  for (std::size_t i = 0; i < subjects(); ++i) {
    s.signal.push_back(s.mean);
    s.latent.push_back(subvector(s.mean, observed_[i]));
    Eigen::VectorXd xi(y_[i].size());
    for (Eigen::Index t = 0; t < xi.size(); ++t) xi(t) = sample_pg1(0.0, rng);
    s.pg.push_back(std::move(xi));
  }
  return s;
}

void GibbsSampler::step1_update_latent_noisy(ChainState& s, Rng& rng) const {
  const double inv_noise = 1.0 / s.noise_var;
  for (std::size_t i = 0; i < subjects(); ++i) {
    const auto& obs = observed_[i];
    for (Eigen::Index t = 0; t < y_[i].size(); ++t) {
      const double v = 1.0 / (s.pg[i](t) + inv_noise);
      const double m = v * (y_[i](t) - 0.5 + inv_noise * s.signal[i](obs[static_cast<std::size_t>(t)]));
      s.latent[i](t) = m + std::sqrt(v) * rng.normal();
    }
  }
}

void GibbsSampler::step2_update_pg(ChainState& s, Rng& rng) const {
  for (std::size_t i = 0; i < subjects(); ++i)
    for (Eigen::Index t = 0; t < s.latent[i].size(); ++t) s.pg[i](t) = sample_pg1(s.latent[i](t), rng);
}

void GibbsSampler::step3_update_noise_var(ChainState& s, Rng& rng) const {
  double count = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < subjects(); ++i) {
    const auto& obs = observed_[i];
    for (Eigen::Index t = 0; t < s.latent[i].size(); ++t) {
      const double r = s.latent[i](t) - s.signal[i](obs[static_cast<std::size_t>(t)]);
      ss += r * r;
    }
    count += static_cast<double>(s.latent[i].size());
  }
  s.noise_var = sample_invgamma(priors_.a_eps + 0.5 * count, priors_.b_eps + 0.5 * ss, rng);
}

GaussianMoments GibbsSampler::missing_conditional(const ChainState& s, std::size_t i) const {
  const auto& obs = observed_[i];
  const auto& miss = missing_[i];
  const auto llt = cholesky(submatrix(s.cov, obs, obs), 0.0, kStepNames[3]);
  const Eigen::MatrixXd cross = submatrix(s.cov, miss, obs);
  const Eigen::VectorXd resid = subvector(s.signal[i], obs) - subvector(s.mean, obs);
  GaussianMoments out;
  out.mean = subvector(s.mean, miss) + cross * llt.solve(resid);
  out.cov = symmetrize(submatrix(s.cov, miss, miss) - cross * llt.solve(cross.transpose()));
  return out;
}

GaussianMoments GibbsSampler::observed_conditional(const ChainState& s, std::size_t i) const {
  const auto& obs = observed_[i];
  const auto& miss = missing_[i];
  const Eigen::MatrixXd precision = inverse(cholesky(s.cov, 0.0, kStepNames[3]));
  const double inv_noise = 1.0 / s.noise_var;
  Eigen::MatrixXd q = submatrix(precision, obs, obs);
  Eigen::VectorXd b = q * subvector(s.mean, obs) + inv_noise * s.latent[i];
  if (!miss.empty())
    b -= submatrix(precision, obs, miss) * (subvector(s.signal[i], miss) - subvector(s.mean, miss));
  q.diagonal().array() += inv_noise;
  const auto llt = cholesky(q, 0.0, kStepNames[3]);
  return {llt.solve(b), inverse(llt)};
}

void GibbsSampler::step4_update_signals(ChainState& s, Rng& rng) const {
  const Eigen::MatrixXd precision = inverse(cholesky(s.cov, 0.0, kStepNames[3]));
  const double inv_noise = 1.0 / s.noise_var;
  for (std::size_t i = 0; i < subjects(); ++i) {
    const auto& obs = observed_[i];
    const auto& miss = missing_[i];
    Eigen::VectorXd& z = s.signal[i];
    if (miss.empty()) {
      Eigen::MatrixXd q = precision;
      q.diagonal().array() += inv_noise;
      const auto llt = cholesky(q, 0.0, kStepNames[3]);
      const Eigen::VectorXd b = precision * s.mean + inv_noise * s.latent[i];
      z = sample_mvn_precision(llt.solve(b), llt, rng);
      continue;
    }
    // Unobserved block from its conditional given the observed block, in
    // precision form: mean mu_m - P_mm^{-1} P_mo (z_o - mu_o), cov P_mm^{-1}.
    const Eigen::VectorXd resid_o = subvector(z, obs) - subvector(s.mean, obs);
    const auto llt_m = cholesky(submatrix(precision, miss, miss), 0.0, kStepNames[3]);
    const Eigen::VectorXd mean_m =
        subvector(s.mean, miss) - llt_m.solve(submatrix(precision, miss, obs) * resid_o);
    const Eigen::VectorXd z_m = sample_mvn_precision(mean_m, llt_m, rng);
    for (std::size_t k = 0; k < miss.size(); ++k) z(miss[k]) = z_m(static_cast<Eigen::Index>(k));

    // Observed block given the unobserved block and the noisy latents.
    Eigen::MatrixXd q = submatrix(precision, obs, obs);
    Eigen::VectorXd b = q * subvector(s.mean, obs) + inv_noise * s.latent[i] -
                        submatrix(precision, obs, miss) * (z_m - subvector(s.mean, miss));
    q.diagonal().array() += inv_noise;
    const auto llt_o = cholesky(q, 0.0, kStepNames[3]);
    const Eigen::VectorXd z_o = sample_mvn_precision(llt_o.solve(b), llt_o, rng);
    for (std::size_t k = 0; k < obs.size(); ++k) z(obs[k]) = z_o(static_cast<Eigen::Index>(k));
  }
}

void GibbsSampler::step5_update_niw(ChainState& s, Rng& rng) const {
  const auto p = static_cast<Eigen::Index>(grid_size());
  const double n = static_cast<double>(subjects());
  const Eigen::MatrixXd psi = scale_matrix(s.sigma2, s.rho);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p);

  if (config_.mean_structure == MeanStructure::Constant) {
    Eigen::MatrixXd post = psi;
    for (const auto& z : s.signal) {
      const Eigen::VectorXd r = z - s.mu0 * ones;
      post.noalias() += r * r.transpose();
    }
    s.cov = sample_invwishart(n + s.nu + p - 1.0, cholesky(symmetrize(post), 0.0, kStepNames[4]), rng);
    s.mean = s.mu0 * ones;
    return;
  }

  const double kappa = s.kappa();
  Eigen::VectorXd zbar = Eigen::VectorXd::Zero(p);
  for (const auto& z : s.signal) zbar += z;
  zbar /= n;
  Eigen::MatrixXd post = psi;
  for (const auto& z : s.signal) {
    const Eigen::VectorXd r = z - zbar;
    post.noalias() += r * r.transpose();
  }
  const Eigen::VectorXd shift = zbar - s.mu0 * ones;
  post.noalias() += (n * kappa / (n + kappa)) * shift * shift.transpose();
  s.cov = sample_invwishart(n + s.nu + p - 1.0, cholesky(symmetrize(post), 0.0, kStepNames[4]), rng);
  const Eigen::VectorXd centre = (kappa * s.mu0 * ones + n * zbar) / (kappa + n);
  s.mean = sample_mvn(centre, cholesky(s.cov / (n + kappa), 0.0, kStepNames[4]), rng);
}

void GibbsSampler::step6_update_mu0(ChainState& s, Rng& rng) const {
  const auto p = static_cast<Eigen::Index>(grid_size());
  const auto llt = cholesky(s.cov, 0.0, kStepNames[5]);
  const Eigen::VectorXd w = llt.solve(Eigen::VectorXd::Ones(p));  // Sigma^{-1} 1
  double precision = 1.0 / priors_.b_mu;
  double linear = priors_.a_mu / priors_.b_mu;
  if (config_.mean_structure == MeanStructure::Constant) {
    const double n = static_cast<double>(subjects());
    Eigen::VectorXd total = Eigen::VectorXd::Zero(p);
    for (const auto& z : s.signal) total += z;
    precision += n * w.sum();
    linear += w.dot(total);
  } else {
    const double scale = s.nu - 3.0;
    precision += w.sum() / scale;
    linear += w.dot(s.mean) / scale;
  }
  const double var = 1.0 / precision;
  s.mu0 = var * linear + std::sqrt(var) * rng.normal();
  if (config_.mean_structure == MeanStructure::Constant) s.mean = Eigen::VectorXd::Constant(p, s.mu0);
}

void GibbsSampler::step7_update_sigma2(ChainState& s, Rng& rng) const {
  const double p = static_cast<double>(grid_size());
  const double m = s.nu + p - 1.0;
  const Eigen::MatrixXd precision = inverse(cholesky(s.cov, 0.0, kStepNames[6]));
  const double trace = trace_with_precision(correlation_matrix(s.rho), precision);
  s.sigma2 = sample_gamma(priors_.a_sigma + 0.5 * m * p, priors_.b_sigma + 0.5 * trace, rng);
}

std::vector<double> GibbsSampler::rho_log_weights(const ChainState& s) const {
  const double p = static_cast<double>(grid_size());
  const double m = s.nu + p - 1.0;
  const Eigen::MatrixXd precision = inverse(cholesky(s.cov, 0.0, kStepNames[7]));
  const double log_sigma2 = std::log(s.sigma2);
  std::vector<double> w(rho_grid_.size());
  for (std::size_t l = 0; l < w.size(); ++l) {
    const double logdet = p * log_sigma2 + rho_logdet_[l];
    w[l] = 0.5 * m * logdet - 0.5 * s.sigma2 * trace_with_precision(rho_corr_[l], precision);
  }
  return w;
}

void GibbsSampler::step8_update_rho_griddy(ChainState& s, Rng& rng) const {
  const auto prob = griddy_probabilities(rho_log_weights(s), kStepNames[7]);
  s.rho = rho_grid_[sample_index(prob, rng)];
}

std::vector<double> GibbsSampler::nu_log_weights(const ChainState& s) const {
  const int p = static_cast<int>(grid_size());
  const auto llt = cholesky(s.cov, 0.0, kStepNames[8]);
  const double logdet_sigma = log_det(llt);
  const Eigen::MatrixXd psi = scale_matrix(s.sigma2, s.rho);
  const double logdet_psi = log_det(cholesky(psi, 0.0, kStepNames[8]));
  const double trace = trace_with_precision(psi, inverse(llt));
  const bool hierarchical = config_.mean_structure == MeanStructure::Hierarchical;
  double quad = 0.0;
  if (hierarchical) {
    const Eigen::VectorXd r = s.mean - Eigen::VectorXd::Constant(p, s.mu0);
    quad = r.dot(llt.solve(r));
  }
  std::vector<double> w(nu_grid_.size());
  for (std::size_t l = 0; l < w.size(); ++l) {
    const double g = nu_grid_[l];
    double lw = invwishart_log_density(g + p - 1.0, p, logdet_psi, logdet_sigma, trace);
    if (hierarchical)
      lw += -0.5 * p * (kLog2Pi + std::log(g - 3.0)) - 0.5 * logdet_sigma - 0.5 * quad / (g - 3.0);
    w[l] = lw;
  }
  return w;
}

void GibbsSampler::step9_update_nu_griddy(ChainState& s, Rng& rng) const {
  const auto prob = griddy_probabilities(nu_log_weights(s), kStepNames[8]);
  s.nu = nu_grid_[sample_index(prob, rng)];
}

void GibbsSampler::iterate(ChainState& s, Rng& rng, std::array<double, 9>* seconds) const {
  using Step = void (GibbsSampler::*)(ChainState&, Rng&) const;
  static constexpr std::array<Step, 9> steps = {
      &GibbsSampler::step1_update_latent_noisy, &GibbsSampler::step2_update_pg,
      &GibbsSampler::step3_update_noise_var,    &GibbsSampler::step4_update_signals,
      &GibbsSampler::step5_update_niw,          &GibbsSampler::step6_update_mu0,
      &GibbsSampler::step7_update_sigma2,       &GibbsSampler::step8_update_rho_griddy,
      &GibbsSampler::step9_update_nu_griddy};
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    (this->*steps[k])(s, rng);
    if (seconds)
      (*seconds)[k] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
}

double GibbsSampler::log_joint(const ChainState& s) const {
  const int p = static_cast<int>(grid_size());
  double out = 0.0;
  for (std::size_t i = 0; i < subjects(); ++i) {
    const auto& obs = observed_[i];
    for (Eigen::Index t = 0; t < y_[i].size(); ++t) {
      const double l = s.latent[i](t);
      out += y_[i](t) > 0.5 ? log_expit(l) : log_expit(-l);
      out += normal_logpdf(l, s.signal[i](obs[static_cast<std::size_t>(t)]), s.noise_var);
    }
  }
  const auto llt = cholesky(s.cov, 0.0, "log_joint");
  const double logdet_sigma = log_det(llt);
  for (const auto& z : s.signal) {
    const Eigen::VectorXd r = z - s.mean;
    out += -0.5 * (p * kLog2Pi + logdet_sigma + r.dot(llt.solve(r)));
  }
  if (config_.mean_structure == MeanStructure::Hierarchical) {
    const Eigen::VectorXd r = s.mean - Eigen::VectorXd::Constant(p, s.mu0);
    const double c = s.nu - 3.0;
    out += -0.5 * (p * (kLog2Pi + std::log(c)) + logdet_sigma + r.dot(llt.solve(r)) / c);
  }
  const Eigen::MatrixXd psi = scale_matrix(s.sigma2, s.rho);
  out += invwishart_log_density(s.nu + p - 1.0, p, log_det(cholesky(psi, 0.0, "log_joint")), logdet_sigma,
                                trace_with_precision(psi, inverse(llt)));
  out += normal_logpdf(s.mu0, priors_.a_mu, priors_.b_mu);
  out += priors_.a_sigma * std::log(priors_.b_sigma) - std::lgamma(priors_.a_sigma) +
         (priors_.a_sigma - 1.0) * std::log(s.sigma2) - priors_.b_sigma * s.sigma2;
  out += priors_.a_eps * std::log(priors_.b_eps) - std::lgamma(priors_.a_eps) -
         (priors_.a_eps + 1.0) * std::log(s.noise_var) - priors_.b_eps / s.noise_var;
  const bool in_support = s.rho > priors_.a_rho && s.rho < priors_.b_rho && s.nu > priors_.a_nu && s.nu < priors_.b_nu;
  if (!in_support) return -std::numeric_limits<double>::infinity();
  out -= std::log(priors_.b_rho - priors_.a_rho) + std::log(priors_.b_nu - priors_.a_nu);
  return out;
}

PosteriorDraws GibbsSampler::run(const std::function<void(int, const ChainState&)>& on_iteration) const {
  Rng rng(config_.seed);
  ChainState s = init_state(rng);

  PosteriorDraws d;
  d.layout = layout();
  d.priors = priors_;
  d.meta.seed = config_.seed;
  d.meta.burn_in = config_.burn_in;
  d.meta.thinning = config_.thinning;
  d.meta.total_iterations = config_.total_iterations;
  d.meta.griddy_size = config_.griddy_size;
  d.meta.store_latents = config_.store_latents;
  d.meta.mean_structure = config_.mean_structure;

  const int keep = config_.retained();
  const auto n = static_cast<Eigen::Index>(subjects());
  const auto p = static_cast<Eigen::Index>(grid_size());
  d.mean.resize(keep, p);
  d.signal.reserve(static_cast<std::size_t>(keep));
  for (auto* v : {&d.noise_var, &d.mu0, &d.sigma2, &d.rho, &d.nu}) v->reserve(static_cast<std::size_t>(keep));

  int stored = 0;
  for (int it = 1; it <= config_.total_iterations; ++it) {
    iterate(s, rng, &d.meta.step_seconds);
    if (on_iteration) on_iteration(it, s);
    if (it <= config_.burn_in || (it - config_.burn_in) % config_.thinning != 0 || stored >= keep) continue;
    d.noise_var.push_back(s.noise_var);
    d.mu0.push_back(s.mu0);
    d.sigma2.push_back(s.sigma2);
    d.rho.push_back(s.rho);
    d.nu.push_back(s.nu);
    d.mean.row(stored) = s.mean.transpose();
    Eigen::MatrixXd z(n, p);
    for (Eigen::Index i = 0; i < n; ++i) z.row(i) = s.signal[static_cast<std::size_t>(i)].transpose();
    d.signal.push_back(std::move(z));
    if (config_.store_latents) {
      d.cov.push_back(s.cov);
      Eigen::Index total = 0;
      for (const auto& l : s.latent) total += l.size();
      Eigen::VectorXd lat(total), xi(total);
      Eigen::Index k = 0;
      for (std::size_t i = 0; i < s.latent.size(); ++i) {
        lat.segment(k, s.latent[i].size()) = s.latent[i];
        xi.segment(k, s.pg[i].size()) = s.pg[i];
        k += s.latent[i].size();
      }
      d.latent.push_back(std::move(lat));
      d.pg.push_back(std::move(xi));
    }
    ++stored;
  }
  return d;
}

PosteriorDraws run_chain(const BinaryDataset& data, const PriorConfig& priors, const SamplerConfig& config) {
  return GibbsSampler(data, priors, config).run();
}

}  // namespace longcat
