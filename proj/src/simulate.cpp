#include "longcat/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "longcat/error.hpp"
#include "longcat/linalg.hpp"
#include "longcat/random.hpp"
#include "longcat/rng.hpp"

namespace longcat {

double KernelSpec::operator()(double d) const {
  if (d < 0) throw std::invalid_argument("kernel distance must be >= 0");
  switch (kind) {
    case KernelKind::SquaredExponential:
      return variance * std::exp(-d * d / (2.0 * length * length));
    case KernelKind::Exponential:
      return variance * std::exp(-d / length);
    case KernelKind::CompoundSymmetry:
      return variance * (d == 0.0 ? 1.0 : correlation);
    case KernelKind::Mixture:
      return variance * (weight * std::exp(-d / length) + (1.0 - weight) * (d == 0.0 ? 1.0 : correlation));
  }
  return 0.0;
}

void KernelSpec::validate() const {
  if (!(variance > 0)) throw ValidationError("kernel variance must be > 0");
  if ((kind != KernelKind::CompoundSymmetry) && !(length > 0)) throw ValidationError("kernel length must be > 0");
  if (!(correlation >= 0 && correlation < 1)) throw ValidationError("kernel correlation must lie in [0, 1)");
  if (!(weight >= 0 && weight <= 1)) throw ValidationError("kernel weight must lie in [0, 1]");
}

double SignalSpec::operator()(double t) const {
  return offset + sin_amp * std::sin(sin_freq * t) + cos_amp * std::cos(cos_freq * t);
}

void SimScenario::validate() const {
  if (components.empty()) throw ValidationError("scenario needs at least one component");
  for (const auto& c : components) {
    c.kernel.validate();
    if (c.student_t && !(c.df > 2)) throw ValidationError("Student-t process needs df > 2");
  }
  if (!(noise_var >= 0)) throw ValidationError("noise_var must be >= 0");
  if (subjects < 1) throw ValidationError("scenario needs n >= 1");
  if (grid.points < 1) throw ValidationError("grid needs at least one point");
  if (grid.kind == GridKind::UniformRandom && !(grid.lo < grid.hi)) throw ValidationError("grid needs lo < hi");
  if (!(sparsity >= 0 && sparsity < 1)) throw ValidationError("sparsity must lie in [0, 1)");
}

namespace {

ScenarioComponent trend_component(int case_id) {
  ScenarioComponent c;
  if (case_id == 1) {
    c.link = Link::Expit;
    c.signal = {0.3, 3.0, 0.5, 1.0, 1.0 / 3.0};
    c.kernel = {KernelKind::SquaredExponential, 1.0, std::sqrt(0.5), 0.0, 1.0};
  } else {
    c.link = Link::Probit;
    c.signal = {0.1, 2.0, 0.25, 1.0, 0.25};
    c.kernel = {KernelKind::SquaredExponential, 1.0 / 3.0, std::sqrt(0.5), 0.0, 1.0};
    c.student_t = true;
    c.df = 5.0;
  }
  return c;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

SimScenario trend_scenario(int case_id, double sparsity, std::uint64_t seed) {
  if (case_id < 1 || case_id > 3) throw ValidationError("trend scenario case must be 1, 2 or 3");
  SimScenario s;
  if (case_id == 3)
    s.components = {trend_component(1), trend_component(2)};
  else
    s.components = {trend_component(case_id)};
  s.subjects = 30;
  s.grid = {GridKind::Regular, 31, 0.0, 30.0};
  s.sparsity = sparsity;
  s.seed = seed;
  return s;
}

SimScenario kernel_scenario(int case_id, std::uint64_t seed) {
  ScenarioComponent c;
  c.link = Link::Expit;
  c.signal = {0.1, 2.0, 0.5, 1.0, 0.5};
  switch (case_id) {
    case 1: c.kernel = {KernelKind::SquaredExponential, 1.0, 3.0, 0.0, 1.0}; break;
    case 2: c.kernel = {KernelKind::Exponential, 1.0, 5.0, 0.0, 1.0}; break;
    case 3: c.kernel = {KernelKind::CompoundSymmetry, 1.0, 1.0, 0.4, 1.0}; break;
    case 4: c.kernel = {KernelKind::Mixture, 1.0, 5.0, 0.4, 0.7}; break;
    default: throw ValidationError("kernel scenario case must be 1..4");
  }
  c.student_t = case_id >= 3;
  c.df = 5.0;
  SimScenario s;
  s.components = {c};
  s.subjects = 100;
  s.grid = {GridKind::Regular, 11, 0.0, 10.0};
  s.seed = seed;
  return s;
}

SimScenario irregular_scenario(std::uint64_t seed) {
  SimScenario s = trend_scenario(1, 0.3, seed);
  s.subjects = 50;
  s.grid = {GridKind::UniformRandom, 30, 0.0, 30.0};
  return s;
}

double builtin_kernel(int case_id, double d) {
  if (case_id < 1 || case_id > 4) throw std::invalid_argument("unknown kernel case " + std::to_string(case_id));
  return kernel_scenario(case_id, 0).components.front().kernel(d);
}

double link_function(Link link, double x) {
  if (link == Link::Probit) return normal_cdf(x);
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double smoothed_link(Link link, double x, double noise_var) {
  if (!(noise_var > 0)) return link_function(link, x);
  if (link == Link::Probit) return normal_cdf(x / std::sqrt(1.0 + noise_var));
  const double sd = std::sqrt(noise_var);
  auto integrand = [&](double e) {
    return std::exp(-0.5 * e * e) / std::sqrt(2.0 * std::numbers::pi) * link_function(link, x + sd * e);
  };
  const double inf = std::numeric_limits<double>::infinity();
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -inf, inf, 15, 1e-12);
}

SimResult generate(const SimScenario& scenario) {
  scenario.validate();
  Rng rng(scenario.seed);

  std::vector<double> grid(static_cast<std::size_t>(scenario.grid.points));
  if (scenario.grid.kind == GridKind::Regular) {
    for (std::size_t t = 0; t < grid.size(); ++t) grid[t] = static_cast<double>(t);
  } else {
    for (bool clash = true; clash;) {
      for (double& t : grid) t = rng.uniform(scenario.grid.lo, scenario.grid.hi);
      std::sort(grid.begin(), grid.end());
      clash = false;
      for (std::size_t t = 1; t < grid.size(); ++t) clash = clash || grid[t] - grid[t - 1] < 1e-9;
    }
  }

  const auto n = static_cast<Eigen::Index>(scenario.subjects);
  const auto nt = static_cast<Eigen::Index>(grid.size());
  std::vector<Eigen::MatrixXd> kernels;
  std::vector<Cholesky> factors;
  for (const auto& c : scenario.components) {
    Eigen::MatrixXd k(nt, nt);
    for (Eigen::Index a = 0; a < nt; ++a)
      for (Eigen::Index b = 0; b < nt; ++b) k(a, b) = c.kernel(std::fabs(grid[a] - grid[b]));
    factors.push_back(cholesky(k, 0.0, "generate"));
    kernels.push_back(std::move(k));
  }

  Eigen::MatrixXd signal(n, nt), latent(n, nt), prob(n, nt), curve(n, nt);
  Eigen::MatrixXi y(n, nt);
  std::vector<int> component(static_cast<std::size_t>(n));
  const double sd = std::sqrt(scenario.noise_var);
  const auto ncomp = scenario.components.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = ncomp == 1 ? 0 : static_cast<int>(rng.index(ncomp));
    component[static_cast<std::size_t>(i)] = c;
    const auto& comp = scenario.components[static_cast<std::size_t>(c)];
    Eigen::VectorXd omega = sample_mvn(Eigen::VectorXd::Zero(nt), factors[static_cast<std::size_t>(c)], rng);
    if (comp.student_t) omega *= std::sqrt((comp.df - 2.0) / rng.chi_square(comp.df));
    for (Eigen::Index t = 0; t < nt; ++t) {
      signal(i, t) = comp.signal(grid[t]);
      latent(i, t) = signal(i, t) + omega(t);
      prob(i, t) = link_function(comp.link, latent(i, t) + sd * rng.normal());
      curve(i, t) = smoothed_link(comp.link, latent(i, t), scenario.noise_var);
      y(i, t) = rng.uniform() < prob(i, t) ? 1 : 0;
    }
  }

  // Exact-count dropout; a removal that would empty a subject is skipped.
  Eigen::MatrixXi kept = Eigen::MatrixXi::Ones(n, nt);
  const auto total = static_cast<std::size_t>(n * nt);
  auto target = static_cast<std::size_t>(std::floor(scenario.sparsity * static_cast<double>(total) + 1e-9));
  std::vector<std::size_t> order(total);
  for (std::size_t k = 0; k < total; ++k) order[k] = k;
  for (std::size_t k = total; k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
  std::vector<Eigen::Index> remaining(static_cast<std::size_t>(n), nt);
  std::size_t removed = 0;
  for (std::size_t k = 0; k < total && removed < target; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k] / static_cast<std::size_t>(nt));
    const auto t = static_cast<Eigen::Index>(order[k] % static_cast<std::size_t>(nt));
    if (remaining[static_cast<std::size_t>(i)] <= 1) continue;
    kept(i, t) = 0;
    --remaining[static_cast<std::size_t>(i)];
    ++removed;
  }

  std::vector<SubjectRecord> records;
  for (Eigen::Index i = 0; i < n; ++i) {
    SubjectRecord r{"s" + std::to_string(i + 1), {}, {}};
    for (Eigen::Index t = 0; t < nt; ++t)
      if (kept(i, t)) {
        r.times.push_back(grid[static_cast<std::size_t>(t)]);
        r.responses.push_back(y(i, t));
      }
    records.push_back(std::move(r));
  }
  return SimResult{BinaryDataset::from_records(records), grid, component, signal, latent, prob, curve, kept,
                   kernels.front()};
}

}  // namespace longcat
