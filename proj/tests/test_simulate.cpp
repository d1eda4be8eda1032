#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "longcat/error.hpp"
#include "longcat/simulate.hpp"
#include "oracles.hpp"

using namespace longcat;

TEST_CASE("built-in kernels") {
  CHECK(builtin_kernel(3, 2.0) == doctest::Approx(0.4));
  CHECK(builtin_kernel(3, 0.0) == 1.0);
  CHECK(builtin_kernel(4, 0.0) == doctest::Approx(1.0));
  CHECK(builtin_kernel(4, 5.0) == doctest::Approx(0.7 * std::exp(-1.0) + 0.3 * 0.4));
  CHECK(builtin_kernel(1, 3.0) == doctest::Approx(std::exp(-0.5)));
  CHECK(builtin_kernel(2, 5.0) == doctest::Approx(std::exp(-1.0)));
  CHECK_THROWS_AS(builtin_kernel(5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(builtin_kernel(1, -1.0), std::invalid_argument);
}

TEST_CASE("smoothed links against quadrature") {
  boost::math::normal n01;
  auto probit = [&](double x) { return boost::math::cdf(n01, x); };
  for (double x : {-2.0, -0.3, 0.0, 1.1}) {
    CHECK(smoothed_link(Link::Probit, x, 0.0) == doctest::Approx(probit(x)));
    CHECK(smoothed_link(Link::Probit, x, 0.6) == doctest::Approx(oracle::normal_expectation(probit, x, 0.6)));
    CHECK(smoothed_link(Link::Expit, x, 0.25) ==
          doctest::Approx(oracle::normal_expectation(oracle::expit, x, 0.25)).epsilon(1e-9));
  }
  CHECK(smoothed_link(Link::Expit, 0.0, 3.0) == doctest::Approx(0.5));
}

TEST_CASE("trend case 1 with 10 percent dropout") {
  const auto r = generate(trend_scenario(1, 0.1, 17));
  CHECK(r.data.size() == 30);
  CHECK(r.grid.size() == 31);
  CHECK(r.data.observation_count() == 930 - 93);
  CHECK(r.kept.sum() == 837);
  for (Eigen::Index t = 0; t < 31; ++t) {
    const double tt = static_cast<double>(t);
    CHECK(r.signal(0, t) == doctest::Approx(0.3 + 3.0 * std::sin(0.5 * tt) + std::cos(tt / 3.0)));
    CHECK(r.curve(4, t) == doctest::Approx(smoothed_link(Link::Expit, r.latent(4, t), 0.25)));
  }
  CHECK(r.data.subjects()[0].id == "s1");
  CHECK(r.kernel(0, 1) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("no dropout gives a balanced panel") {
  const auto r = generate(trend_scenario(2, 0.0, 3));
  CHECK(r.data.pooled().common());
  for (const auto& s : r.data.subjects()) CHECK(s.grid.size() == 31);
  CHECK(r.kernel(0, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("Student-t process has the kernel as covariance") {
  SimScenario s = kernel_scenario(3, 5);
  s.subjects = 20000;
  s.grid.points = 3;
  const auto r = generate(s);
  const Eigen::MatrixXd omega = r.latent - r.signal;
  const Eigen::MatrixXd c = omega.transpose() * omega / static_cast<double>(s.subjects);
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(0.08));
  CHECK(c(0, 2) == doctest::Approx(0.4).epsilon(0.1));
  // Heavier tails than a Gaussian with the same variance.
  const Eigen::ArrayXd x = omega.col(1).array();
  const double kurt = (x.pow(4)).mean() / std::pow((x * x).mean(), 2);
  CHECK(kurt > 3.5);
}

TEST_CASE("mixture scenario draws both components") {
  const auto r = generate(trend_scenario(3, 0.0, 9));
  int first = 0;
  for (int c : r.component) first += c == 0;
  CHECK(first > 0);
  CHECK(first < 30);
  for (std::size_t i = 0; i < r.component.size(); ++i) {
    const double f0 = r.component[i] == 0 ? 0.3 + 1.0 : 0.1 + 1.0;
    CHECK(r.signal(static_cast<Eigen::Index>(i), 0) == doctest::Approx(f0));
  }
}

TEST_CASE("irregular grid") {
  const auto r = generate(irregular_scenario(21));
  REQUIRE(r.grid.size() == 30);
  for (std::size_t t = 0; t < r.grid.size(); ++t) {
    CHECK(r.grid[t] > 0.0);
    CHECK(r.grid[t] < 30.0);
    if (t > 0) CHECK(r.grid[t] > r.grid[t - 1]);
  }
  CHECK(r.data.observation_count() == 1500 - 450);
}

TEST_CASE("dropout never empties a subject") {
  SimScenario s = kernel_scenario(1, 2);
  s.subjects = 5;
  s.grid.points = 2;
  s.sparsity = 0.9;
  const auto r = generate(s);
  for (const auto& sub : r.data.subjects()) CHECK(sub.grid.size() >= 1);
  CHECK(r.data.observation_count() == 5);
}

TEST_CASE("generation is deterministic under the seed") {
  const auto a = generate(kernel_scenario(4, 8));
  const auto b = generate(kernel_scenario(4, 8));
  const auto c = generate(kernel_scenario(4, 9));
  CHECK(a.latent == b.latent);
  CHECK(a.kept == b.kept);
  CHECK(a.data.to_records()[7].responses == b.data.to_records()[7].responses);
  CHECK(a.latent != c.latent);
}

TEST_CASE("responses track the true probabilities") {
  SimScenario s = kernel_scenario(2, 4);
  s.subjects = 2000;
  const auto r = generate(s);
  double ys = 0, ps = 0;
  for (const auto& sub : r.data.subjects())
    for (int y : sub.responses) ys += y;
  ps = r.probability.sum();
  const double n = static_cast<double>(r.probability.size());
  CHECK(std::fabs(ys / n - ps / n) < 4.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("scenario validation") {
  SimScenario s = trend_scenario(1, 0.0, 1);
  s.sparsity = 1.0;
  CHECK_THROWS_AS(generate(s), ValidationError);
  s = trend_scenario(1, 0.0, 1);
  s.subjects = 0;
  CHECK_THROWS_AS(generate(s), ValidationError);
  CHECK_THROWS_AS(trend_scenario(4, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(kernel_scenario(0, 1), ValidationError);
}
