#include "doctest.h"

#include <cmath>

#include "longcat/error.hpp"
#include "longcat/kernels.hpp"
#include "longcat/predict.hpp"
#include "longcat/random.hpp"
#include "oracles.hpp"

using namespace longcat;

TEST_CASE("fine grid merges requested times with the pooled grid") {
  const std::vector<double> pooled{0.0, 1.0, 2.0};
  const std::vector<double> req{0.5, 1.0 + 1e-12, 2.5};
  const auto g = FineGrid::build(pooled, req);
  CHECK(g.times == std::vector<double>{0.0, 0.5, 1.0, 2.0, 2.5});
  CHECK(g.pooled_index == std::vector<int>{0, -1, 1, 2, -1});
  CHECK(g.pooled_positions == std::vector<int>{0, 2, 3});
  CHECK(g.new_positions == std::vector<int>{1, 4});
  CHECK(FineGrid::build(pooled, {}).new_positions.empty());
}

TEST_CASE("grid spec parsing") {
  const auto a = parse_grid_spec("0:1:1/4");
  REQUIRE(a.size() == 5);
  CHECK(a[3] == 0.75);
  CHECK(parse_grid_spec("0:2:0.5").size() == 5);
  CHECK(parse_grid_spec("3,1,2") == std::vector<double>{1, 2, 3});
  CHECK(parse_grid_spec("0:1:1/3").back() == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse_grid_spec("0:1"), ValidationError);
  CHECK_THROWS_AS(parse_grid_spec("0:1:0"), ValidationError);
  CHECK_THROWS_AS(parse_grid_spec("1:0:1"), ValidationError);
  CHECK_THROWS_AS(parse_grid_spec("a,b"), ValidationError);
}

TEST_CASE("extension with no off-grid points copies the pooled signal") {
  const std::vector<double> pooled{0, 1, 2};
  const auto fine = FineGrid::build(pooled, std::vector<double>{1.0});
  Eigen::VectorXd z(3);
  z << 0.3, -1.0, 2.0;
  Rng rng(1);
  CHECK(extend_signal_to_fine_grid(z, pooled, DrawParams{}, fine, rng) == z);
}

TEST_CASE("extension samples the Student-t process conditional") {
  const std::vector<double> pooled{0, 1, 3};
  const auto fine = FineGrid::build(pooled, std::vector<double>{2.0});
  Eigen::VectorXd z(3);
  z << 0.5, 1.5, -0.2;
  DrawParams dp{0.1, 0.2, 1.3, 2.0, 7.0};

  // Reference conditional from Gaussian algebra plus the t scaling.
  const std::vector<double> all{2.0, 0, 1, 3};
  const Eigen::MatrixXd k = covariance_matrix(std::span<const double>(all), MaternParams{dp.sigma2, dp.rho});
  const Eigen::MatrixXd kbb = k.bottomRightCorner(3, 3);
  const Eigen::RowVectorXd kab = k.topRightCorner(1, 3);
  const Eigen::VectorXd r = z - Eigen::VectorXd::Constant(3, dp.mu0);
  const double s = r.dot(kbb.inverse() * r);
  const double m = dp.mu0 + (kab * kbb.inverse() * r)(0);
  const double v = (k(0, 0) - (kab * kbb.inverse() * kab.transpose())(0)) * (dp.nu + s - 2.0) / (dp.nu + 3.0 - 2.0);

  Rng rng(2);
  double acc = 0, acc2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto x = extend_signal_to_fine_grid(z, pooled, dp, fine, rng);
    CHECK(x(0) == z(0));
    acc += x(2);
    acc2 += x(2) * x(2);
  }
  const double em = acc / n, ev = acc2 / n - em * em;
  CHECK(em == doctest::Approx(m).epsilon(0.01));
  CHECK(ev == doctest::Approx(v).epsilon(0.03));
}

TEST_CASE("Mahalanobis term averages the block size under the marginal") {
  const std::vector<double> t{0, 0.7, 1.5, 2.0, 3.1};
  MvtParams p;
  p.nu = 6.0;
  p.mean = Eigen::VectorXd::Constant(5, 0.4);
  p.cov = covariance_matrix(std::span<const double>(t), MaternParams{2.0, 1.5});
  Rng rng(3);
  const std::vector<int> a{0}, b{1, 2, 3, 4};
  double acc = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample_mvt(p, rng);
    Eigen::VectorXd xb(4);
    for (int k = 0; k < 4; ++k) xb(k) = x(b[k]);
    acc += mvt_conditional(p, a, b, xb).mahalanobis;
  }
  // Var(S) = 2k(nu-2)/(nu-4) ... sd of the mean about 0.06 here.
  CHECK(acc / n == doctest::Approx(4.0).epsilon(0.06));
}

TEST_CASE("expected expit against Gauss-Hermite quadrature") {
  Rng rng(4);
  CHECK(expected_expit(0.7, 0.0, 5, rng) == oracle::expit(0.7));
  const double gh = oracle::normal_expectation(oracle::expit, 1.0, 0.25);
  CHECK(std::fabs(expected_expit(1.0, 0.25, 1000000, rng) - gh) < 1e-3);
  CHECK(std::fabs(expected_expit(0.0, 0.8, 1000000, rng) - 0.5) < 1e-3);
  CHECK_THROWS_AS(expected_expit(0.0, 1.0, 0, rng), ValidationError);
}

TEST_CASE("probability response curve") {
  const std::vector<double> pooled{0, 1, 2};
  Eigen::VectorXd z(3);
  z << -1.0, 0.0, 2.0;

  SUBCASE("degenerate noise gives expit of the signal") {
    const auto d = oracle::make_draws(pooled, {"a"}, {{0.0, 0.0, 1.0, 1.0, 10.0, {z}}});
    const auto c = probability_response_curve(d, "a", FineGrid::build(pooled, {}), {}, 9);
    for (int k = 0; k < 3; ++k) {
      CHECK(c.mean[k] == oracle::expit(z(k)));
      CHECK(c.lower[k] == c.upper[k]);
    }
  }
  SUBCASE("zero signal gives one half") {
    const auto d = oracle::make_draws(pooled, {"a"}, {{0.5, 0.0, 1.0, 1.0, 10.0, {Eigen::VectorXd::Zero(3)}}});
    PredictOptions opt;
    opt.mc_inner = 100000;
    const auto c = probability_response_curve(d, "a", FineGrid::build(pooled, {}), opt, 9);
    for (double m : c.mean) CHECK(std::fabs(m - 0.5) < 3e-3);
  }
  SUBCASE("curves are probabilities, ordered and reproducible") {
    std::vector<oracle::DrawSpec> specs;
    Rng rng(5);
    for (int s = 0; s < 40; ++s) {
      Eigen::VectorXd zz(3);
      for (int k = 0; k < 3; ++k) zz(k) = 3.0 * rng.normal();
      specs.push_back({0.3, 0.1, 1.5, 1.2, 6.0, {zz}});
    }
    const auto d = oracle::make_draws(pooled, {"a"}, specs);
    const auto fine = FineGrid::build(pooled, parse_grid_spec("0:3:1/4"));
    PredictOptions opt;
    opt.keep_draws = true;
    for (const std::string who : {"a", "new"}) {
      const auto c = probability_response_curve(d, who, fine, opt, 11);
      REQUIRE(c.per_draw);
      CHECK((c.per_draw->array() >= 0).all());
      CHECK((c.per_draw->array() <= 1).all());
      for (std::size_t k = 0; k < fine.size(); ++k) {
        CHECK(c.lower[k] <= c.mean[k]);
        CHECK(c.mean[k] <= c.upper[k]);
      }
      const auto again = probability_response_curve(d, who, fine, opt, 11);
      CHECK(*again.per_draw == *c.per_draw);
    }
    CHECK_THROWS_AS(probability_response_curve(d, "zz", fine, opt, 11), ValidationError);
  }
}

TEST_CASE("binary covariance examples") {
  const std::vector<double> pooled{0, 1};
  const auto fine = FineGrid::build(pooled, {});
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd z1(2);
  z1 << 1.0, -0.5;

  const auto d0 = oracle::make_draws(pooled, {"a"}, {{0.0, 0, 1, 1, 10, {z0}}});
  const auto c0 = binary_covariance(d0, "a", fine, 0, 1, 50, 1);
  CHECK(c0.variance[0] == 0.25);
  CHECK(c0.covariance[0] == 0.0);

  const auto d1 = oracle::make_draws(pooled, {"a"}, {{0.5, 0, 1, 1, 10, {z1}}});
  const auto c1 = binary_covariance(d1, "a", fine, 0, 1, 400000, 2);
  const double e = oracle::normal_expectation(oracle::expit, 1.0, 0.5);
  CHECK(std::fabs(c1.variance[0] - (e - e * e)) < 1e-3);
  CHECK(std::fabs(c1.covariance[0]) < 2e-3);
  CHECK(c1.variance[0] <= 0.25);
  CHECK_THROWS_AS(binary_covariance(d1, "a", fine, 0, 2, 10, 2), std::out_of_range);
}

TEST_CASE("delta approximations") {
  CHECK(delta_probability(0.0, 0.4, 0.1) == doctest::Approx(0.5));
  CHECK(delta_probability(0.8, 0.0, 0.0) == oracle::expit(0.8));
  const double fa = oracle::expit(0.3), fb = oracle::expit(-1.0);
  CHECK(delta_covariance(0.3, 0, -1.0, 0, 0.2, 0) == doctest::Approx(fa * (1 - fa) * fb * (1 - fb) * 0.2));
  for (double m : {-2.0, -1.0, 0.0, 1.0, 2.0})
    for (double v : {0.1, 0.3, 0.5}) {
      const double truth = oracle::normal_expectation(oracle::expit, m, v);
      CHECK(std::fabs(delta_probability(m, v * 0.6, v * 0.4) - truth) <= 0.05);
    }
}

TEST_CASE("posterior covariance kernel") {
  const std::vector<double> pooled{0.0};
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(1);
  const auto one = oracle::make_draws(pooled, {"a"}, {{0, 0, 1.7, 2.0, 10, {z}}});
  const std::vector<double> dist{0.0, 1.0, 2.0, 4.0};
  const auto k1 = posterior_covariance_kernel(one, dist);
  CHECK(k1.mean[0] == 1.7);
  for (std::size_t i = 0; i < dist.size(); ++i) CHECK(k1.upper[i] - k1.lower[i] == 0.0);
  for (std::size_t i = 1; i < dist.size(); ++i) CHECK(k1.mean[i] <= k1.mean[i - 1]);

  const auto two = oracle::make_draws(pooled, {"a"}, {{0, 0, 1.7, 4.0, 10, {z}}});
  const auto k2 = posterior_covariance_kernel(two, std::vector<double>{0.0, 2.0, 4.0, 8.0});
  for (std::size_t i = 0; i < dist.size(); ++i) CHECK(k2.mean[i] == doctest::Approx(k1.mean[i]).epsilon(1e-14));

  const auto both = oracle::make_draws(pooled, {"a"}, {{0, 0, 1.0, 1.0, 10, {z}}, {0, 0, 3.0, 1.0, 10, {z}}});
  const auto kb = posterior_covariance_kernel(both, std::vector<double>{0.0});
  CHECK(kb.mean[0] == 2.0);
  CHECK(kb.lower[0] < kb.upper[0]);
}
