#include <doctest.h>

#include "nmfuse/conformal.hpp"
#include "nmfuse/errors.hpp"
#include "nmfuse/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <limits>

using namespace nmfuse;

TEST_CASE("conformal p-value") {
  const ValidationBank bank(std::vector<double>{2, -1, 0, -3});
  CHECK(conformal_p(bank, -2) == 0.4);
  CHECK(conformal_p(bank, -5) == 0.2);
  CHECK(conformal_p(bank, 3) == 1.0);
  CHECK(conformal_p(bank, 0) == 0.8);  // ties counted
  CHECK_THROWS_AS(ValidationBank(std::vector<double>{}), DataError);
  CHECK_THROWS_AS(ValidationBank(std::vector<double>{1.0, std::nan("")}), DataError);
}

TEST_CASE("beta law shapes") {
  const auto s1 = beta_far_law(100, 0.03);
  CHECK(s1.alpha_shape == 3);
  CHECK(s1.beta_shape == 98);
  const auto s2 = beta_far_law(100, 0.0295);
  CHECK(s2.alpha_shape == 2);
  CHECK(s2.beta_shape == 99);
  const auto s3 = beta_far_law(4, 0.1);
  CHECK(s3.alpha_shape == 0);
  CHECK(s3.beta_shape == 5);
  CHECK(s3.degenerate());
}

TEST_CASE("find_threshold") {
  const GuaranteeConfig g{0.05, 0.1};
  SUBCASE("v = 100") {
    const auto th = find_threshold(100, g);
    CHECK(th.l == 2);
    CHECK_FALSE(th.degenerate);
    CHECK(th.a == 2.99 / 101);
    CHECK(th.alpha_min == beta_quantile(0.9, 2, 99));
    // exhaustive oracle scan with quadrature quantiles
    Eigen::Index best = 0;
    for (Eigen::Index l = 1; l <= 10; ++l) {
      if (oracle::beta_quantile_quadrature(0.9, l, 101 - l) <= 0.05) best = l;
    }
    CHECK(best == 2);
    CHECK(std::abs(th.alpha_min - oracle::beta_quantile_quadrature(0.9, 2, 99)) < 1e-10);
  }
  SUBCASE("v = 1 is degenerate") {
    const auto th = find_threshold(1, g);
    CHECK(th.l == 0);
    CHECK(th.degenerate);
  }
  SUBCASE("v = 10000 approaches alpha") {
    const auto th = find_threshold(10000, g);
    CHECK(th.alpha_min > 0.045);
    CHECK(th.alpha_min <= 0.05);
  }
  SUBCASE("looser delta gets closer to alpha") {
    CHECK(find_threshold(1000, {0.05, 0.5}).alpha_min >= find_threshold(1000, g).alpha_min);
  }
  SUBCASE("bisection equals linear scan") {
    for (Eigen::Index v = 1; v <= 500; ++v) {
      for (const auto& cfg : {GuaranteeConfig{0.05, 0.1}, GuaranteeConfig{0.1, 0.05}, GuaranteeConfig{0.2, 0.01},
                              GuaranteeConfig{0.01, 0.2}}) {
        const auto b = find_threshold(v, cfg);
        const auto l = find_threshold_linear(v, cfg);
        REQUIRE(b.l == l.l);
        REQUIRE(b.a == l.a);
        REQUIRE(b.degenerate == l.degenerate);
      }
    }
  }
  SUBCASE("a lands in the l-th interval") {
    for (Eigen::Index v : {20, 100, 999, 5000}) {
      const auto th = find_threshold(v, g);
      CHECK(th.a >= static_cast<double>(th.l) / (v + 1));
      CHECK(th.a < static_cast<double>(th.l + 1) / (v + 1));
      CHECK(beta_far_law(v, th.a).alpha_shape == th.l);
    }
  }
  CHECK_THROWS_AS((GuaranteeConfig{0.0, 0.1}.validate()), ConfigError);
  CHECK_THROWS_AS((GuaranteeConfig{0.05, 1.0}.validate()), ConfigError);
}

TEST_CASE("detect") {
  std::vector<double> stats(100);
  for (int i = 0; i < 100; ++i) stats[i] = i;
  const auto cal = calibrate(ValidationBank(stats), {0.05, 0.1});
  CHECK(cal.threshold.l == 2);
  CHECK(detect(-1.0, cal) == Decision::ood);   // q = 1/101
  CHECK(detect(0.0, cal) == Decision::ood);    // q = 2/101
  CHECK(detect(1.0, cal) == Decision::inlier); // q = 3/101 > 2.99/101
  CHECK(detect(1000.0, cal) == Decision::inlier);

  const auto degenerate = calibrate(ValidationBank(std::vector<double>{0.0}), {0.05, 0.1});
  CHECK(degenerate.threshold.degenerate);
  CHECK(detect(-1e300, degenerate) == Decision::inlier);

  CHECK(fixed_threshold_detect(1.0, 1.0) == Decision::ood);
  CHECK(fixed_threshold_detect(1.0 + 1e-9, 1.0) == Decision::inlier);
  CHECK(fixed_threshold_detect(-1e300, -std::numeric_limits<double>::infinity()) == Decision::inlier);
  CHECK(decision_name(Decision::ood) == "OOD");
}

TEST_CASE("marginal validity") {
  // Fresh bank and one fresh null statistic per trial.
  const Eigen::Index v = 100;
  const double a = 0.0296;
  const int trials = 2000;
  int rejections = 0;
  for (int i = 0; i < trials; ++i) {
    RngStream rng(77, static_cast<std::uint64_t>(i));
    std::vector<double> bank(v);
    for (auto& x : bank) x = rng.normal();
    rejections += conformal_p(ValidationBank(bank), rng.normal()) <= a;
  }
  CHECK(static_cast<double>(rejections) / trials <= a + 3 * std::sqrt(a / trials));
}
