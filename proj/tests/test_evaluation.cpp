#include <doctest.h>

#include <Eigen/QR>
#include "nmfuse/evaluation.hpp"
#include "nmfuse/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace nmfuse;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), out.data());
  return out;
}

LabeledStatistics random_instance(RngStream& rng, bool ties) {
  const auto n_in = static_cast<Eigen::Index>(1 + rng.next_u64() % 50);
  const auto n_ood = static_cast<Eigen::Index>(1 + rng.next_u64() % 50);
  auto draw = [&](double shift) { return ties ? std::floor(4 * rng.uniform() + shift) : rng.normal() + shift; };
  LabeledStatistics d{Eigen::VectorXd(n_in), Eigen::VectorXd(n_ood)};
  for (auto& x : d.inlier) x = draw(0.5);
  for (auto& x : d.ood) x = draw(0.0);
  return d;
}

}  // namespace

TEST_CASE("auroc examples") {
  CHECK(auroc({vec({0.9, 0.8}), vec({0.1, 0.2})}) == 1.0);
  CHECK(auroc({vec({0.8, 0.3}), vec({0.5})}) == 0.5);
  CHECK(auroc({vec({1, 2, 3}), vec({3, 1, 2})}) == 0.5);
  CHECK_THROWS_AS(auroc({vec({1}), Eigen::VectorXd()}), std::invalid_argument);
}

TEST_CASE("auroc against the pairwise oracle") {
  RngStream rng(21, 0);
  for (int i = 0; i < 200; ++i) {
    const auto d = random_instance(rng, i % 2 == 0);
    CHECK(auroc(d).value() == oracle::auroc_pairwise(d.inlier, d.ood));
    CHECK(roc_area(roc_curve(d)) == doctest::Approx(auroc(d).value()).epsilon(1e-12));
  }
}

TEST_CASE("auroc properties") {
  RngStream rng(22, 0);
  for (int i = 0; i < 50; ++i) {
    const auto d = random_instance(rng, false);
    const LabeledStatistics mapped{d.inlier.array().exp(), d.ood.array().exp()};
    CHECK(auroc(mapped).value() == auroc(d).value());
    CHECK(auroc(d) + auroc({d.ood, d.inlier}) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("dr_at_far") {
  const auto r = dr_at_far({vec({1, 2, 3, 4}), vec({0, 0.5})}, 0.25);
  CHECK(r.threshold == 1.0);
  CHECK(r.far == 0.25);
  CHECK(r.dr == 1.0);
  const auto sweep = oracle::dr_sweep(vec({1, 2, 3, 4}), vec({0, 0.5}), 0.25);
  CHECK(sweep.dr == 1.0);
  CHECK(sweep.threshold == 1.0);

  SUBCASE("perfect separation") {
    Eigen::VectorXd in(100);
    for (int i = 0; i < 100; ++i) in[i] = 10 + i;
    CHECK(dr_at_far({in, vec({1, 2, 3})}, 0.05).dr == 1.0);
  }
  SUBCASE("identical classes stay near alpha") {
    RngStream rng(23, 0);
    Eigen::VectorXd in(200);
    for (auto& x : in) x = rng.normal();
    const auto res = dr_at_far({in, in}, 0.05);
    CHECK(res.dr <= 0.05 + 1.0 / 200);
    CHECK(res.dr == oracle::dr_sweep(in, in, 0.05).dr);
  }
  SUBCASE("degenerate when every inlier ties the minimum") {
    const auto res = dr_at_far({vec({1, 1, 1}), vec({1, 2})}, 0.1);
    CHECK(res.degenerate);
    CHECK(res.dr == 0.0);
  }
  SUBCASE("matches the sweep oracle, nondecreasing in alpha") {
    RngStream rng(24, 0);
    for (int i = 0; i < 200; ++i) {
      const auto d = random_instance(rng, i % 2 == 1);
      double prev = 0.0;
      for (const double alpha : {0.01, 0.05, 0.1, 0.25, 0.5, 0.9}) {
        const auto got = dr_at_far(d, alpha);
        const auto want = oracle::dr_sweep(d.inlier, d.ood, alpha);
        CHECK(got.dr == want.dr);
        CHECK(got.far == want.far);
        CHECK(got.dr >= prev);
        prev = got.dr;
      }
    }
  }
  CHECK_THROWS_AS(dr_at_far({vec({1}), vec({0})}, 0.0), std::invalid_argument);
}

TEST_CASE("spearman") {
  CHECK(spearman(vec({1, 2, 3, 4}), vec({10, 20, 30, 40})) == doctest::Approx(1.0));
  CHECK(spearman(vec({1, 2, 3, 4}), vec({4, 3, 2, 1})) == doctest::Approx(-1.0));
  CHECK(spearman(vec({1, 2, 2, 3}), vec({1, 2, 2, 3})) == doctest::Approx(1.0));
}

TEST_CASE("eigen scores") {
  RngStream rng(25, 0);
  SUBCASE("sum to the glrt statistic for any orthonormal basis") {
    for (int i = 0; i < 200; ++i) {
      const Eigen::Index m = 1 + i % 12;
      Eigen::MatrixXd a(m, m);
      for (auto& x : a.reshaped()) x = rng.normal();
      const Eigen::MatrixXd q = a.householderQr().householderQ();
      Eigen::VectorXd z(m);
      for (auto& x : z) x = 2 * rng.normal();
      const Eigen::VectorXd mu = clamp_to_negative_means(z, 0.25);
      CHECK(std::abs(eigen_scores(z, mu, q).sum() - glrt_statistic(z, GlrtConfig{0.25})) <= 1e-8);
    }
  }
  SUBCASE("m = 1 is the glrt itself") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    const Eigen::VectorXd z = vec({-0.7});
    CHECK(eigen_scores(z, clamp_to_negative_means(z, 0.25), one)[0] == glrt_statistic(z, GlrtConfig{0.25}));
  }
  SUBCASE("eigen_analysis table") {
    const Eigen::Index m = 4;
    Eigen::MatrixXd train(500, m);
    Eigen::MatrixXd in(200, m);
    Eigen::MatrixXd ood(200, m);
    for (auto* mat : {&train, &in, &ood}) {
      for (auto& x : mat->reshaped()) x = rng.normal();
    }
    ood.array() -= 1.0;
    for (const auto metric : {EigenMetric::identity, EigenMetric::sample_covariance}) {
      const auto t = eigen_analysis(train, in, ood, 0.25, 1e-6, metric);
      CHECK(t.eigenvalues.size() == m);
      for (Eigen::Index k = 1; k < m; ++k) CHECK(t.eigenvalues[k] <= t.eigenvalues[k - 1]);
      CHECK((t.eigenvectors.transpose() * t.eigenvectors - Eigen::MatrixXd::Identity(m, m)).norm() < 1e-8);
      CHECK(t.inlier_scores.rows() == 200);
      CHECK(t.auroc.size() == m);
    }
    const auto t = eigen_analysis(train, in, ood, 0.25);
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      CHECK(std::abs(t.inlier_scores.row(r).sum() - glrt_statistic(Eigen::VectorXd(in.row(r).transpose()), GlrtConfig{0.25})) <= 1e-8);
    }
  }
}

TEST_CASE("calibrated curves") {
  std::vector<double> grid;
  for (double z = -3; z <= 3; z += 0.05) grid.push_back(z);
  const double z0 = std_normal_quantile(0.1);

  SUBCASE("identity") {
    const auto c = calibrated_curve([](double z) { return z; }, 0.1, grid);
    for (const auto& p : c) CHECK(p.value == doctest::Approx(p.z - z0).epsilon(1e-8));
  }
  SUBCASE("log Phi") {
    auto f = [](double z) { return std::log(std_normal_cdf(z).value()); };
    const auto c = calibrated_curve(f, 0.1, {z0 - 1e-4, z0, z0 + 1e-4});
    CHECK(std::abs(c[1].value) < 1e-10);
    CHECK((c[2].value - c[0].value) / 2e-4 == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("glrt keeps its kink") {
    auto f = [](double z) { return glrt_statistic(Eigen::Matrix<double, 1, 1>::Constant(z), GlrtConfig{0.25}); };
    const auto c = calibrated_curve(f, 0.1, grid);
    // recompute: tau = t(z0), slope = t'(z0) = -z0 since z0 < -eps
    const double tau = f(z0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(c[i].value == doctest::Approx((f(grid[i]) - tau) / -z0).epsilon(1e-7));
    }
    // slope above -eps is eps / (-z0)
    const double right = (f(1.0) - f(0.0)) / -z0;
    CHECK(right == doctest::Approx(0.25 / -z0));
  }
  SUBCASE("non-monotone statistic rejected") {
    CHECK_THROWS_AS(calibrated_curve([](double z) { return z * z; }, 0.1, grid), std::invalid_argument);
  }
}
