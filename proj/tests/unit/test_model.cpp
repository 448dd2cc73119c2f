#include "mixlasso/error.hpp"
#include "mixlasso/model.hpp"
#include "mixlasso/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace mixlasso;

namespace {

ParameterBox wide_box() {
  ParameterBox b;
  b.a_beta = 0.01;
  b.A_beta = 2.0;
  b.a_sigma = 0.2;
  b.A_sigma = 5.0;
  b.a_sigma_tilde = 0.2;
  b.A_sigma_tilde = 5.0;
  b.a_pi = 0.05;
  return b;
}

ModelParams permuted(const ModelParams& p, const std::vector<int>& order) {
  Eigen::VectorXd w(p.k());
  std::vector<Eigen::MatrixXd> coef, cov;
  for (int r = 0; r < p.k(); ++r) {
    w[r] = p.weights()[order[r]];
    coef.push_back(p.coefficients(order[r]));
    cov.push_back(p.covariance(order[r]));
  }
  return ModelParams(w, coef, cov);
}

}  // namespace

TEST_CASE("parameter box validation") {
  ParameterBox b = wide_box();
  CHECK_NOTHROW(b.validate_for(3));
  CHECK(b.eig_lower() == doctest::Approx(0.2));
  CHECK(b.eig_upper() == doctest::Approx(5.0));
  b.a_pi = 0.5;
  CHECK_THROWS_AS(b.validate_for(3), ConfigError);
  b = wide_box();
  b.a_sigma_tilde = 6.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  b = wide_box();
  b.a_beta = 0.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
}

TEST_CASE("model params reject invalid input") {
  const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(1, 2);
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(1, 1);
  CHECK_NOTHROW(ModelParams(Eigen::Vector2d(0.5, 0.5), {b, b}, {s, s}));
  CHECK_THROWS_AS(ModelParams(Eigen::Vector2d(0.6, 0.5), {b, b}, {s, s}), DomainError);
  CHECK_THROWS_AS(ModelParams(Eigen::Vector2d(0.5, 0.5), {b}, {s, s}), ShapeError);
  CHECK_THROWS_AS(ModelParams(Eigen::Vector2d(0.5, 0.5), {b, Eigen::MatrixXd::Zero(1, 3)}, {s, s}),
                  ShapeError);
  CHECK_THROWS_AS(ModelParams(Eigen::Vector2d(0.5, 0.5), {b, b}, {s, -s}), DomainError);
  Eigen::Matrix2d asym;
  asym << 1.0, 0.3, 0.2, 1.0;
  const Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(ModelParams(Eigen::VectorXd::Ones(1), {b2}, {asym}), DomainError);
}

TEST_CASE("log-sum-exp is order independent and drops underflowing terms") {
  const std::vector<double> v{-1.0, 3.0, 0.5, -2000.0, 2.0};
  std::vector<double> w = v;
  std::reverse(w.begin(), w.end());
  CHECK(log_sum_exp(v) == log_sum_exp(w));
  const double expected = std::log(std::exp(-1.0) + std::exp(3.0) + std::exp(0.5) + std::exp(2.0));
  CHECK(log_sum_exp(v) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(log_sum_exp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
  std::vector<double> many(100);
  std::iota(many.begin(), many.end(), 0.0);
  std::vector<double> shuffled = many;
  Rng rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(log_sum_exp(many) == log_sum_exp(shuffled));
  CHECK(ordered_sum(many) == ordered_sum(shuffled));
}

TEST_CASE("mixture log density matches the direct long-double evaluation") {
  Rng rng(11);
  std::uniform_int_distribution<int> dim(1, 4);
  const ParameterBox box = wide_box();
  for (int t = 0; t < 200; ++t) {
    const int k = dim(rng), p = dim(rng), q = dim(rng);
    const ModelParams params = oracle::random_params(rng, k, p, q, box);
    const Eigen::VectorXd x = oracle::uniform_matrix(rng, p, 1, -1, 1);
    const Eigen::VectorXd y = oracle::uniform_matrix(rng, q, 1, -3, 3);
    const long double ref = oracle::direct_mixture(params, x).log_density(y.cast<long double>());
    CHECK(mixture_log_density(params, x, y) ==
          doctest::Approx(static_cast<double>(ref)).epsilon(1e-10));
  }
}

TEST_CASE("single component reduces to the Gaussian log density") {
  Eigen::MatrixXd b(1, 2);
  b << 0.5, -0.25;
  const ModelParams params(Eigen::VectorXd::Ones(1), {b}, {Eigen::MatrixXd::Constant(1, 1, 2.0)});
  const Eigen::Vector2d x(1.0, 2.0);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.0);
  const double r = 1.0 - 0.0;
  const double expected = -0.5 * std::log(2 * std::numbers::pi * 2.0) - r * r / 4.0;
  CHECK(mixture_log_density(params, x, y) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("far-apart components stay finite") {
  Eigen::MatrixXd b1(1, 1), b2(1, 1);
  b1 << 1.0;
  b2 << -1.0;
  const Eigen::MatrixXd s = Eigen::MatrixXd::Constant(1, 1, 1e-4);
  const ModelParams params(Eigen::Vector2d(0.5, 0.5), {b1, b2}, {s, s});
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.0);
  const double v = mixture_log_density(params, x, y);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(std::log(0.5) - 0.5 * std::log(2 * std::numbers::pi * 1e-4)));
}

TEST_CASE("relabeling components leaves the density unchanged exactly") {
  Rng rng(5);
  const ParameterBox box = wide_box();
  for (int t = 0; t < 100; ++t) {
    const ModelParams params = oracle::random_params(rng, 3, 3, 2, box);
    std::vector<int> order{0, 1, 2};
    std::shuffle(order.begin(), order.end(), rng);
    const ModelParams other = permuted(params, order);
    const Eigen::VectorXd x = oracle::uniform_matrix(rng, 3, 1, -1, 1);
    const Eigen::VectorXd y = oracle::uniform_matrix(rng, 2, 1, -2, 2);
    CHECK(mixture_log_density(params, x, y) == mixture_log_density(other, x, y));
    CHECK(l1_norm(params) == l1_norm(other));
  }
}

TEST_CASE("l1 norm covers coefficients only and is positively homogeneous") {
  Rng rng(8);
  const ParameterBox box = wide_box();
  for (int t = 0; t < 50; ++t) {
    const ModelParams params = oracle::random_params(rng, 2, 4, 2, box);
    double manual = 0.0;
    for (const auto& b : params.coefficients()) manual += b.cwiseAbs().sum();
    CHECK(l1_norm(params) == doctest::Approx(manual).epsilon(1e-14));
    const double c = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    std::vector<Eigen::MatrixXd> scaled;
    for (const auto& b : params.coefficients()) scaled.push_back(c * b);
    const ModelParams sp(params.weights(), scaled, params.covariances());
    CHECK(l1_norm(sp) == doctest::Approx(c * l1_norm(params)).epsilon(1e-12));
  }
}

TEST_CASE("log density gradient matches central differences") {
  Rng rng(21);
  std::uniform_int_distribution<int> kd(1, 3), qd(1, 3), pd(1, 4);
  const ParameterBox box = wide_box();
  for (int t = 0; t < 40; ++t) {
    const ModelParams params = oracle::random_params(rng, kd(rng), pd(rng), qd(rng), box);
    const Eigen::VectorXd x = oracle::uniform_matrix(rng, params.p(), 1, -1, 1);
    const Eigen::VectorXd y = oracle::uniform_matrix(rng, params.q(), 1, -2, 2);
    const LogDensityGradient g = log_density_gradient(params, x, y);
    const oracle::FdGradient fd =
        oracle::fd_gradient(oracle::direct_mixture(params, x), y.cast<long double>(), 1e-5L);
    for (int r = 0; r < params.k(); ++r) {
      CHECK((g.mean[r] - fd.mean[r]).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((g.covariance[r] - fd.covariance[r]).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(std::abs(g.weight[r] - fd.weight[r]) < 1e-6);
    }
  }
}

TEST_CASE("gradient bound constant covers diagonal covariances with A_sigma >= 1/2") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    ParameterBox box = wide_box();
    box.A_sigma = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
    box.a_sigma = 0.2;
    box.a_sigma_tilde = 1.0 / box.A_sigma;
    box.A_sigma_tilde = 5.0;
    box.A_beta = 1.5;
    const ModelParams params = oracle::random_params(rng, 2, 3, 2, box, true);
    const Eigen::VectorXd x = oracle::uniform_matrix(rng, 3, 1, -1, 1);
    const double y_sup = 4.0;
    const Eigen::VectorXd y = oracle::uniform_matrix(rng, 2, 1, -y_sup, y_sup);
    CHECK(log_density_gradient(params, x, y).max_abs() <= gradient_bound_constant(box, 2, y_sup));
  }
}

TEST_CASE("gradient bound constant can be exceeded when A_sigma is small") {
  // One component, Sigma = 20, residual 30: the mean derivative is 1.5 while
  // the constant is max(1, 0.05 + 30^2 * 0.05^2 / 2, 30 * 0.05 / 2) = 1.175.
  ParameterBox box;
  box.a_beta = 0.1;
  box.A_beta = 1.0;
  box.a_sigma = 0.01;
  box.A_sigma = 0.05;
  box.a_sigma_tilde = 1.0;
  box.A_sigma_tilde = 100.0;
  box.a_pi = 1.0;
  const ModelParams params(Eigen::VectorXd::Ones(1), {Eigen::MatrixXd::Constant(1, 1, -1.0)},
                           {Eigen::MatrixXd::Constant(1, 1, 20.0)});
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 29.0);
  const LogDensityGradient g = log_density_gradient(params, x, y);
  CHECK(g.mean[0][0] == doctest::Approx(1.5));
  CHECK(gradient_bound_constant(box, 1, 29.0) == doctest::Approx(1.175));
  CHECK(g.max_abs() > gradient_bound_constant(box, 1, 29.0));
}

TEST_CASE("weight projection") {
  const Eigen::VectorXd w = project_weights(Eigen::Vector2d(0.99, 0.01), 0.05);
  CHECK(w[0] == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.05).epsilon(1e-14));
  const Eigen::VectorXd feasible = Eigen::Vector3d(0.2, 0.3, 0.5);
  const Eigen::VectorXd same = project_weights(feasible, 0.1);
  CHECK(same == feasible);
  CHECK(project_weights(w, 0.05) == w);
  const Eigen::VectorXd m = project_weights(Eigen::Vector3d(10.0, 1e-9, 1e-9), 0.2);
  CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.minCoeff() >= 0.2 - 1e-15);
  CHECK_THROWS_AS(project_weights(Eigen::Vector3d(1, 1, 1), 0.4), ConfigError);
}

TEST_CASE("eigenvalue clipping") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd s = oracle::random_spd(rng, 3, 0.01, 20.0);
    const Eigen::MatrixXd c = clip_eigenvalues(s, 0.5, 4.0);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues();
    CHECK(ev.minCoeff() >= 0.5 * (1 - 1e-12));
    CHECK(ev.maxCoeff() <= 4.0 * (1 + 1e-12));
    CHECK(clip_eigenvalues(c, 0.5, 4.0) == c);
  }
}

TEST_CASE("projection to the box is idempotent and lands inside") {
  Rng rng(9);
  const ParameterBox box = wide_box();
  std::normal_distribution<double> g(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const int k = 1 + t % 3, p = 1 + t % 4, q = 1 + t % 2;
    std::vector<Eigen::MatrixXd> coef, cov;
    for (int r = 0; r < k; ++r) {
      coef.push_back(oracle::uniform_matrix(rng, q, p, -5, 5));
      cov.push_back(oracle::random_spd(rng, q, 0.01, 50.0));
    }
    const ModelParams raw(oracle::random_weights(rng, k, 0.0), coef, cov);
    const Eigen::MatrixXd design = oracle::uniform_matrix(rng, 20, p, -1, 1);
    const ModelParams once = project_to_box(raw, box, design);
    CHECK(check_box_membership(once, box, design).empty());
    CHECK(project_to_box(once, box, design) == once);
  }
}

TEST_CASE("box membership names each violated constraint") {
  ParameterBox box = wide_box();
  box.a_pi = 0.3;
  box.A_beta = 1.0;
  box.a_beta = 0.5;
  const Eigen::MatrixXd design = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd big(1, 2), small(1, 2);
  big << 2.0, 1.0;
  small << 0.1, 0.1;
  const ModelParams params(Eigen::Vector2d(0.8, 0.2), {big, small},
                           {Eigen::MatrixXd::Constant(1, 1, 10.0), Eigen::MatrixXd::Constant(1, 1, 0.1)});
  const auto v = check_box_membership(params, box, design);
  auto has = [&](Constraint c, int r) {
    return std::any_of(v.begin(), v.end(),
                       [&](const BoxViolation& b) { return b.constraint == c && b.component == r; });
  };
  CHECK(has(Constraint::WeightLower, 1));
  CHECK(has(Constraint::CovarianceUpper, 0));
  CHECK(has(Constraint::CovarianceLower, 1));
  CHECK(has(Constraint::MeanUpper, 0));
  const auto low = mean_lower_bound_shortfalls(params, box, design);
  REQUIRE(low.size() == 1);
  CHECK(low[0].component == 1);
  CHECK(low[0].constraint == Constraint::MeanLower);
}
