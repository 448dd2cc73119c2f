#include "mixlasso/error.hpp"
#include "mixlasso/io.hpp"
#include "mixlasso/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace mixlasso;

TEST_CASE("parameters round-trip through JSON exactly") {
  Rng rng(1);
  ParameterBox box;
  box.a_beta = 0.1;
  box.A_beta = 2.0;
  box.a_sigma = 0.5;
  box.A_sigma = 3.0;
  box.a_sigma_tilde = 0.4;
  box.A_sigma_tilde = 2.0;
  box.a_pi = 0.1;
  const ModelParams p = oracle::random_params(rng, 3, 4, 2, box);
  const json j = params_to_json(p);
  CHECK(params_from_json(json::parse(j.dump())) == p);
  json bad = j;
  bad["weights"] = {0.5, 0.5};
  CHECK_THROWS_AS(params_from_json(bad), ConfigError);
  const ParameterBox back = json(box).get<ParameterBox>();
  CHECK(back.A_sigma == box.A_sigma);
  CHECK(back.a_pi == box.a_pi);
}

TEST_CASE("CSV matrices round-trip exactly") {
  Rng rng(2);
  const Eigen::MatrixXd m = oracle::uniform_matrix(rng, 7, 3, -1e3, 1e3);
  const std::string csv = matrix_to_csv(m);
  CHECK(csv.substr(0, 6) == "0,1,2\n");
  CHECK(matrix_from_csv(csv) == m);
  CHECK_THROWS_AS(matrix_from_csv("0,1\n1,2,3\n"), ConfigError);
}

TEST_CASE("shortest round-trip formatting") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("lambda grids") {
  const auto a = parse_lambda_grid("3,2,1.5");
  CHECK(a == std::vector<double>{3, 2, 1.5});
  const auto b = parse_lambda_grid("0.01:1:3");
  REQUIRE(b.size() == 3);
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(0.1));
  CHECK(b[2] == doctest::Approx(0.01));
  CHECK_THROWS_AS(parse_lambda_grid("1:0.1:3"), ArgumentError);
  CHECK_THROWS_AS(parse_lambda_grid("1,x"), ArgumentError);
}

TEST_CASE("fit configuration JSON") {
  FitConfig c;
  c.lambda = 0.25;
  c.prox_step_rule = StepRule::Fixed;
  c.init_strategy = InitStrategy::RandomInBox;
  c.seed = 99;
  const FitConfig back = json(c).get<FitConfig>();
  CHECK(back.lambda == 0.25);
  CHECK(back.prox_step_rule == StepRule::Fixed);
  CHECK(back.init_strategy == InitStrategy::RandomInBox);
  CHECK(back.seed == 99);
  CHECK_THROWS_AS(json({{"prox_step_rule", "wild"}}).get<FitConfig>(), ConfigError);
}

TEST_CASE("unwritable paths raise I/O errors naming the path") {
  try {
    write_text_file("/nonexistent-dir/x.txt", "x");
    FAIL("expected an I/O error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent-dir/x.txt") != std::string::npos);
  }
}
