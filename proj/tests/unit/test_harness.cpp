#include "mixlasso/error.hpp"
#include "mixlasso/harness.hpp"
#include "mixlasso/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

using namespace mixlasso;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const std::string& dir) {
  ExperimentConfig c;
  c.sim.n = 40;
  c.sim.p = 5;
  c.sim.q = 1;
  c.sim.k = 2;
  c.sim.sparsity = 0.6;
  c.sim.noise_scale = 0.5;
  c.sim.separation = 1.0;
  c.sim.box.a_beta = 0.05;
  c.sim.box.A_beta = 1.0;
  c.sim.box.a_sigma = 0.5;
  c.sim.box.A_sigma = 4.0;
  c.sim.box.a_sigma_tilde = 0.25;
  c.sim.box.A_sigma_tilde = 2.0;
  c.sim.box.a_pi = 0.2;
  c.fit.box = c.sim.box;
  c.fit.n_restarts = 2;
  c.n_replicates = 3;
  c.kl_samples = 400;
  c.n_threads = 1;
  c.output_dir = fs::temp_directory_path() / dir;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal XML balance check: every opened element is closed in order.
bool balanced_xml(const std::string& text) {
  std::vector<std::string> stack;
  const std::regex tag("<(/?)([A-Za-z][A-Za-z0-9]*)[^>]*?(/?)>");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[3] == "/") continue;
    if (m[1] == "/") {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    } else {
      stack.push_back(m[2]);
    }
  }
  return stack.empty();
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(ORACLE_EXP_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("report bookkeeping") {
  const ExperimentConfig c = small_config("mixlasso_h1");
  const ExperimentReport r = run_oracle_experiment(c, 5);
  REQUIRE(r.rows.size() == 9);
  REQUIRE(r.aggregates.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& a = r.aggregates[j];
    double sum = 0.0;
    for (const auto& row : r.rows)
      if (row.lambda == a.lambda) sum += row.kl_n_estimate;
    CHECK(a.mean_kl == doctest::Approx(sum / 3).epsilon(1e-12));
    CHECK(a.margin == a.bound_report.oracle_rhs_total - a.mean_kl);
    CHECK(a.lambda == doctest::Approx(c.lambda_policy.values[j] * r.lambda_threshold));
  }
  CHECK(r.aggregates[0].bound_report.below_threshold);
  CHECK_FALSE(r.aggregates[1].bound_report.below_threshold);

  ExperimentConfig one = c;
  one.n_replicates = 1;
  one.lambda_policy = {LambdaPolicyKind::ExplicitGrid, {0.5, 0.1}};
  CHECK(run_oracle_experiment(one, 5).rows.size() == 2);
}

TEST_CASE("zero truth stays under the bound at the threshold") {
  ExperimentConfig c = small_config("mixlasso_h2");
  c.sim.sparsity = 1.0;
  c.lambda_policy.values = {1.0};
  const ExperimentReport r = run_oracle_experiment(c, 9);
  CHECK(r.l1_truth == 0.0);
  CHECK(r.aggregates[0].inequality_satisfied);
}

TEST_CASE("results do not depend on scheduling") {
  ExperimentConfig c = small_config("mixlasso_h3");
  const ExperimentReport a = run_oracle_experiment(c, 21);
  c.n_threads = 3;
  const ExperimentReport b = run_oracle_experiment(c, 21);
  CHECK(a.rows == b.rows);
  CHECK(run_oracle_experiment(c, 22).rows != a.rows);
}

TEST_CASE("Monte Carlo error scales with the sample count") {
  ExperimentConfig c = small_config("mixlasso_h4");
  c.lambda_policy = {LambdaPolicyKind::ExplicitGrid, {0.05}};
  c.kl_samples = 2000;
  const double se1 = run_oracle_experiment(c, 4).aggregates[0].pooled_se;
  c.kl_samples = 4000;
  const double se2 = run_oracle_experiment(c, 4).aggregates[0].pooled_se;
  REQUIRE(se2 > 0.0);
  CHECK(se1 / se2 >= 1.2);
  CHECK(se1 / se2 <= 1.7);
}

TEST_CASE("emitted files") {
  ExperimentConfig c = small_config("mixlasso_h5");
  fs::remove_all(c.output_dir);
  const ExperimentReport r = run_oracle_experiment(c, 3);
  const auto files = emit_report(r, c);
  REQUIRE(files.size() == 3);
  const std::string csv = slurp(c.output_dir / "rows.csv");
  CHECK(csv.substr(0, csv.find('\n')) ==
        "replicate,lambda,kl_n_estimate,kl_std_error,l1_fitted,event_T,n_iters,converged");
  CHECK(rows_from_csv(csv) == r.rows);
  const std::string svg = slurp(c.output_dir / "kl_vs_lambda.svg");
  CHECK(balanced_xml(svg));
  std::size_t polylines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1))
    ++polylines;
  CHECK(polylines == 2);
  const json j = json::parse(slurp(c.output_dir / "report.json"));
  CHECK(j.at("aggregates").size() == 3);
  CHECK(j.at("aggregates")[0].contains("bound_report"));

  const std::string json_before = slurp(c.output_dir / "report.json");
  emit_report(run_oracle_experiment(c, 3), c);
  CHECK(slurp(c.output_dir / "rows.csv") == csv);
  CHECK(slurp(c.output_dir / "report.json") == json_before);

  ExperimentConfig csv_only = c;
  csv_only.output_dir = fs::temp_directory_path() / "mixlasso_h6";
  fs::remove_all(csv_only.output_dir);
  csv_only.formats = {"csv"};
  CHECK(emit_report(r, csv_only).size() == 1);
  CHECK(std::distance(fs::directory_iterator(csv_only.output_dir), fs::directory_iterator()) == 1);

  ExperimentConfig bad = c;
  bad.output_dir = "/proc/forbidden/out";
  CHECK_THROWS_AS(emit_report(r, bad), IoError);
}

TEST_CASE("configuration round-trip and validation") {
  const ExperimentConfig c = small_config("mixlasso_h7");
  const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(c));
  CHECK(experiment_config_to_json(back) == experiment_config_to_json(c));
  ExperimentConfig bad = c;
  bad.n_replicates = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.formats = {};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(json{{"sim", {{"design_kind", "x"}}}}), ConfigError);
}

TEST_CASE("command line exit codes") {
  const fs::path dir = fs::temp_directory_path() / "mixlasso_cli";
  fs::create_directories(dir);
  ExperimentConfig c = small_config("mixlasso_cli_out");
  c.n_replicates = 1;
  write_text_file(dir / "good.json", experiment_config_to_json(c).dump());
  json bad = experiment_config_to_json(c);
  bad["n_replicates"] = 0;
  write_text_file(dir / "bad.json", bad.dump());
  write_text_file(dir / "box.json", json(c.sim.box).dump());
  CHECK(run_cli("run --config " + (dir / "good.json").string() + " --seed 3 --out " +
                (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "rows.csv"));
  CHECK(run_cli("run --config " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("run --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("bounds --n 100 --p 10 --q 1 --k 2 --box " + (dir / "box.json").string()) == 0);
  CHECK(run_cli("bounds --n 100 --p 10 --q 1 --k 9 --box " + (dir / "box.json").string()) == 2);
}
