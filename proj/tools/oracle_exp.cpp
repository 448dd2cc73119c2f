#include "mixlasso/bounds.hpp"
#include "mixlasso/error.hpp"
#include "mixlasso/estimator.hpp"
#include "mixlasso/harness.hpp"
#include "mixlasso/io.hpp"
#include "mixlasso/rng.hpp"
#include "mixlasso/simulator.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitReplicate = 3;

using namespace mixlasso;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
  ExperimentConfig config = experiment_config_from_json(read_json_file(config_path));
  if (!out_dir.empty()) config.output_dir = out_dir;
  const std::uint64_t master = seed.value_or(config.sim.seed);
  const ExperimentReport report = run_oracle_experiment(config, master);
  for (const auto& path : emit_report(report, config)) std::cout << path.string() << "\n";
  for (const auto& a : report.aggregates)
    std::cout << "lambda " << format_double(a.lambda) << "  mean_kl " << format_double(a.mean_kl)
              << "  pooled_se " << format_double(a.pooled_se) << "  rhs "
              << format_double(a.bound_report.oracle_rhs_total) << "  "
              << (a.inequality_satisfied ? "satisfied" : "violated") << "\n";
  return 0;
}

int cmd_bounds(int n, int p, int q, int k, const std::string& box_path, double kappa,
               double kappa_prime, double x_max, std::optional<double> lambda, double kl_ref,
               double l1_ref, bool model_selection) {
  ParameterBox box;
  const json j = read_json_file(box_path);
  from_json(j.contains("box") ? j.at("box") : j, box);
  box.validate_for(k);
  if (n < 2 || p < 1 || q < 1 || k < 1) throw ConfigError("need n >= 2 and p, q, k >= 1");
  const OracleSetting setting{box, SampleSize::of(n), p, q, k, x_max, kappa, kappa_prime};
  const double threshold = lambda_threshold(box, setting.n, p, q, k, x_max, kappa);
  const BoundReport report =
      oracle_rhs(setting, lambda.value_or(threshold), kl_ref, l1_ref,
                 model_selection ? RemainderVariant::ModelSelection
                                 : RemainderVariant::OracleInequality);
  json out = report;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& spec_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
  const json j = read_json_file(spec_path);
  SimSpec spec = (j.contains("sim") ? j.at("sim") : j).get<SimSpec>();
  if (seed) spec.seed = *seed;
  const ModelParams truth = make_ground_truth(spec);
  const Eigen::MatrixXd design = sample_design(spec);
  const ResponseSample sample = sample_responses(truth, design, derive_seed(spec.seed, 2));
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "design.csv", matrix_to_csv(design));
  write_text_file(dir / "responses.csv", matrix_to_csv(sample.responses));
  json bundle{{"spec", spec}, {"truth", params_to_json(truth)}};
  json x = json::array();
  json y = json::array();
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < design.cols(); ++c) row.push_back(design(i, c));
    x.push_back(row);
    json yr = json::array();
    for (Eigen::Index c = 0; c < sample.responses.cols(); ++c) yr.push_back(sample.responses(i, c));
    y.push_back(yr);
  }
  bundle["design"] = x;
  bundle["responses"] = y;
  bundle["labels"] = sample.labels;
  write_text_file(dir / "dataset.json", bundle.dump(2) + "\n");
  std::cout << (dir / "design.csv").string() << "\n"
            << (dir / "responses.csv").string() << "\n"
            << (dir / "dataset.json").string() << "\n";
  return 0;
}

int cmd_fit(const std::string& design_path, const std::string& responses_path, int k,
            const std::string& config_path, const std::string& grid, std::optional<std::uint64_t> seed) {
  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const Dataset data(matrix_from_csv(slurp(design_path)), matrix_from_csv(slurp(responses_path)));
  FitConfig config;
  if (!config_path.empty()) {
    const json j = read_json_file(config_path);
    config = (j.contains("fit") ? j.at("fit") : j).get<FitConfig>();
  }
  if (seed) config.seed = *seed;
  config.validate();
  json out;
  if (grid.empty()) {
    out = fit_lasso(data, k, config);
  } else {
    const std::vector<double> values = parse_lambda_grid(grid);
    const LambdaPath path = lambda_path(data, k, values, config);
    out = json{{"lambda_max", path.lambda_max}, {"fits", path.fits}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oracle-inequality experiments for l1-penalized mixtures of Gaussian regressions"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config", run_config, "ExperimentConfig JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "Master seed (default: sim.seed)");
  run->add_option("--out", run_out, "Output directory (default: output_dir)");

  auto* bounds = app.add_subcommand("bounds", "Print the BoundReport for a setting");
  int b_n = 0, b_p = 0, b_q = 1, b_k = 1;
  std::string b_box;
  double b_kappa = kDefaultKappa, b_kappa_prime = kDefaultKappaPrime, b_x = 1.0, b_kl = 0.0,
         b_l1 = 0.0;
  std::optional<double> b_lambda;
  bool b_ms = false;
  bounds->add_option("--n", b_n)->required();
  bounds->add_option("--p", b_p)->required();
  bounds->add_option("--q", b_q)->required();
  bounds->add_option("--k", b_k)->required();
  bounds->add_option("--box", b_box, "ParameterBox JSON")->required()->check(CLI::ExistingFile);
  bounds->add_option("--kappa", b_kappa);
  bounds->add_option("--kappa-prime", b_kappa_prime);
  bounds->add_option("--x-max-n", b_x, "Design norm (default 1)");
  bounds->add_option("--lambda", b_lambda, "Default: the threshold");
  bounds->add_option("--kl-ref", b_kl);
  bounds->add_option("--l1-ref", b_l1);
  bounds->add_flag("--model-selection", b_ms, "Use the model-selection remainder");

  auto* simulate = app.add_subcommand("simulate", "Generate truth, design and responses");
  std::string s_spec, s_out = "sim";
  std::optional<std::uint64_t> s_seed;
  simulate->add_option("--spec", s_spec, "SimSpec JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", s_seed);
  simulate->add_option("--out", s_out);

  auto* fit = app.add_subcommand("fit", "Fit the estimator to CSV data");
  std::string f_design, f_resp, f_config, f_grid;
  int f_k = 2;
  std::optional<std::uint64_t> f_seed;
  fit->add_option("--design", f_design)->required()->check(CLI::ExistingFile);
  fit->add_option("--responses", f_resp)->required()->check(CLI::ExistingFile);
  fit->add_option("--k", f_k)->required();
  fit->add_option("--config", f_config, "FitConfig JSON")->check(CLI::ExistingFile);
  fit->add_option("--lambda-grid", f_grid, "a,b,c or min:max:count");
  fit->add_option("--seed", f_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_config, run_seed, run_out);
    if (*bounds)
      return cmd_bounds(b_n, b_p, b_q, b_k, b_box, b_kappa, b_kappa_prime, b_x, b_lambda, b_kl,
                        b_l1, b_ms);
    if (*simulate) return cmd_simulate(s_spec, s_seed, s_out);
    if (*fit) return cmd_fit(f_design, f_resp, f_k, f_config, f_grid, f_seed);
  } catch (const ReplicateFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitReplicate;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
