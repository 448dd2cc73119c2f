#include "mixlasso/harness.hpp"

#include "mixlasso/divergence.hpp"
#include "mixlasso/error.hpp"
#include "mixlasso/io.hpp"
#include "mixlasso/rng.hpp"
#include "mixlasso/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace mixlasso {

namespace {

// Seed streams below the master seed.
constexpr std::uint64_t kResponseStream = 2;
constexpr std::uint64_t kFitStream = 3;
constexpr std::uint64_t kKlStream = 4;
constexpr std::uint64_t kTruthStream = 5;

constexpr const char* kRowHeader =
    "replicate,lambda,kl_n_estimate,kl_std_error,l1_fitted,event_T,n_iters,converged";

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t stream, int replicate) {
  return derive_seed(derive_seed(master, stream), static_cast<std::uint64_t>(replicate));
}

struct ReplicateOutcome {
  std::vector<ReplicateRow> rows;
  double l1_truth = 0.0;
};

}  // namespace

void ExperimentConfig::validate() const {
  sim.validate();
  FitConfig f = fit;
  f.box = sim.box;
  f.validate();
  if (n_replicates < 1) throw ConfigError("n_replicates must be at least 1");
  if (kl_samples < 1) throw ConfigError("kl_samples must be at least 1");
  if (!(kappa > 0.0) || !(kappa_prime > 0.0)) throw ConfigError("kappa and kappa_prime must be positive");
  if (n_threads < 0) throw ConfigError("n_threads must be non-negative");
  if (formats.empty()) throw ConfigError("formats must not be empty");
  for (const auto& f : formats)
    if (f != "csv" && f != "json" && f != "svg") throw ConfigError("unknown output format '" + f + "'");
  if (lambda_policy.values.empty()) throw ConfigError("lambda policy has no values");
  for (double v : lambda_policy.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda policy values must be finite and non-negative");
  if (sim.n < 2) throw ConfigError("experiments need n >= 2");
}

ExperimentReport run_oracle_experiment(const ExperimentConfig& config, std::uint64_t master_seed) {
  config.validate();
  SimSpec spec = config.sim;
  spec.seed = master_seed;
  const Eigen::MatrixXd design = sample_design(spec);
  const SampleSize n = SampleSize::of(spec.n);

  ExperimentReport report;
  report.master_seed = master_seed;
  report.x_max_n = x_max_n(design);
  report.lambda_threshold =
      lambda_threshold(spec.box, n, spec.p, spec.q, spec.k, report.x_max_n, config.kappa);

  std::vector<double> lambdas;
  for (double v : config.lambda_policy.values)
    lambdas.push_back(config.lambda_policy.kind == LambdaPolicyKind::ThresholdMultiples
                          ? v * report.lambda_threshold
                          : v);
  std::vector<double> grid = lambdas;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<std::size_t> grid_index;
  for (double l : lambdas)
    grid_index.push_back(static_cast<std::size_t>(
        std::find(grid.begin(), grid.end(), l) - grid.begin()));

  const double truncation = m_n(spec.box, n);
  const bool shared_truth = !config.truth_per_replicate;
  const ModelParams shared = make_ground_truth(spec);

  const int reps = config.n_replicates;
  std::vector<ReplicateOutcome> outcomes(reps);
  std::vector<std::exception_ptr> errors(reps);

  auto run_one = [&](int r) {
    SimSpec truth_spec = spec;
    truth_spec.seed = replicate_seed(master_seed, kTruthStream, r);
    const ModelParams truth = shared_truth ? shared : make_ground_truth(truth_spec);
    const ResponseSample sample =
        sample_responses(truth, design, replicate_seed(master_seed, kResponseStream, r));
    const Dataset data(design, sample.responses);
    FitConfig fit_cfg = config.fit;
    fit_cfg.box = spec.box;
    fit_cfg.seed = replicate_seed(master_seed, kFitStream, r);
    const LambdaPath path = lambda_path(data, spec.k, grid, fit_cfg);
    const bool event = event_t_indicator(sample.responses, truncation);
    const std::uint64_t kl_seed = replicate_seed(master_seed, kKlStream, r);

    ReplicateOutcome out;
    out.l1_truth = l1_norm(truth);
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      const FitResult& fit = path.fits[grid_index[j]];
      const KlEstimate kl = kl_n(truth, fit.params, design, config.kl_samples, kl_seed);
      out.rows.push_back(ReplicateRow{r, lambdas[j], kl.value, kl.std_error, l1_norm(fit.params),
                                      event, fit.n_iters, fit.converged});
    }
    outcomes[r] = std::move(out);
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int n_workers =
      std::min(reps, config.n_threads > 0 ? config.n_threads : static_cast<int>(hw));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < reps; r = next++) {
      try {
        run_one(r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int r = 0; r < reps; ++r) {
    if (!errors[r]) continue;
    std::string what = "unknown error";
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    throw ReplicateFailure(r, replicate_seed(master_seed, kResponseStream, r), what);
  }

  double l1_sum = 0.0;
  for (const auto& o : outcomes) {
    l1_sum += o.l1_truth;
    report.rows.insert(report.rows.end(), o.rows.begin(), o.rows.end());
  }
  report.l1_truth = l1_sum / reps;

  const OracleSetting setting{spec.box, n, spec.p, spec.q, spec.k, report.x_max_n, config.kappa,
                              config.kappa_prime};
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    LambdaAggregate agg;
    agg.lambda = lambdas[j];
    double sum = 0.0, sq_se = 0.0, events = 0.0, l1 = 0.0;
    for (int r = 0; r < reps; ++r) {
      const ReplicateRow& row = outcomes[r].rows[j];
      sum += row.kl_n_estimate;
      sq_se += row.kl_std_error * row.kl_std_error;
      events += row.event_T ? 1.0 : 0.0;
      l1 += row.l1_fitted;
    }
    agg.mean_kl = sum / reps;
    agg.pooled_se = std::sqrt(sq_se) / reps;
    double dev = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double d = outcomes[r].rows[j].kl_n_estimate - agg.mean_kl;
      dev += d * d;
    }
    agg.replicate_se = reps > 1 ? std::sqrt(dev / (reps - 1)) / std::sqrt(reps) : 0.0;
    agg.event_T_rate = events / reps;
    agg.mean_l1_fitted = l1 / reps;
    agg.bound_report = oracle_rhs(setting, agg.lambda, 0.0, report.l1_truth);
    agg.margin = agg.bound_report.oracle_rhs_total - agg.mean_kl;
    agg.inequality_satisfied =
        agg.mean_kl + 2.0 * agg.pooled_se <= agg.bound_report.oracle_rhs_total;
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

std::string rows_to_csv(const std::vector<ReplicateRow>& rows) {
  std::string out = std::string(kRowHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.replicate) + ',' + format_double(r.lambda) + ',' +
           format_double(r.kl_n_estimate) + ',' + format_double(r.kl_std_error) + ',' +
           format_double(r.l1_fitted) + ',' + (r.event_T ? "1" : "0") + ',' +
           std::to_string(r.n_iters) + ',' + (r.converged ? "1" : "0") + '\n';
  }
  return out;
}

std::vector<ReplicateRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRowHeader) throw ConfigError("unexpected CSV header");
  std::vector<ReplicateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw ConfigError("CSV row has " + std::to_string(cells.size()) + " cells");
    rows.push_back(ReplicateRow{std::stoi(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                                std::stod(cells[3]), std::stod(cells[4]), cells[5] == "1",
                                std::stoi(cells[6]), cells[7] == "1"});
  }
  return rows;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("sim")) c.sim = j.at("sim").get<SimSpec>();
    if (j.contains("fit")) c.fit = j.at("fit").get<FitConfig>();
    c.fit.box = c.sim.box;
    if (j.contains("lambda_policy")) {
      const json& lp = j.at("lambda_policy");
      const auto kind = lp.value("kind", std::string("threshold-multiples"));
      if (kind == "threshold-multiples")
        c.lambda_policy.kind = LambdaPolicyKind::ThresholdMultiples;
      else if (kind == "explicit-grid")
        c.lambda_policy.kind = LambdaPolicyKind::ExplicitGrid;
      else
        throw ConfigError("unknown lambda_policy kind '" + kind + "'");
      if (lp.contains("values")) {
        if (lp.at("values").is_string())
          c.lambda_policy.values = parse_lambda_grid(lp.at("values").get<std::string>());
        else
          c.lambda_policy.values = lp.at("values").get<std::vector<double>>();
      }
    }
    c.n_replicates = j.value("n_replicates", c.n_replicates);
    c.kl_samples = j.value("kl_samples", c.kl_samples);
    c.kappa = j.value("kappa", c.kappa);
    c.kappa_prime = j.value("kappa_prime", c.kappa_prime);
    c.truth_per_replicate = j.value("truth_per_replicate", c.truth_per_replicate);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    if (j.contains("formats")) c.formats = j.at("formats").get<std::vector<std::string>>();
    c.n_threads = j.value("n_threads", c.n_threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json experiment_config_to_json(const ExperimentConfig& c) {
  return json{{"sim", c.sim},
              {"fit", c.fit},
              {"lambda_policy",
               {{"kind", c.lambda_policy.kind == LambdaPolicyKind::ThresholdMultiples
                             ? "threshold-multiples"
                             : "explicit-grid"},
                {"values", c.lambda_policy.values}}},
              {"n_replicates", c.n_replicates},
              {"kl_samples", c.kl_samples},
              {"kappa", c.kappa},
              {"kappa_prime", c.kappa_prime},
              {"truth_per_replicate", c.truth_per_replicate},
              {"output_dir", c.output_dir.string()},
              {"formats", c.formats},
              {"n_threads", c.n_threads}};
}

json report_to_json(const ExperimentReport& report) {
  json aggs = json::array();
  for (const auto& a : report.aggregates)
    aggs.push_back(json{{"lambda", a.lambda},
                        {"mean_kl", a.mean_kl},
                        {"pooled_se", a.pooled_se},
                        {"replicate_se", a.replicate_se},
                        {"event_T_rate", a.event_T_rate},
                        {"mean_l1_fitted", a.mean_l1_fitted},
                        {"bound_report", a.bound_report},
                        {"inequality_satisfied", a.inequality_satisfied},
                        {"margin", a.margin}});
  return json{{"master_seed", report.master_seed},
              {"x_max_n", report.x_max_n},
              {"lambda_threshold", report.lambda_threshold},
              {"l1_truth", report.l1_truth},
              {"n_rows", report.rows.size()},
              {"aggregates", aggs}};
}

std::vector<std::filesystem::path> emit_report(const ExperimentReport& report,
                                               const ExperimentConfig& config) {
  const auto& dir = config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto wants = [&](const char* f) {
    return std::find(config.formats.begin(), config.formats.end(), f) != config.formats.end();
  };
  std::vector<std::filesystem::path> written;
  if (wants("csv")) {
    written.push_back(dir / "rows.csv");
    write_text_file(written.back(), rows_to_csv(report.rows));
  }
  if (wants("json")) {
    json j = report_to_json(report);
    j["config"] = experiment_config_to_json(config);
    written.push_back(dir / "report.json");
    write_text_file(written.back(), j.dump(2) + "\n");
  }
  if (wants("svg")) {
    PlotSeries kl{"mean KL_n", {}, {}};
    PlotSeries rhs{"oracle RHS", {}, {}};
    std::vector<const LambdaAggregate*> sorted;
    for (const auto& a : report.aggregates) sorted.push_back(&a);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto* a, const auto* b) { return a->lambda < b->lambda; });
    for (const auto* a : sorted) {
      kl.x.push_back(a->lambda);
      kl.y.push_back(a->mean_kl);
      rhs.x.push_back(a->lambda);
      rhs.y.push_back(a->bound_report.oracle_rhs_total);
    }
    written.push_back(dir / "kl_vs_lambda.svg");
    write_text_file(written.back(),
                    render_line_plot("KL risk against lambda", "lambda", "KL_n", {kl, rhs}));
  }
  return written;
}

}  // namespace mixlasso
