#pragma once

#include "mixlasso/bounds.hpp"
#include "mixlasso/estimator.hpp"
#include "mixlasso/io.hpp"
#include "mixlasso/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mixlasso {

enum class LambdaPolicyKind { ThresholdMultiples, ExplicitGrid };

struct LambdaPolicy {
  LambdaPolicyKind kind = LambdaPolicyKind::ThresholdMultiples;
  /// Multiples of lambda_threshold (ThresholdMultiples) or raw values (ExplicitGrid).
  std::vector<double> values{0.5, 1.0, 2.0};
};

struct ExperimentConfig {
  SimSpec sim;
  /// Template; lambda and seed are set per fit. Its box is replaced by sim.box.
  FitConfig fit;
  LambdaPolicy lambda_policy;
  int n_replicates = 10;
  int kl_samples = kDefaultKlSamples;
  double kappa = kDefaultKappa;
  double kappa_prime = kDefaultKappaPrime;
  /// Draw a fresh truth for every replicate instead of one shared truth.
  bool truth_per_replicate = false;
  std::filesystem::path output_dir = "out";
  /// Subset of {"csv", "json", "svg"}.
  std::vector<std::string> formats{"csv", "json", "svg"};
  /// Worker threads; 0 uses the hardware concurrency.
  int n_threads = 0;

  void validate() const;
};

struct ReplicateRow {
  int replicate = 0;
  double lambda = 0.0;
  double kl_n_estimate = 0.0;
  double kl_std_error = 0.0;
  double l1_fitted = 0.0;
  bool event_T = false;
  int n_iters = 0;
  bool converged = false;

  bool operator==(const ReplicateRow&) const = default;
};

struct LambdaAggregate {
  double lambda = 0.0;
  double mean_kl = 0.0;
  /// sqrt(sum of squared per-replicate MC errors) / R.
  double pooled_se = 0.0;
  /// Standard deviation of the replicate estimates over sqrt(R).
  double replicate_se = 0.0;
  double event_T_rate = 0.0;
  double mean_l1_fitted = 0.0;
  BoundReport bound_report;
  /// mean_kl + 2 pooled_se <= oracle_rhs_total.
  bool inequality_satisfied = false;
  /// oracle_rhs_total - mean_kl.
  double margin = 0.0;
};

struct ExperimentReport {
  std::uint64_t master_seed = 0;
  double x_max_n = 0.0;
  double lambda_threshold = 0.0;
  double l1_truth = 0.0;
  /// Replicate-major, lambdas in policy order.
  std::vector<ReplicateRow> rows;
  std::vector<LambdaAggregate> aggregates;
};

/// One fixed design drawn from the sim spec; responses, fits and KL estimates
/// per replicate from seeds derived from (master seed, replicate index).
/// Throws ReplicateFailure for the lowest failing replicate.
ExperimentReport run_oracle_experiment(const ExperimentConfig& config, std::uint64_t master_seed);

/// Writes rows.csv, report.json and kl_vs_lambda.svg as selected by
/// config.formats into config.output_dir; returns the written paths.
std::vector<std::filesystem::path> emit_report(const ExperimentReport& report,
                                               const ExperimentConfig& config);

std::string rows_to_csv(const std::vector<ReplicateRow>& rows);
std::vector<ReplicateRow> rows_from_csv(const std::string& text);

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
nlohmann::json report_to_json(const ExperimentReport& report);

}  // namespace mixlasso
