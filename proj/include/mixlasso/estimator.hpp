#pragma once

#include "mixlasso/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mixlasso {

enum class StepRule { Fixed, Backtracking };
enum class InitStrategy { RandomInBox, ResponsibilitySplit };

struct FitConfig {
  double lambda = 0.0;
  int max_em_iters = 500;
  /// Stop when (previous - current) <= em_tol * max(1, |previous|).
  double em_tol = 1e-8;
  int inner_prox_iters = 100;
  StepRule prox_step_rule = StepRule::Backtracking;
  int n_restarts = 3;
  InitStrategy init_strategy = InitStrategy::ResponsibilitySplit;
  std::uint64_t seed = 0;
  ParameterBox box;

  void validate() const;
};

struct FitResult {
  ModelParams params;
  double lambda = 0.0;
  /// Penalized objective at the initial point and after every EM iteration
  /// since the last component re-initialization.
  std::vector<double> objective_trace;
  bool converged = false;
  int n_iters = 0;
  /// Median minus best final objective across the candidate runs.
  double slack_eta = 0.0;
  /// Candidate that produced the fit; -1 for the zero-coefficient fit.
  int restart_index = 0;
  int reinit_count = 0;

  double objective() const { return objective_trace.back(); }
};

/// (-1/n) sum_i log s(y_i | x_i) + lambda * l1_norm(params). A zero penalty
/// contributes nothing even when lambda is infinite.
double penalized_nll(const ModelParams& params, const Dataset& data, double lambda);

/// n x k matrix of log(pi_r N(y_i; beta_r x_i, Sigma_r)).
Eigen::MatrixXd component_log_matrix(const ModelParams& params, const Dataset& data);

/// Posterior component probabilities; each row sums to one.
Eigen::MatrixXd e_step(const ModelParams& params, const Dataset& data);

/// One penalized M-step from responsibilities `resp`.
///
/// Weights: constrained maximizer of sum_r n_r log pi_r (project_weights).
/// Coefficients of component r: proximal gradient on the responsibility-
/// weighted Gaussian loss with Sigma_r from `prev` and soft-threshold level
/// lambda * n / n_r, started at prev's coefficients; the result is pulled back
/// along the segment towards prev's coefficients until the design-row mean
/// bound holds. Covariances: weighted residual covariance at the new
/// coefficients with eigenvalues clipped to the box. Each block can only
/// lower the EM surrogate. Throws DegenerateComponentError when n_r < 1e-8.
ModelParams m_step(const Eigen::MatrixXd& resp, const Dataset& data, double lambda,
                   const ParameterBox& box, const ModelParams& prev, const FitConfig& config);

/// A single EM run from `init` (projected to the box first) at config.lambda.
FitResult fit_from(const Dataset& data, const ModelParams& init, const FitConfig& config);

/// EM with every coefficient pinned at zero (the lambda = infinity fit).
FitResult fit_null(const Dataset& data, int k, const FitConfig& config);

/// Smallest lambda at which zero coefficients satisfy the stationarity
/// condition at `zero_fit`: max_{r,z,j} |(1/n) sum_i tau_ir (Sigma_r^{-1} y_i)_z x_ij|.
double zero_coefficient_threshold(const ModelParams& zero_fit, const Dataset& data);

/// The l1-penalized estimator at config.lambda. At or above the
/// zero-coefficient threshold it returns the zero-coefficient fit; below it,
/// the best of config.n_restarts initializations plus a continuation of the
/// zero-coefficient fit (lowest objective, ties to the lowest index).
/// Components are reported in align_labels order.
FitResult fit_lasso(const Dataset& data, int k, const FitConfig& config);

struct LambdaPath {
  std::vector<FitResult> fits;
  double lambda_max = 0.0;
};

/// Fits along a strictly descending grid. Grid values at or above lambda_max
/// get the zero-coefficient fit; the first value below it is fitted exactly as
/// fit_lasso; every later value is warm-started from the previous fit.
LambdaPath lambda_path(const Dataset& data, int k, std::span<const double> grid,
                       const FitConfig& config);

/// Components ordered by the l1 norm of their first coefficient row, descending (stable).
ModelParams align_labels(const ModelParams& params);

/// Row-wise argmax of e_step (lowest index on ties).
std::vector<int> hard_labels(const ModelParams& params, const Dataset& data);

}  // namespace mixlasso
