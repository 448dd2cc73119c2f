#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace mixlasso {

/// Bound constants of the admissible parameter set.
///
/// Covariances are constrained through their spectrum: every eigenvalue of
/// Sigma_r must lie in [eig_lower(), eig_upper()], which folds the bounds on
/// Sigma_r (a_sigma_tilde, A_sigma_tilde) and on Sigma_r^{-1} (a_sigma, A_sigma)
/// into one interval. Mean bounds are interpreted over the rows of a design:
/// max_i |beta_{r,z} . x_i| <= A_beta.
struct ParameterBox {
  double a_beta = 0.0;         // lower bound on |beta_{r,z} . x| (advisory)
  double A_beta = 1.0;         // upper bound on |beta_{r,z} . x|
  double a_sigma = 1.0;        // lower bound for Sigma^{-1}
  double A_sigma = 1.0;        // upper bound for Sigma^{-1}
  double a_sigma_tilde = 1.0;  // lower bound for Sigma
  double A_sigma_tilde = 1.0;  // upper bound for Sigma
  double a_pi = 0.0;           // lower bound on mixture weights

  double eig_lower() const;
  double eig_upper() const;

  /// Throws ConfigError unless every bound is positive and ordered and the
  /// eigenvalue interval is non-empty.
  void validate() const;
  /// validate() plus k * a_pi <= 1.
  void validate_for(int k) const;
};

/// Parameters xi = (pi, beta, Sigma) of a k-component mixture of Gaussian
/// regressions y | x ~ sum_r pi_r N(beta_r x, Sigma_r). Immutable; the
/// constructor validates shapes and the SPD/simplex invariants and caches the
/// Cholesky factors used by every density evaluation.
class ModelParams {
 public:
  ModelParams(Eigen::VectorXd weights, std::vector<Eigen::MatrixXd> coefficients,
              std::vector<Eigen::MatrixXd> covariances);

  int k() const { return static_cast<int>(weights_.size()); }
  int p() const { return p_; }
  int q() const { return q_; }

  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<Eigen::MatrixXd>& coefficients() const { return coefficients_; }
  const Eigen::MatrixXd& coefficients(int r) const { return coefficients_[r]; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }
  const Eigen::MatrixXd& covariance(int r) const { return covariances_[r]; }

  /// Sigma_r^{-1}.
  const Eigen::MatrixXd& precision(int r) const { return precisions_[r]; }
  /// L_r^{-1} where Sigma_r = L_r L_r^T, lower triangular.
  const Eigen::MatrixXd& inverse_cholesky(int r) const { return inv_chol_[r]; }
  /// log pi_r - (q/2) log(2 pi) - (1/2) log det Sigma_r.
  double log_normalizer(int r) const { return log_norm_[r]; }

  bool operator==(const ModelParams& other) const;

 private:
  Eigen::VectorXd weights_;
  std::vector<Eigen::MatrixXd> coefficients_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::MatrixXd> precisions_;
  std::vector<Eigen::MatrixXd> inv_chol_;
  std::vector<double> log_norm_;
  int p_ = 0;
  int q_ = 0;
};

/// Fixed design X (n x p) with responses Y (n x q).
class Dataset {
 public:
  Dataset(Eigen::MatrixXd design, Eigen::MatrixXd responses);

  int n() const { return static_cast<int>(design_.rows()); }
  int p() const { return static_cast<int>(design_.cols()); }
  int q() const { return static_cast<int>(responses_.cols()); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::MatrixXd& responses() const { return responses_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::MatrixXd responses_;
};

/// log sum_i exp(v_i). Terms below max - 700 are dropped. The terms are summed
/// in sorted order, so the result does not depend on the order of `values`.
double log_sum_exp(std::span<const double> values);

/// Sum that does not depend on the order of its inputs.
double ordered_sum(std::span<const double> values);

/// Per-component log(pi_r N(y; means.col(r), Sigma_r)) for precomputed means
/// (q x k). `out` must have k entries; `scratch` at least q. Allocation-free.
void component_log_terms(const ModelParams& params, const Eigen::MatrixXd& means,
                         const double* y, double* out, double* scratch);

/// Component means beta_r x as the columns of a q x k matrix.
Eigen::MatrixXd component_means(const ModelParams& params,
                                const Eigen::Ref<const Eigen::VectorXd>& x);

/// log s_xi(y | x).
double mixture_log_density(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y);

/// Sum of |beta_{r,z,j}| over every coefficient; weights and covariances excluded.
double l1_norm(const ModelParams& params);

/// Partial derivatives of log s_xi(y|x). Every entry of every Sigma_r and
/// every pi_r is treated as a free coordinate (no simplex or symmetry
/// constraint), matching a perturbation of that single entry.
struct LogDensityGradient {
  std::vector<Eigen::VectorXd> mean;        // d/d(beta_r x), q-vector per component
  std::vector<Eigen::MatrixXd> covariance;  // d/d(Sigma_r)_{ab}, q x q per component
  Eigen::VectorXd weight;                   // d/d pi_r

  double max_abs() const;
};

LogDensityGradient log_density_gradient(const ModelParams& params,
                                        const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXd>& y);

/// C_y = max(1/a_pi, A_sigma + (|y|+A_beta)^2 A_sigma^2 / 2, q (|y|+A_beta) A_sigma / 2)
/// evaluated at |y| = y_sup.
double gradient_bound_constant(const ParameterBox& box, int q, double y_sup);

/// Maximizer of sum_r mass_r log pi_r over {pi_r >= a_pi, sum pi_r = 1}:
/// clip the smallest weights to a_pi and rescale the rest proportionally.
/// Weights already feasible (within tolerance) are returned bit-for-bit.
Eigen::VectorXd project_weights(const Eigen::VectorXd& mass, double a_pi);

/// Symmetrize and clip eigenvalues to [lower, upper], keeping eigenvectors.
/// Matrices already inside (within tolerance) are returned bit-for-bit.
Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& matrix, double lower, double upper);

/// Nearest feasible parameters: weights via project_weights, covariances via
/// clip_eigenvalues, and every coefficient row rescaled so that
/// max_i |beta_{r,z} . x_i| <= A_beta over the design rows. Idempotent.
ModelParams project_to_box(const ModelParams& params, const ParameterBox& box,
                           const Eigen::MatrixXd& design);

enum class Constraint {
  WeightLower,
  CovarianceAsymmetry,
  CovarianceLower,
  CovarianceUpper,
  MeanUpper,
  MeanLower,
};

std::string to_string(Constraint c);

struct BoxViolation {
  Constraint constraint;
  int component;  // 0-based
  double value;   // offending value
  double limit;   // bound it violates
};

/// Enforced constraints only: weights, covariance spectrum, mean upper bound.
/// Empty iff `params` is feasible for `box` with respect to `design`'s rows.
std::vector<BoxViolation> check_box_membership(const ModelParams& params, const ParameterBox& box,
                                               const Eigen::MatrixXd& design);

/// Components whose smallest mean coordinate over the design falls below
/// a_beta. Reported separately: the lower mean bound is not convex and is not
/// enforced by projection or estimation.
std::vector<BoxViolation> mean_lower_bound_shortfalls(const ModelParams& params,
                                                      const ParameterBox& box,
                                                      const Eigen::MatrixXd& design);

}  // namespace mixlasso
