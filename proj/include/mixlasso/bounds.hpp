#pragma once

#include "mixlasso/model.hpp"

#include <cstdint>

namespace mixlasso {

/// Default constants of the oracle inequality: the concentration step needs
/// kappa >= 36, and 332 is the explicit remainder constant of the truncated
/// risk bound.
inline constexpr double kDefaultKappa = 36.0;
inline constexpr double kDefaultKappaPrime = 332.0;

/// Sample size together with its logarithm. `from_log` builds a synthetic
/// value for evaluating the formulas at an exact real-valued log n.
class SampleSize {
 public:
  static SampleSize of(std::int64_t n);
  static SampleSize from_log(double log_n);

  double n() const { return n_; }
  double log_n() const { return log_n_; }

 private:
  SampleSize(double n, double log_n) : n_(n), log_n_(log_n) {}
  double n_;
  double log_n_;
};

/// sqrt((1/n) sum_i max_j x_{ij}^2).
double x_max_n(const Eigen::MatrixXd& design);

/// Truncation level M_n = A_beta + sqrt(A_beta^2 + 4 log(n) / a_sigma), the
/// positive root of log(n) - (M^2 - 2 M A_beta) a_sigma / 4.
double m_n(const ParameterBox& box, SampleSize n);

/// C_{M_n}: gradient_bound_constant at |y| = M_n.
double c_mn(const ParameterBox& box, double m_n, int q);

/// (A_sigma v 1/a_pi)(1 + 4(q+1) A_sigma (A_beta^2 + log(n)/a_sigma)); bounds c_mn at m_n(box, n).
double c_mn_majorant(const ParameterBox& box, SampleSize n, int q);

/// Sup-norm envelope R_n = 2 C_{M_n} (1 + k (A_beta + A_sigma_tilde)).
double r_n(const ParameterBox& box, int k, double c_mn);

/// Delta_m = m ||x||_{max,n} log(n) sqrt(k log(2p+1)) + 6 (1 + k (A_beta + A_sigma_tilde)).
double delta_m(double m, double x_max_n, SampleSize n, int k, int p, const ParameterBox& box);

/// Natural log of the delta-packing bound
/// (2p+1)^{4 C^2 k^2 q^2 m^2 ||x||^2 / delta^2} (1 + 8 C q^2 k A_sigma / delta)^k (1 + 8 C / delta)^k.
double log_packing_bound(double delta, double m, double c_mn, int k, int p, int q, double x_max_n,
                         double A_sigma);

/// Smallest admissible lambda of the l1 oracle inequality.
double lambda_threshold(const ParameterBox& box, SampleSize n, int p, int q, int k,
                        double x_max_n, double kappa);

/// (4 C_{M_n} / sqrt(n)) sqrt(k) (1 + 9 q ||x|| log(n) sqrt(k log(2p+1))), with C at m_n(box, n):
/// the threshold required on the truncation event alone.
double truncated_lambda_threshold(const ParameterBox& box, SampleSize n, int p, int q, int k,
                                  double x_max_n);

/// Bound on E[KL_n 1_{T^c}] as stated:
/// e^{-1/2} pi^{q/2} (q A_sigma)^{-q/2} sqrt(2 k n q a_pi) exp(-(M^2 - 2 M A_beta + a_beta^2) a_sigma / 4).
double tail_bound(const ParameterBox& box, SampleSize n, int k, int q, double m_n);

/// Bound on P(T^c) reached at the end of its derivation:
/// 2 k n q a_pi exp(-(M^2 - 2 M A_beta + a_beta^2) a_sigma / 2).
double tail_bound_proof(const ParameterBox& box, SampleSize n, int k, int q, double m_n);

enum class RemainderVariant {
  /// (1+1/kappa)(KL + lambda l1) + lambda + sqrt(k/n) kappa' [G a_pi sqrt(2q) + B k (1+A_beta+At)^2].
  OracleInequality,
  /// Model-selection form: G sqrt(2 q a_pi) and kappa'^2 k B' (1+A_beta+At)^2 with the (q+1)/2 factor.
  ModelSelection,
};

struct OracleSetting {
  ParameterBox box;
  SampleSize n = SampleSize::of(2);
  int p = 1;
  int q = 1;
  int k = 1;
  double x_max_n = 1.0;
  double kappa = kDefaultKappa;
  double kappa_prime = kDefaultKappaPrime;
};

struct OracleTerms {
  double approximation_term = 0.0;  // (1 + 1/kappa) KL_n(s_0, s_ref)
  double lambda_term = 0.0;         // (1 + 1/kappa) lambda |s_ref|_1 + lambda
  double remainder_term = 0.0;      // sqrt(k/n) kappa' [...]
};

struct BoundReport {
  double x_max_n = 0.0;
  double m_n = 0.0;
  double c_mn = 0.0;
  double r_n = 0.0;
  double lambda_min = 0.0;
  double lambda = 0.0;
  double kappa = 0.0;
  double kappa_prime = 0.0;
  OracleTerms oracle_rhs_terms;
  double oracle_rhs_total = 0.0;
  double tail_bound = 0.0;
  double tail_bound_proof = 0.0;
  /// Set when lambda < lambda_min; the inequality is then not guaranteed.
  bool below_threshold = false;
  RemainderVariant variant = RemainderVariant::OracleInequality;
};

/// Assemble the right-hand side of the oracle inequality for a reference
/// model with KL_n(s_0, s_ref) = kl_ref and |s_ref|_1 = l1_ref.
BoundReport oracle_rhs(const OracleSetting& setting, double lambda, double kl_ref, double l1_ref,
                       RemainderVariant variant = RemainderVariant::OracleInequality);

}  // namespace mixlasso
