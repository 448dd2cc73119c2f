#include "mixlasso/bounds.hpp"

#include "mixlasso/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mixlasso {

namespace {

double sigma_or_weight(const ParameterBox& box) { return std::max(box.A_sigma, 1.0 / box.a_pi); }

// sqrt(k log(2p+1))
double entropy_factor(int k, int p) { return std::sqrt(k * std::log(2.0 * p + 1.0)); }

// e^{-1/2} pi^{q/2} / (q A_sigma)^{q/2}
double kl_cap(const ParameterBox& box, int q) {
  const double half_q = 0.5 * q;
  return std::exp(-0.5) * std::pow(std::numbers::pi, half_q) / std::pow(q * box.A_sigma, half_q);
}

double tail_exponent(const ParameterBox& box, double m_n) {
  return (m_n * m_n - 2.0 * m_n * box.A_beta + box.a_beta * box.a_beta) * box.a_sigma;
}

}  // namespace

SampleSize SampleSize::of(std::int64_t n) {
  if (n < 1) throw ArgumentError("sample size must be positive");
  return SampleSize(static_cast<double>(n), std::log(static_cast<double>(n)));
}

SampleSize SampleSize::from_log(double log_n) {
  if (!std::isfinite(log_n) || log_n < 0.0) throw ArgumentError("log n must be finite and >= 0");
  return SampleSize(std::exp(log_n), log_n);
}

double x_max_n(const Eigen::MatrixXd& design) {
  if (design.rows() < 1 || design.cols() < 1) throw ArgumentError("x_max_n: empty design");
  return std::sqrt(design.cwiseAbs().rowwise().maxCoeff().squaredNorm() /
                   static_cast<double>(design.rows()));
}

double m_n(const ParameterBox& box, SampleSize n) {
  if (!(n.log_n() > 0.0)) throw ArgumentError("m_n: need n >= 2");
  return box.A_beta + std::sqrt(box.A_beta * box.A_beta + 4.0 * n.log_n() / box.a_sigma);
}

double c_mn(const ParameterBox& box, double m_n, int q) {
  return gradient_bound_constant(box, q, std::abs(m_n));
}

double c_mn_majorant(const ParameterBox& box, SampleSize n, int q) {
  return sigma_or_weight(box) *
         (1.0 + 4.0 * (q + 1) * box.A_sigma * (box.A_beta * box.A_beta + n.log_n() / box.a_sigma));
}

double r_n(const ParameterBox& box, int k, double c_mn) {
  return 2.0 * c_mn * (1.0 + k * (box.A_beta + box.A_sigma_tilde));
}

double delta_m(double m, double x_max_n, SampleSize n, int k, int p, const ParameterBox& box) {
  return m * x_max_n * n.log_n() * entropy_factor(k, p) +
         6.0 * (1.0 + k * (box.A_beta + box.A_sigma_tilde));
}

double log_packing_bound(double delta, double m, double c_mn, int k, int p, int q, double x_max_n,
                         double A_sigma) {
  if (!(delta > 0.0)) throw ArgumentError("log_packing_bound: delta must be positive");
  const double ckqmx = c_mn * k * q * m * x_max_n;
  const double exponent = 4.0 * ckqmx * ckqmx / (delta * delta);
  return exponent * std::log(2.0 * p + 1.0) +
         k * std::log1p(8.0 * c_mn * q * q * k * A_sigma / delta) +
         k * std::log1p(8.0 * c_mn / delta);
}

double lambda_threshold(const ParameterBox& box, SampleSize n, int p, int q, int k,
                        double x_max_n, double kappa) {
  return kappa * c_mn_majorant(box, n, q) * std::sqrt(k / n.n()) *
         (1.0 + q * x_max_n * n.log_n() * entropy_factor(k, p));
}

double truncated_lambda_threshold(const ParameterBox& box, SampleSize n, int p, int q, int k,
                                  double x_max_n) {
  const double c = c_mn(box, m_n(box, n), q);
  return 4.0 * c / std::sqrt(n.n()) * std::sqrt(static_cast<double>(k)) *
         (1.0 + 9.0 * q * x_max_n * n.log_n() * entropy_factor(k, p));
}

double tail_bound(const ParameterBox& box, SampleSize n, int k, int q, double m_n) {
  return kl_cap(box, q) * std::sqrt(2.0 * k * n.n() * q * box.a_pi) *
         std::exp(-0.25 * tail_exponent(box, m_n));
}

double tail_bound_proof(const ParameterBox& box, SampleSize n, int k, int q, double m_n) {
  return 2.0 * k * n.n() * q * box.a_pi * std::exp(-0.5 * tail_exponent(box, m_n));
}

BoundReport oracle_rhs(const OracleSetting& s, double lambda, double kl_ref, double l1_ref,
                       RemainderVariant variant) {
  const ParameterBox& box = s.box;
  BoundReport report;
  report.variant = variant;
  report.x_max_n = s.x_max_n;
  report.m_n = m_n(box, s.n);
  report.c_mn = c_mn(box, report.m_n, s.q);
  report.r_n = r_n(box, s.k, report.c_mn);
  report.lambda_min = lambda_threshold(box, s.n, s.p, s.q, s.k, s.x_max_n, s.kappa);
  report.lambda = lambda;
  report.kappa = s.kappa;
  report.kappa_prime = s.kappa_prime;
  report.below_threshold = lambda < report.lambda_min;
  report.tail_bound = tail_bound(box, s.n, s.k, s.q, report.m_n);
  report.tail_bound_proof = tail_bound_proof(box, s.n, s.k, s.q, report.m_n);

  const double inflate = 1.0 + 1.0 / s.kappa;
  OracleTerms& t = report.oracle_rhs_terms;
  t.approximation_term = inflate * kl_ref;
  t.lambda_term = inflate * lambda * l1_ref + lambda;

  const double spread = 1.0 + box.A_beta + box.A_sigma_tilde;
  const double gauss = std::exp(-0.5 - 0.25 * box.a_beta * box.a_beta * box.a_sigma) *
                       std::pow(std::numbers::pi, 0.5 * s.q) /
                       std::pow(s.q * box.A_sigma, 0.5 * s.q);
  double bracket = 0.0;
  if (variant == RemainderVariant::OracleInequality) {
    bracket = gauss * box.a_pi * std::sqrt(2.0 * s.q) +
              c_mn_majorant(box, s.n, s.q) * s.k * spread * spread;
  } else {
    const double halved = sigma_or_weight(box) *
                          (1.0 + 2.0 * (s.q + 1) * box.A_sigma *
                                     (box.A_beta * box.A_beta + s.n.log_n() / box.a_sigma));
    bracket = gauss * std::sqrt(2.0 * s.q * box.a_pi) +
              s.kappa_prime * s.k * halved * spread * spread;
  }
  t.remainder_term = std::sqrt(s.k / s.n.n()) * s.kappa_prime * bracket;
  report.oracle_rhs_total = t.approximation_term + t.lambda_term + t.remainder_term;
  return report;
}

}  // namespace mixlasso
