#include "mixlasso/divergence.hpp"

#include "mixlasso/error.hpp"
#include "mixlasso/rng.hpp"
#include "mixlasso/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace mixlasso {

MixtureSampler::MixtureSampler(const ModelParams& params) : z_(params.q()) {
  double acc = 0.0;
  for (int r = 0; r < params.k(); ++r) {
    chol_.push_back(Eigen::LLT<Eigen::MatrixXd>(params.covariance(r)).matrixL());
    acc += params.weights()[r];
    cumulative_.push_back(acc);
  }
}

int MixtureSampler::draw(const Eigen::MatrixXd& means, Rng& rng, double* y) {
  const double u = uniform_(rng) * cumulative_.back();
  int label = 0;
  const int k = static_cast<int>(cumulative_.size());
  while (label + 1 < k && u >= cumulative_[label]) ++label;
  const int q = static_cast<int>(z_.size());
  for (int a = 0; a < q; ++a) z_[a] = normal_(rng);
  const Eigen::MatrixXd& l = chol_[label];
  for (int a = 0; a < q; ++a) {
    double v = means(a, label);
    for (int b = 0; b <= a; ++b) v += l(a, b) * z_[b];
    y[a] = v;
  }
  return label;
}

double kl_gaussian(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                   const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b) {
  const auto q = mean_a.size();
  if (mean_b.size() != q || cov_a.rows() != q || cov_a.cols() != q || cov_b.rows() != q ||
      cov_b.cols() != q)
    throw ShapeError("kl_gaussian: inconsistent dimensions");
  Eigen::LLT<Eigen::MatrixXd> la(cov_a);
  Eigen::LLT<Eigen::MatrixXd> lb(cov_b);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success ||
      !(cov_a - cov_a.transpose()).isZero(1e-10) || !(cov_b - cov_b.transpose()).isZero(1e-10))
    throw DomainError("kl_gaussian: covariances must be symmetric positive definite");
  const Eigen::MatrixXd lower_a = la.matrixL();
  const Eigen::MatrixXd lower_b = lb.matrixL();
  // tr(Sb^{-1} Sa) = ||Lb^{-1} La||_F^2
  const Eigen::MatrixXd m = lower_b.triangularView<Eigen::Lower>().solve(lower_a);
  const Eigen::VectorXd d = lower_b.triangularView<Eigen::Lower>().solve(mean_b - mean_a);
  const double log_det_ratio =
      2.0 * (lower_b.diagonal().array().log().sum() - lower_a.diagonal().array().log().sum());
  const double kl =
      0.5 * (m.squaredNorm() + d.squaredNorm() - static_cast<double>(q) + log_det_ratio);
  return std::max(kl, 0.0);
}

namespace {

void check_pair(const ModelParams& truth, const ModelParams& candidate) {
  if (truth.q() != candidate.q() || truth.p() != candidate.p())
    throw ShapeError("KL: truth and candidate must share p and q");
}

KlEstimate conditional_mc(const ModelParams& truth, const ModelParams& candidate,
                          const Eigen::Ref<const Eigen::VectorXd>& x, int n_samples,
                          std::uint64_t seed) {
  const Eigen::MatrixXd means_t = component_means(truth, x);
  const Eigen::MatrixXd means_c = component_means(candidate, x);
  MixtureSampler sampler(truth);
  Rng rng(seed);
  const int q = truth.q();
  std::vector<double> y(q), scratch(q), terms_t(truth.k()), terms_c(candidate.k());

  // Welford accumulation of the log-ratio.
  double mean = 0.0;
  double m2 = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    sampler.draw(means_t, rng, y.data());
    component_log_terms(truth, means_t, y.data(), terms_t.data(), scratch.data());
    component_log_terms(candidate, means_c, y.data(), terms_c.data(), scratch.data());
    const double diff = log_sum_exp(terms_t) - log_sum_exp(terms_c);
    const double delta = diff - mean;
    mean += delta / (s + 1);
    m2 += delta * (diff - mean);
  }
  if (!std::isfinite(mean)) throw DomainError("KL: candidate density vanished on a truth draw");
  const double sd = n_samples > 1 ? std::sqrt(m2 / (n_samples - 1)) : 0.0;
  return {mean, sd / std::sqrt(static_cast<double>(n_samples)), n_samples, seed};
}

}  // namespace

KlEstimate kl_conditional_mc(const ModelParams& truth, const ModelParams& candidate,
                             const Eigen::Ref<const Eigen::VectorXd>& x, int n_samples,
                             std::uint64_t seed) {
  if (n_samples < 1) throw ArgumentError("kl_conditional_mc: n_samples must be at least 1");
  check_pair(truth, candidate);
  return conditional_mc(truth, candidate, x, n_samples, seed);
}

KlEstimate kl_n(const ModelParams& truth, const ModelParams& candidate,
                const Eigen::MatrixXd& design, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ArgumentError("kl_n: n_samples must be at least 1");
  if (design.rows() < 1) throw ArgumentError("kl_n: empty design");
  check_pair(truth, candidate);
  const auto n = design.rows();
  double sum = 0.0;
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = design.row(i).transpose();
    const KlEstimate row =
        conditional_mc(truth, candidate, x, n_samples, derive_seed(seed, static_cast<std::uint64_t>(i)));
    sum += row.value;
    var += row.std_error * row.std_error;
  }
  const double nd = static_cast<double>(n);
  return {sum / nd, std::sqrt(var) / nd, n_samples, seed};
}

}  // namespace mixlasso
