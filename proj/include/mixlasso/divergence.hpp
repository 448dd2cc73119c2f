#pragma once

#include "mixlasso/model.hpp"

#include <cstdint>

namespace mixlasso {

/// Monte-Carlo KL estimate, in nats.
struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
  std::uint64_t seed = 0;

  bool operator==(const KlEstimate&) const = default;
};

/// Per-row sample count used by the experiment harness unless overridden.
inline constexpr int kDefaultKlSamples = 20000;

/// Closed-form KL(N(mean_a, cov_a) || N(mean_b, cov_b)); clamped at 0.
double kl_gaussian(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                   const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b);

/// KL(s_truth(.|x) || s_candidate(.|x)) by plain Monte Carlo with draws from
/// the truth. std_error is the sample standard deviation over sqrt(n_samples).
KlEstimate kl_conditional_mc(const ModelParams& truth, const ModelParams& candidate,
                             const Eigen::Ref<const Eigen::VectorXd>& x, int n_samples,
                             std::uint64_t seed);

/// KL_n: average over design rows of kl_conditional_mc, row i using
/// derive_seed(seed, i). std_error = sqrt(sum_i se_i^2) / n.
KlEstimate kl_n(const ModelParams& truth, const ModelParams& candidate,
                const Eigen::MatrixXd& design, int n_samples, std::uint64_t seed);

}  // namespace mixlasso
