#pragma once

#include "mixlasso/model.hpp"
#include "mixlasso/rng.hpp"

#include <random>
#include <vector>

namespace mixlasso {

/// Draws from y | x ~ sum_r pi_r N(mean_r, Sigma_r): a label from the weights,
/// then a Gaussian through the Cholesky factor of that component. Holds the
/// factors and a scratch buffer, so one instance per thread.
class MixtureSampler {
 public:
  explicit MixtureSampler(const ModelParams& params);

  /// Writes q coordinates to `y` and returns the 0-based component label.
  /// `means` is q x k, as returned by component_means.
  int draw(const Eigen::MatrixXd& means, Rng& rng, double* y);

 private:
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> cumulative_;
  std::vector<double> z_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace mixlasso
