#pragma once

#include "mixlasso/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mixlasso {

enum class DesignKind { IidUniform, IidGaussianClipped, OrthogonalRows };

std::string to_string(DesignKind kind);
/// Accepts "iid-uniform", "iid-gaussian-clipped", "orthogonal-rows".
DesignKind parse_design_kind(const std::string& name);

struct SimSpec {
  int n = 100;
  int p = 10;
  int q = 1;
  int k = 2;
  /// Fraction of coefficient entries that are zero.
  double sparsity = 0.5;
  DesignKind design_kind = DesignKind::IidUniform;
  /// Diagonal entry of every true covariance.
  double noise_scale = 1.0;
  /// l1 norm of every non-zero coefficient row, capped at A_beta.
  double separation = 1.0;
  std::uint64_t seed = 0;
  ParameterBox box;

  void validate() const;
};

/// Truth with uniform weights, covariances noise_scale * I and a support of
/// round(sparsity * k q p) zeros placed uniformly at random. Non-zero entries
/// are +-U[0.5, 1], then each row is scaled to l1 norm min(separation, A_beta),
/// which keeps |beta_{r,z} . x| <= A_beta for every x in [-1, 1]^p.
/// Uses derive_seed(spec.seed, 0).
ModelParams make_ground_truth(const SimSpec& spec);

/// n x p design with entries in [-1, 1]. OrthogonalRows: orthonormal rows
/// when n <= p, orthonormal columns otherwise. Uses derive_seed(spec.seed, 1).
Eigen::MatrixXd sample_design(const SimSpec& spec);

struct ResponseSample {
  Eigen::MatrixXd responses;  // n x q
  std::vector<int> labels;    // 0-based latent components
};

ResponseSample sample_responses(const ModelParams& truth, const Eigen::MatrixXd& design,
                                std::uint64_t seed);

/// True iff every |Y_{i,z}| <= m_n.
bool event_t_indicator(const Eigen::MatrixXd& responses, double m_n);

}  // namespace mixlasso
