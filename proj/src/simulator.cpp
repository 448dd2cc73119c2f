#include "mixlasso/simulator.hpp"

#include "mixlasso/error.hpp"
#include "mixlasso/rng.hpp"
#include "mixlasso/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mixlasso {

std::string to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::IidUniform:
      return "iid-uniform";
    case DesignKind::IidGaussianClipped:
      return "iid-gaussian-clipped";
    case DesignKind::OrthogonalRows:
      return "orthogonal-rows";
  }
  return "unknown";
}

DesignKind parse_design_kind(const std::string& name) {
  for (DesignKind kind :
       {DesignKind::IidUniform, DesignKind::IidGaussianClipped, DesignKind::OrthogonalRows})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown design kind '" + name + "'");
}

void SimSpec::validate() const {
  if (n < 1 || p < 1 || q < 1 || k < 1) throw ConfigError("dimensions must be at least 1");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw ConfigError("sparsity must lie in [0, 1]");
  if (!(separation >= 0.0) || !std::isfinite(separation))
    throw ConfigError("separation must be finite and non-negative");
  box.validate_for(k);
  if (!(noise_scale >= box.eig_lower() && noise_scale <= box.eig_upper()))
    throw ConfigError("noise_scale " + std::to_string(noise_scale) +
                      " is outside the covariance eigenvalue interval [" +
                      std::to_string(box.eig_lower()) + ", " + std::to_string(box.eig_upper()) +
                      "]");
}

ModelParams make_ground_truth(const SimSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0));
  const long long total = static_cast<long long>(spec.k) * spec.q * spec.p;
  const long long zeros = std::llround(spec.sparsity * static_cast<double>(total));
  std::vector<long long> slots(total);
  std::iota(slots.begin(), slots.end(), 0LL);
  std::shuffle(slots.begin(), slots.end(), rng);

  std::vector<char> active(total, 0);
  for (long long s = zeros; s < total; ++s) active[slots[s]] = 1;

  std::uniform_real_distribution<double> magnitude(0.5, 1.0);
  std::bernoulli_distribution sign(0.5);
  const double row_l1 = std::min(spec.separation, spec.box.A_beta);
  std::vector<Eigen::MatrixXd> coef;
  std::vector<Eigen::MatrixXd> cov;
  long long slot = 0;
  for (int r = 0; r < spec.k; ++r) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(spec.q, spec.p);
    for (int z = 0; z < spec.q; ++z) {
      for (int j = 0; j < spec.p; ++j, ++slot) {
        if (!active[slot]) continue;
        const double v = magnitude(rng);
        b(z, j) = sign(rng) ? v : -v;
      }
      const double l1 = b.row(z).cwiseAbs().sum();
      if (l1 > 0.0) b.row(z) *= row_l1 / l1;
    }
    coef.push_back(std::move(b));
    cov.push_back(spec.noise_scale * Eigen::MatrixXd::Identity(spec.q, spec.q));
  }
  return ModelParams(Eigen::VectorXd::Constant(spec.k, 1.0 / spec.k), std::move(coef),
                     std::move(cov));
}

Eigen::MatrixXd sample_design(const SimSpec& spec) {
  if (spec.n < 1 || spec.p < 1) throw ConfigError("dimensions must be at least 1");
  Rng rng(derive_seed(spec.seed, 1));
  Eigen::MatrixXd x(spec.n, spec.p);
  switch (spec.design_kind) {
    case DesignKind::IidUniform: {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int j = 0; j < spec.p; ++j)
        for (int i = 0; i < spec.n; ++i) x(i, j) = u(rng);
      break;
    }
    case DesignKind::IidGaussianClipped: {
      std::normal_distribution<double> g(0.0, 0.5);
      for (int j = 0; j < spec.p; ++j)
        for (int i = 0; i < spec.n; ++i) x(i, j) = std::clamp(g(rng), -1.0, 1.0);
      break;
    }
    case DesignKind::OrthogonalRows: {
      std::normal_distribution<double> g;
      const bool wide = spec.n <= spec.p;
      Eigen::MatrixXd a(wide ? spec.p : spec.n, wide ? spec.n : spec.p);
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = g(rng);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
      const Eigen::MatrixXd q =
          qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
      x = wide ? Eigen::MatrixXd(q.transpose()) : q;
      break;
    }
  }
  return x;
}

ResponseSample sample_responses(const ModelParams& truth, const Eigen::MatrixXd& design,
                                std::uint64_t seed) {
  if (design.cols() != truth.p())
    throw ShapeError("design has " + std::to_string(design.cols()) + " columns, truth expects " +
                     std::to_string(truth.p()));
  Rng rng(seed);
  MixtureSampler sampler(truth);
  const auto n = design.rows();
  ResponseSample out{Eigen::MatrixXd(n, truth.q()), std::vector<int>(n)};
  Eigen::VectorXd y(truth.q());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd means = component_means(truth, design.row(i).transpose());
    out.labels[i] = sampler.draw(means, rng, y.data());
    out.responses.row(i) = y.transpose();
  }
  return out;
}

bool event_t_indicator(const Eigen::MatrixXd& responses, double m_n) {
  return responses.size() == 0 || responses.cwiseAbs().maxCoeff() <= m_n;
}

}  // namespace mixlasso
