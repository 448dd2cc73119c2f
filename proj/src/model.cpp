#include "mixlasso/model.hpp"

#include "mixlasso/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace mixlasso {

namespace {

// Relative slack used by every feasibility test, so that the output of a
// projection is recognised as feasible despite rounding.
constexpr double kBoxTolerance = 1e-10;
constexpr double kWeightSumTolerance = 1e-12;
constexpr double kAsymmetryTolerance = 1e-10;
// exp(-700) is below the double-precision contribution of any retained term.
constexpr double kLogUnderflow = 700.0;

double max_asymmetry(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

double ParameterBox::eig_lower() const { return std::max(1.0 / A_sigma, a_sigma_tilde); }

double ParameterBox::eig_upper() const { return std::min(A_sigma_tilde, 1.0 / a_sigma); }

void ParameterBox::validate() const {
  const auto ordered = [](double lo, double hi) { return lo > 0.0 && lo <= hi && std::isfinite(hi); };
  if (!ordered(a_beta, A_beta)) throw ConfigError("box: need 0 < a_beta <= A_beta");
  if (!ordered(a_sigma, A_sigma)) throw ConfigError("box: need 0 < a_sigma <= A_sigma");
  if (!ordered(a_sigma_tilde, A_sigma_tilde))
    throw ConfigError("box: need 0 < a_sigma_tilde <= A_sigma_tilde");
  if (!(a_pi > 0.0 && a_pi <= 1.0)) throw ConfigError("box: need 0 < a_pi <= 1");
  if (eig_lower() > eig_upper())
    throw ConfigError("box: empty covariance spectrum interval [max(1/A_sigma, a_sigma_tilde), "
                      "min(A_sigma_tilde, 1/a_sigma)]");
}

void ParameterBox::validate_for(int k) const {
  validate();
  if (k < 1) throw ConfigError("box: k must be positive");
  if (k * a_pi > 1.0 + kWeightSumTolerance)
    throw ConfigError("box: k * a_pi = " + std::to_string(k * a_pi) + " exceeds 1");
}

ModelParams::ModelParams(Eigen::VectorXd weights, std::vector<Eigen::MatrixXd> coefficients,
                         std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)),
      coefficients_(std::move(coefficients)),
      covariances_(std::move(covariances)) {
  const auto k = static_cast<std::size_t>(weights_.size());
  if (k == 0) throw ShapeError("ModelParams: k must be at least 1");
  if (coefficients_.size() != k || covariances_.size() != k)
    throw ShapeError("ModelParams: expected " + std::to_string(k) +
                     " coefficient and covariance matrices");
  q_ = static_cast<int>(coefficients_[0].rows());
  p_ = static_cast<int>(coefficients_[0].cols());
  if (q_ < 1 || p_ < 1) throw ShapeError("ModelParams: p and q must be at least 1");
  for (std::size_t r = 0; r < k; ++r) {
    if (coefficients_[r].rows() != q_ || coefficients_[r].cols() != p_)
      throw ShapeError("ModelParams: coefficient matrix " + std::to_string(r) + " is not q x p");
    if (covariances_[r].rows() != q_ || covariances_[r].cols() != q_)
      throw ShapeError("ModelParams: covariance " + std::to_string(r) + " is not q x q");
    if (!all_finite(coefficients_[r]) || !all_finite(covariances_[r]))
      throw DomainError("ModelParams: non-finite parameter in component " + std::to_string(r));
  }
  if (!weights_.allFinite() || weights_.minCoeff() <= 0.0)
    throw DomainError("ModelParams: weights must be positive");
  std::vector<double> w(weights_.data(), weights_.data() + k);
  if (std::abs(ordered_sum(w) - 1.0) > kWeightSumTolerance)
    throw DomainError("ModelParams: weights must sum to 1");

  precisions_.reserve(k);
  inv_chol_.reserve(k);
  log_norm_.reserve(k);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t r = 0; r < k; ++r) {
    const Eigen::MatrixXd& cov = covariances_[r];
    if (max_asymmetry(cov) > kAsymmetryTolerance)
      throw DomainError("ModelParams: covariance " + std::to_string(r) + " is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0)
      throw DomainError("ModelParams: covariance " + std::to_string(r) + " is not positive definite");
    const Eigen::MatrixXd lower = llt.matrixL();
    Eigen::MatrixXd inv = lower.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(q_, q_));
    inv.triangularView<Eigen::StrictlyUpper>().setZero();
    precisions_.push_back(inv.transpose() * inv);
    inv_chol_.push_back(std::move(inv));
    const double log_det = 2.0 * lower.diagonal().array().log().sum();
    log_norm_.push_back(std::log(weights_[r]) - 0.5 * q_ * log_2pi - 0.5 * log_det);
  }
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (k() != other.k() || p() != other.p() || q() != other.q()) return false;
  if (weights_ != other.weights_) return false;
  for (int r = 0; r < k(); ++r) {
    if (coefficients_[r] != other.coefficients_[r]) return false;
    if (covariances_[r] != other.covariances_[r]) return false;
  }
  return true;
}

Dataset::Dataset(Eigen::MatrixXd design, Eigen::MatrixXd responses)
    : design_(std::move(design)), responses_(std::move(responses)) {
  if (design_.rows() < 1) throw ShapeError("Dataset: need at least one row");
  if (design_.rows() != responses_.rows())
    throw ShapeError("Dataset: design has " + std::to_string(design_.rows()) +
                     " rows but responses have " + std::to_string(responses_.rows()));
  if (design_.cols() < 1 || responses_.cols() < 1)
    throw ShapeError("Dataset: p and q must be at least 1");
  if (!design_.allFinite() || !responses_.allFinite())
    throw DomainError("Dataset: non-finite entry");
}

namespace {

// Sorts `buf[0..n)` ascending and sums it; insertion sort, n is a component count.
double sorted_sum_inplace(double* buf, std::size_t n) {
  for (std::size_t i = 1; i < n; ++i) {
    const double v = buf[i];
    std::size_t j = i;
    for (; j > 0 && buf[j - 1] > v; --j) buf[j] = buf[j - 1];
    buf[j] = v;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += buf[i];
  return s;
}

constexpr std::size_t kSmallBuffer = 32;

}  // namespace

double ordered_sum(std::span<const double> values) {
  if (values.size() <= kSmallBuffer) {
    std::array<double, kSmallBuffer> buf;
    std::copy(values.begin(), values.end(), buf.begin());
    return sorted_sum_inplace(buf.data(), values.size());
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  std::array<double, kSmallBuffer> small;
  std::vector<double> large;
  double* kept = small.data();
  if (values.size() > kSmallBuffer) {
    large.resize(values.size());
    kept = large.data();
  }
  std::size_t n = 0;
  for (double v : values)
    if (v >= top - kLogUnderflow) kept[n++] = std::exp(v - top);
  return top + std::log(sorted_sum_inplace(kept, n));
}

void component_log_terms(const ModelParams& params, const Eigen::MatrixXd& means, const double* y,
                         double* out, double* scratch) {
  const int q = params.q();
  for (int r = 0; r < params.k(); ++r) {
    const Eigen::MatrixXd& inv = params.inverse_cholesky(r);
    for (int a = 0; a < q; ++a) scratch[a] = y[a] - means(a, r);
    double quad = 0.0;
    for (int a = 0; a < q; ++a) {
      double z = 0.0;
      for (int b = 0; b <= a; ++b) z += inv(a, b) * scratch[b];
      quad += z * z;
    }
    out[r] = params.log_normalizer(r) - 0.5 * quad;
  }
}

Eigen::MatrixXd component_means(const ModelParams& params,
                                const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != params.p())
    throw ShapeError("covariate vector has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(params.p()));
  Eigen::MatrixXd means(params.q(), params.k());
  for (int r = 0; r < params.k(); ++r) means.col(r) = params.coefficients(r) * x;
  return means;
}

namespace {

std::vector<double> log_terms(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != params.q())
    throw ShapeError("response vector has length " + std::to_string(y.size()) + ", expected " +
                     std::to_string(params.q()));
  const Eigen::MatrixXd means = component_means(params, x);
  const Eigen::VectorXd yv = y;
  std::vector<double> terms(params.k());
  std::vector<double> scratch(params.q());
  component_log_terms(params, means, yv.data(), terms.data(), scratch.data());
  return terms;
}

}  // namespace

double mixture_log_density(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y) {
  return log_sum_exp(log_terms(params, x, y));
}

double l1_norm(const ModelParams& params) {
  std::vector<double> per_component;
  per_component.reserve(params.k());
  for (const auto& beta : params.coefficients()) per_component.push_back(beta.cwiseAbs().sum());
  return ordered_sum(per_component);
}

double LogDensityGradient::max_abs() const {
  double m = weight.cwiseAbs().maxCoeff();
  for (const auto& g : mean) m = std::max(m, g.cwiseAbs().maxCoeff());
  for (const auto& g : covariance) m = std::max(m, g.cwiseAbs().maxCoeff());
  return m;
}

LogDensityGradient log_density_gradient(const ModelParams& params,
                                        const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXd>& y) {
  const std::vector<double> terms = log_terms(params, x, y);
  const double total = log_sum_exp(terms);
  if (!std::isfinite(total)) throw DomainError("log_density_gradient: density is zero");
  const Eigen::MatrixXd means = component_means(params, x);

  LogDensityGradient grad;
  grad.weight.resize(params.k());
  for (int r = 0; r < params.k(); ++r) {
    const double resp = std::exp(terms[r] - total);
    const Eigen::VectorXd score = params.precision(r) * (y - means.col(r));
    grad.mean.push_back(resp * score);
    grad.covariance.push_back(0.5 * resp * (score * score.transpose() - params.precision(r)));
    // f_r / (pi_r * s) computed without dividing by a possibly tiny pi_r.
    grad.weight[r] = std::exp(terms[r] - std::log(params.weights()[r]) - total);
  }
  return grad;
}

double gradient_bound_constant(const ParameterBox& box, int q, double y_sup) {
  const double reach = y_sup + box.A_beta;
  return std::max({1.0 / box.a_pi, box.A_sigma + 0.5 * reach * reach * box.A_sigma * box.A_sigma,
                   q * reach * box.A_sigma / 2.0});
}

Eigen::VectorXd project_weights(const Eigen::VectorXd& mass, double a_pi) {
  const auto k = mass.size();
  if (k * a_pi > 1.0 + kWeightSumTolerance)
    throw ConfigError("project_weights: k * a_pi exceeds 1");
  if (mass.minCoeff() < 0.0 || !mass.allFinite())
    throw DomainError("project_weights: masses must be finite and non-negative");
  std::vector<double> m(mass.data(), mass.data() + k);
  const double total = ordered_sum(m);
  if (!(total > 0.0)) throw DomainError("project_weights: total mass is zero");
  if (std::abs(total - 1.0) <= kWeightSumTolerance &&
      mass.minCoeff() >= a_pi * (1.0 - kBoxTolerance) && mass.minCoeff() > 0.0)
    return mass;

  // pi_r = max(a_pi, mass_r / mu) with mu fixed by sum pi = 1; the clipped
  // set only grows, so at most k passes.
  std::vector<bool> clipped(k, false);
  Eigen::VectorXd out(k);
  for (Eigen::Index pass = 0; pass <= k; ++pass) {
    std::vector<double> free_mass;
    Eigen::Index n_clipped = 0;
    for (Eigen::Index r = 0; r < k; ++r) {
      if (clipped[r])
        ++n_clipped;
      else
        free_mass.push_back(m[r]);
    }
    const double free_total = ordered_sum(free_mass);
    const double budget = 1.0 - static_cast<double>(n_clipped) * a_pi;
    bool changed = false;
    for (Eigen::Index r = 0; r < k; ++r) {
      if (clipped[r]) {
        out[r] = a_pi;
        continue;
      }
      out[r] = free_total > 0.0 ? budget * m[r] / free_total : budget / (k - n_clipped);
      if (out[r] < a_pi) {
        clipped[r] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& matrix, double lower, double upper) {
  if (matrix.rows() != matrix.cols()) throw ShapeError("clip_eigenvalues: matrix is not square");
  if (!(lower > 0.0 && lower <= upper)) throw ConfigError("clip_eigenvalues: bad interval");
  const double asym = max_asymmetry(matrix);
  const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& values = eig.eigenvalues();
  if (asym <= kAsymmetryTolerance && values.minCoeff() >= lower * (1.0 - kBoxTolerance) &&
      values.maxCoeff() <= upper * (1.0 + kBoxTolerance))
    return matrix;
  const Eigen::VectorXd clipped = values.cwiseMax(lower).cwiseMin(upper);
  const Eigen::MatrixXd rebuilt =
      eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (rebuilt + rebuilt.transpose());
}

namespace {

// max_i |beta_row . x_i| over the design rows.
double row_mean_reach(const Eigen::MatrixXd& design, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return (design * row.transpose()).cwiseAbs().maxCoeff();
}

void check_design(const ModelParams& params, const Eigen::MatrixXd& design) {
  if (design.cols() != params.p())
    throw ShapeError("design has " + std::to_string(design.cols()) + " columns, expected " +
                     std::to_string(params.p()));
  if (design.rows() < 1) throw ShapeError("design has no rows");
}

}  // namespace

ModelParams project_to_box(const ModelParams& params, const ParameterBox& box,
                           const Eigen::MatrixXd& design) {
  box.validate_for(params.k());
  check_design(params, design);
  Eigen::VectorXd weights = project_weights(params.weights(), box.a_pi);
  std::vector<Eigen::MatrixXd> coefficients = params.coefficients();
  std::vector<Eigen::MatrixXd> covariances;
  for (int r = 0; r < params.k(); ++r) {
    for (int z = 0; z < params.q(); ++z) {
      const double reach = row_mean_reach(design, coefficients[r].row(z));
      if (reach > box.A_beta * (1.0 + kBoxTolerance))
        coefficients[r].row(z) *= box.A_beta / reach;
    }
    covariances.push_back(clip_eigenvalues(params.covariance(r), box.eig_lower(), box.eig_upper()));
  }
  return ModelParams(std::move(weights), std::move(coefficients), std::move(covariances));
}

std::string to_string(Constraint c) {
  switch (c) {
    case Constraint::WeightLower: return "weight-lower-bound";
    case Constraint::CovarianceAsymmetry: return "covariance-asymmetry";
    case Constraint::CovarianceLower: return "covariance-lower-bound";
    case Constraint::CovarianceUpper: return "covariance-upper-bound";
    case Constraint::MeanUpper: return "mean-upper-bound";
    case Constraint::MeanLower: return "mean-lower-bound";
  }
  return "unknown";
}

std::vector<BoxViolation> check_box_membership(const ModelParams& params, const ParameterBox& box,
                                               const Eigen::MatrixXd& design) {
  check_design(params, design);
  std::vector<BoxViolation> out;
  const double lo = box.eig_lower();
  const double hi = box.eig_upper();
  for (int r = 0; r < params.k(); ++r) {
    const double w = params.weights()[r];
    if (w < box.a_pi * (1.0 - kBoxTolerance))
      out.push_back({Constraint::WeightLower, r, w, box.a_pi});

    const Eigen::MatrixXd& cov = params.covariance(r);
    const double asym = max_asymmetry(cov);
    if (asym > kAsymmetryTolerance)
      out.push_back({Constraint::CovarianceAsymmetry, r, asym, kAsymmetryTolerance});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()),
                                                       Eigen::EigenvaluesOnly);
    const double eig_min = eig.eigenvalues().minCoeff();
    const double eig_max = eig.eigenvalues().maxCoeff();
    if (eig_min < lo * (1.0 - kBoxTolerance))
      out.push_back({Constraint::CovarianceLower, r, eig_min, lo});
    if (eig_max > hi * (1.0 + kBoxTolerance))
      out.push_back({Constraint::CovarianceUpper, r, eig_max, hi});

    double reach = 0.0;
    for (int z = 0; z < params.q(); ++z)
      reach = std::max(reach, row_mean_reach(design, params.coefficients(r).row(z)));
    if (reach > box.A_beta * (1.0 + kBoxTolerance))
      out.push_back({Constraint::MeanUpper, r, reach, box.A_beta});
  }
  return out;
}

std::vector<BoxViolation> mean_lower_bound_shortfalls(const ModelParams& params,
                                                      const ParameterBox& box,
                                                      const Eigen::MatrixXd& design) {
  check_design(params, design);
  std::vector<BoxViolation> out;
  for (int r = 0; r < params.k(); ++r) {
    const double floor =
        (design * params.coefficients(r).transpose()).cwiseAbs().minCoeff();
    if (floor < box.a_beta) out.push_back({Constraint::MeanLower, r, floor, box.a_beta});
  }
  return out;
}

}  // namespace mixlasso
