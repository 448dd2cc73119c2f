#include "mixlasso/estimator.hpp"

#include "mixlasso/error.hpp"
#include "mixlasso/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

namespace mixlasso {

namespace {

constexpr double kDegenerateMass = 1e-8;
constexpr int kMaxReinits = 5;
constexpr double kLogUnderflow = 700.0;
constexpr double kRespTolerance = 1e-8;
constexpr double kMeanTolerance = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double t) {
  return v.unaryExpr([t](double a) {
    const double m = std::abs(a) - t;
    return m > 0.0 ? std::copysign(m, a) : 0.0;
  });
}

void check_data(const Dataset& data, int k) {
  if (k < 1) throw ArgumentError("number of components must be at least 1");
  if (data.n() < k)
    throw ArgumentError("need at least as many observations as components (n = " +
                        std::to_string(data.n()) + ", k = " + std::to_string(k) + ")");
}

void check_params(const ModelParams& params, const Dataset& data) {
  if (params.p() != data.p() || params.q() != data.q())
    throw ShapeError("parameters are " + std::to_string(params.q()) + "x" +
                     std::to_string(params.p()) + ", data are " + std::to_string(data.q()) + "x" +
                     std::to_string(data.p()));
}

// Second moment Y^T Y / n, the covariance of a zero-mean fit.
Eigen::MatrixXd response_second_moment(const Dataset& data) {
  const Eigen::MatrixXd& y = data.responses();
  return y.transpose() * y / static_cast<double>(data.n());
}

// Proximal gradient for one component:
//   min_B 1/2 tr(P B Gxx B^T) - tr(P B Gyx^T) + threshold * |B|_1.
Eigen::MatrixXd prox_coefficients(const Eigen::MatrixXd& gxx, const Eigen::MatrixXd& gyx,
                                  const Eigen::MatrixXd& precision, double threshold,
                                  const Eigen::MatrixXd& start, const FitConfig& config) {
  if (std::isinf(threshold)) return Eigen::MatrixXd::Zero(start.rows(), start.cols());
  const double l_p = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(precision,
                                                                    Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  const double l_x =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gxx, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .maxCoeff();
  const double lipschitz = l_p * l_x;
  if (!(lipschitz > 0.0)) return threshold > 0.0 ? Eigen::MatrixXd::Zero(start.rows(), start.cols())
                                                 : start;

  auto smooth = [&](const Eigen::MatrixXd& b) {
    return 0.5 * (precision * b * gxx * b.transpose()).trace() -
           (precision * b * gyx.transpose()).trace();
  };
  const double base_step = 1.0 / lipschitz;
  double step = config.prox_step_rule == StepRule::Backtracking ? 4.0 * base_step : base_step;

  Eigen::MatrixXd b = start;
  for (int it = 0; it < config.inner_prox_iters; ++it) {
    const Eigen::MatrixXd grad = precision * (b * gxx - gyx);
    Eigen::MatrixXd next = soft_threshold(b - step * grad, step * threshold);
    if (config.prox_step_rule == StepRule::Backtracking) {
      const double h = smooth(b);
      while (step > base_step) {
        const Eigen::MatrixXd d = next - b;
        if (smooth(next) <= h + (grad.cwiseProduct(d)).sum() + d.squaredNorm() / (2.0 * step))
          break;
        step = std::max(0.5 * step, base_step);
        next = soft_threshold(b - step * grad, step * threshold);
      }
    }
    const double change = (next - b).cwiseAbs().maxCoeff();
    b = std::move(next);
    if (change <= 1e-12 * (1.0 + b.cwiseAbs().maxCoeff())) break;
    if (config.prox_step_rule == StepRule::Backtracking) step = std::min(2.0 * step, 4.0 * base_step);
  }
  return b;
}

// Largest step along prev -> candidate keeping max_i |beta_z . x_i| <= bound.
Eigen::MatrixXd feasible_step(const Eigen::MatrixXd& design, const Eigen::MatrixXd& prev,
                              const Eigen::MatrixXd& candidate, double bound) {
  const Eigen::MatrixXd m0 = design * prev.transpose();
  const Eigen::MatrixXd delta = design * (candidate - prev).transpose();
  double t = 1.0;
  for (Eigen::Index z = 0; z < m0.cols(); ++z) {
    for (Eigen::Index i = 0; i < m0.rows(); ++i) {
      const double a = m0(i, z);
      const double d = delta(i, z);
      if (std::abs(a + d) <= bound * (1.0 + kMeanTolerance)) continue;
      if (d > 0.0)
        t = std::min(t, (bound - a) / d);
      else if (d < 0.0)
        t = std::min(t, (-bound - a) / d);
    }
  }
  if (t >= 1.0) return candidate;
  t = std::max(t, 0.0);
  return prev + t * (candidate - prev);
}

FitResult run_em(const Dataset& data, ModelParams params, const FitConfig& config) {
  FitResult out{params, config.lambda, {}, false, 0, 0.0, 0, 0};
  out.objective_trace.push_back(penalized_nll(params, data, config.lambda));
  const ParameterBox& box = config.box;
  while (out.n_iters < config.max_em_iters) {
    const Eigen::MatrixXd resp = e_step(params, data);
    std::optional<ModelParams> next;
    try {
      next.emplace(m_step(resp, data, config.lambda, box, params, config));
    } catch (const DegenerateComponentError& e) {
      if (out.reinit_count >= kMaxReinits) throw;
      ++out.reinit_count;
      // Split the heaviest component into the empty slot.
      const int r = e.component();
      int heavy = r == 0 ? 1 : 0;
      for (int l = 0; l < params.k(); ++l)
        if (l != r && params.weights()[l] > params.weights()[heavy]) heavy = l;
      Eigen::VectorXd w = params.weights();
      w[r] = w[heavy] = 0.5 * (w[r] + w[heavy]);
      std::vector<Eigen::MatrixXd> coef = params.coefficients();
      std::vector<Eigen::MatrixXd> cov = params.covariances();
      coef[r] = 0.5 * coef[heavy];
      cov[r] = clip_eigenvalues(2.0 * cov[heavy], box.eig_lower(), box.eig_upper());
      w /= w.sum();
      params = project_to_box(ModelParams(w, std::move(coef), std::move(cov)), box, data.design());
      out.objective_trace.assign(1, penalized_nll(params, data, config.lambda));
      continue;
    }
    const double prev = out.objective_trace.back();
    const double cur = penalized_nll(*next, data, config.lambda);
    params = std::move(*next);
    out.objective_trace.push_back(cur);
    ++out.n_iters;
    if (prev - cur <= config.em_tol * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
  }
  out.params = std::move(params);
  return out;
}

ModelParams replicate_component(const ModelParams& single, int k, const ParameterBox& box,
                                const Eigen::MatrixXd& design) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / k);
  std::vector<Eigen::MatrixXd> coef(k, single.coefficients(0));
  std::vector<Eigen::MatrixXd> cov(k, single.covariance(0));
  return project_to_box(ModelParams(w, std::move(coef), std::move(cov)), box, design);
}

ModelParams single_component_start(const Dataset& data, const ParameterBox& box) {
  return ModelParams(
      Eigen::VectorXd::Ones(1), {Eigen::MatrixXd::Zero(data.q(), data.p())},
      {clip_eigenvalues(response_second_moment(data), box.eig_lower(), box.eig_upper())});
}

ModelParams random_start(const Dataset& data, int k, const ParameterBox& box, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.2, 0.8);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  const Eigen::MatrixXd moment = response_second_moment(data);
  std::vector<Eigen::MatrixXd> coef;
  std::vector<Eigen::MatrixXd> cov;
  for (int r = 0; r < k; ++r) {
    Eigen::MatrixXd b(data.q(), data.p());
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index z = 0; z < b.rows(); ++z) b(z, j) = normal(rng);
    for (Eigen::Index z = 0; z < b.rows(); ++z) {
      const double reach = (data.design() * b.row(z).transpose()).cwiseAbs().maxCoeff();
      const double target = uniform(rng) * box.A_beta;
      if (reach > 0.0) b.row(z) *= target / reach;
    }
    coef.push_back(std::move(b));
    cov.push_back(clip_eigenvalues(scale(rng) * moment, box.eig_lower(), box.eig_upper()));
  }
  return project_to_box(
      ModelParams(Eigen::VectorXd::Constant(k, 1.0 / k), std::move(coef), std::move(cov)), box,
      data.design());
}

// Fit one component, then split along the top principal direction of its
// residuals with soft kernel responsibilities.
ModelParams split_start(const Dataset& data, int k, const FitConfig& config) {
  FitConfig single_cfg = config;
  single_cfg.box.a_pi = std::min(config.box.a_pi, 1.0);
  const ModelParams single =
      run_em(data, single_component_start(data, config.box), single_cfg).params;
  if (k == 1) return single;

  const Eigen::MatrixXd resid =
      data.responses() - data.design() * single.coefficients(0).transpose();
  const Eigen::MatrixXd scatter = resid.transpose() * resid / static_cast<double>(data.n());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
  const Eigen::VectorXd dir = eig.eigenvectors().col(data.q() - 1);
  Eigen::VectorXd score = resid * dir;
  score.array() -= score.mean();
  const double sd = std::sqrt(score.squaredNorm() / static_cast<double>(data.n()));
  if (!(sd > 0.0)) throw DegenerateComponentError(0, 0.0);
  const double width = 0.5 * sd;

  Eigen::MatrixXd resp(data.n(), k);
  std::vector<double> logits(k);
  for (int i = 0; i < data.n(); ++i) {
    for (int l = 0; l < k; ++l) {
      const double c = (l - 0.5 * (k - 1)) * sd;
      const double u = (score[i] - c) / width;
      logits[l] = -0.5 * u * u;
    }
    const double lse = log_sum_exp(logits);
    for (int l = 0; l < k; ++l) resp(i, l) = std::exp(logits[l] - lse);
    resp.row(i) /= resp.row(i).sum();
  }
  const ModelParams prev = replicate_component(single, k, config.box, data.design());
  return m_step(resp, data, config.lambda, config.box, prev, config);
}

// Hard groups by rank of |y_i|^2; zero coefficients.
ModelParams null_start(const Dataset& data, int k, const ParameterBox& box) {
  const int n = data.n();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd norms = data.responses().rowwise().squaredNorm();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return norms[a] < norms[b]; });
  std::vector<Eigen::MatrixXd> coef;
  std::vector<Eigen::MatrixXd> cov;
  Eigen::VectorXd mass(k);
  for (int l = 0; l < k; ++l) {
    const int lo = static_cast<int>(static_cast<long long>(l) * n / k);
    const int hi = static_cast<int>(static_cast<long long>(l + 1) * n / k);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(data.q(), data.q());
    for (int t = lo; t < hi; ++t) {
      const Eigen::VectorXd y = data.responses().row(order[t]).transpose();
      s += y * y.transpose();
    }
    s /= static_cast<double>(hi - lo);
    mass[l] = static_cast<double>(hi - lo) / n;
    coef.push_back(Eigen::MatrixXd::Zero(data.q(), data.p()));
    cov.push_back(clip_eigenvalues(s, box.eig_lower(), box.eig_upper()));
  }
  return ModelParams(project_weights(mass, box.a_pi), std::move(coef), std::move(cov));
}

FitResult with_lambda(FitResult fit, double lambda, const Dataset& data) {
  fit.lambda = lambda;
  fit.objective_trace.assign(1, penalized_nll(fit.params, data, lambda));
  fit.restart_index = -1;
  fit.slack_eta = 0.0;
  fit.params = align_labels(fit.params);
  return fit;
}

FitResult fit_below_threshold(const Dataset& data, int k, const FitConfig& config,
                              const FitResult& null_fit) {
  std::vector<FitResult> candidates;
  std::vector<int> indices;
  std::optional<DegenerateComponentError> failure;
  for (int j = 0; j < config.n_restarts; ++j) {
    try {
      std::optional<ModelParams> init;
      if (j == 0 && config.init_strategy == InitStrategy::ResponsibilitySplit) {
        try {
          init.emplace(split_start(data, k, config));
        } catch (const DegenerateComponentError&) {
        }
      }
      if (!init) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(j)));
        init.emplace(random_start(data, k, config.box, rng));
      }
      candidates.push_back(run_em(data, *init, config));
      indices.push_back(j);
    } catch (const DegenerateComponentError& e) {
      failure.emplace(e);
    }
  }
  try {
    candidates.push_back(run_em(data, null_fit.params, config));
    indices.push_back(config.n_restarts);
  } catch (const DegenerateComponentError& e) {
    failure.emplace(e);
  }
  if (candidates.empty()) throw *failure;

  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (candidates[c].objective() < candidates[best].objective()) best = c;
  std::vector<double> finals;
  for (const auto& c : candidates) finals.push_back(c.objective());
  std::sort(finals.begin(), finals.end());
  const std::size_t m = finals.size();
  const double median = m % 2 ? finals[m / 2] : 0.5 * (finals[m / 2 - 1] + finals[m / 2]);

  FitResult out = std::move(candidates[best]);
  out.slack_eta = median - out.objective();
  out.restart_index = indices[best];
  out.params = align_labels(out.params);
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (max_em_iters < 1) throw ConfigError("max_em_iters must be at least 1");
  if (!(em_tol > 0.0)) throw ConfigError("em_tol must be positive");
  if (inner_prox_iters < 1) throw ConfigError("inner_prox_iters must be at least 1");
  if (n_restarts < 1) throw ConfigError("n_restarts must be at least 1");
  box.validate();
}

Eigen::MatrixXd component_log_matrix(const ModelParams& params, const Dataset& data) {
  check_params(params, data);
  Eigen::MatrixXd out(data.n(), params.k());
  for (int r = 0; r < params.k(); ++r) {
    const Eigen::MatrixXd resid =
        data.responses() - data.design() * params.coefficients(r).transpose();
    const Eigen::MatrixXd white = resid * params.inverse_cholesky(r).transpose();
    out.col(r) = (params.log_normalizer(r) - 0.5 * white.rowwise().squaredNorm().array()).matrix();
  }
  return out;
}

double penalized_nll(const ModelParams& params, const Dataset& data, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be non-negative");
  const Eigen::MatrixXd terms = component_log_matrix(params, data);
  std::vector<double> row(params.k());
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    for (int r = 0; r < params.k(); ++r) row[r] = terms(i, r);
    total += log_sum_exp(row);
  }
  const double nll = -total / data.n();
  const double l1 = l1_norm(params);
  return l1 == 0.0 ? nll : nll + lambda * l1;
}

Eigen::MatrixXd e_step(const ModelParams& params, const Dataset& data) {
  const Eigen::MatrixXd terms = component_log_matrix(params, data);
  const int k = params.k();
  Eigen::MatrixXd resp(data.n(), k);
  std::vector<double> w(k);
  for (int i = 0; i < data.n(); ++i) {
    const double top = terms.row(i).maxCoeff();
    if (!std::isfinite(top)) throw DomainError("e_step: non-finite log density at row " +
                                               std::to_string(i));
    for (int r = 0; r < k; ++r) {
      const double d = terms(i, r) - top;
      w[r] = d < -kLogUnderflow ? 0.0 : std::exp(d);
    }
    const double s = ordered_sum(w);
    for (int r = 0; r < k; ++r) resp(i, r) = w[r] / s;
  }
  return resp;
}

ModelParams m_step(const Eigen::MatrixXd& resp, const Dataset& data, double lambda,
                   const ParameterBox& box, const ModelParams& prev, const FitConfig& config) {
  check_params(prev, data);
  const int k = prev.k();
  const int n = data.n();
  if (resp.rows() != n || resp.cols() != k)
    throw ShapeError("responsibilities must be n x k");
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be non-negative");
  if (!resp.allFinite() || resp.minCoeff() < 0.0 ||
      ((resp.rowwise().sum().array() - 1.0).abs() > kRespTolerance).any())
    throw ArgumentError("responsibility rows must be non-negative and sum to one");

  const Eigen::MatrixXd& x = data.design();
  const Eigen::MatrixXd& y = data.responses();
  Eigen::VectorXd mass(k);
  for (int r = 0; r < k; ++r) {
    mass[r] = resp.col(r).sum();
    if (mass[r] < kDegenerateMass) throw DegenerateComponentError(r, mass[r]);
  }
  Eigen::VectorXd weights = project_weights(mass / static_cast<double>(n), box.a_pi);

  std::vector<Eigen::MatrixXd> coef;
  std::vector<Eigen::MatrixXd> cov;
  for (int r = 0; r < k; ++r) {
    const Eigen::VectorXd& tau = resp.col(r);
    const double n_r = mass[r];
    const Eigen::MatrixXd xw = x.array().colwise() * tau.array();
    const Eigen::MatrixXd gxx = x.transpose() * xw / n_r;
    const Eigen::MatrixXd gyx = y.transpose() * xw / n_r;
    const double threshold = std::isinf(lambda) ? kInf : lambda * n / n_r;
    const Eigen::MatrixXd candidate = prox_coefficients(gxx, gyx, prev.precision(r), threshold,
                                                        prev.coefficients(r), config);
    Eigen::MatrixXd b = feasible_step(x, prev.coefficients(r), candidate, box.A_beta);

    const Eigen::MatrixXd resid = y - x * b.transpose();
    const Eigen::MatrixXd scatter =
        resid.transpose() * (resid.array().colwise() * tau.array()).matrix() / n_r;
    cov.push_back(clip_eigenvalues(0.5 * (scatter + scatter.transpose()), box.eig_lower(),
                                   box.eig_upper()));
    coef.push_back(std::move(b));
  }
  return ModelParams(std::move(weights), std::move(coef), std::move(cov));
}

FitResult fit_from(const Dataset& data, const ModelParams& init, const FitConfig& config) {
  config.validate();
  check_data(data, init.k());
  check_params(init, data);
  config.box.validate_for(init.k());
  return run_em(data, project_to_box(init, config.box, data.design()), config);
}

FitResult fit_null(const Dataset& data, int k, const FitConfig& config) {
  config.validate();
  check_data(data, k);
  config.box.validate_for(k);
  FitConfig null_cfg = config;
  null_cfg.lambda = kInf;
  FitResult out = run_em(data, null_start(data, k, config.box), null_cfg);
  out.restart_index = -1;
  return out;
}

double zero_coefficient_threshold(const ModelParams& zero_fit, const Dataset& data) {
  const Eigen::MatrixXd resp = e_step(zero_fit, data);
  double best = 0.0;
  for (int r = 0; r < zero_fit.k(); ++r) {
    const Eigen::MatrixXd xw = data.design().array().colwise() * resp.col(r).array();
    const Eigen::MatrixXd score =
        zero_fit.precision(r) * data.responses().transpose() * xw / static_cast<double>(data.n());
    best = std::max(best, score.cwiseAbs().maxCoeff());
  }
  return best;
}

FitResult fit_lasso(const Dataset& data, int k, const FitConfig& config) {
  const FitResult null_fit = fit_null(data, k, config);
  const double lambda_max = zero_coefficient_threshold(null_fit.params, data);
  if (config.lambda >= lambda_max) return with_lambda(null_fit, config.lambda, data);
  return fit_below_threshold(data, k, config, null_fit);
}

LambdaPath lambda_path(const Dataset& data, int k, std::span<const double> grid,
                       const FitConfig& config) {
  if (grid.empty()) throw ArgumentError("lambda grid is empty");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid[j] >= 0.0) || std::isinf(grid[j]))
      throw ArgumentError("lambda grid values must be finite and non-negative");
    if (j > 0 && !(grid[j] < grid[j - 1]))
      throw ArgumentError("lambda grid must be strictly descending");
  }
  LambdaPath path;
  const FitResult null_fit = fit_null(data, k, config);
  path.lambda_max = zero_coefficient_threshold(null_fit.params, data);
  for (double lambda : grid) {
    FitConfig cfg = config;
    cfg.lambda = lambda;
    if (lambda >= path.lambda_max) {
      path.fits.push_back(with_lambda(null_fit, lambda, data));
    } else if (path.fits.empty() || path.fits.back().lambda >= path.lambda_max) {
      path.fits.push_back(fit_below_threshold(data, k, cfg, null_fit));
    } else {
      FitResult fit = run_em(data, path.fits.back().params, cfg);
      fit.params = align_labels(fit.params);
      path.fits.push_back(std::move(fit));
    }
  }
  return path;
}

ModelParams align_labels(const ModelParams& params) {
  const int k = params.k();
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> key(k);
  for (int r = 0; r < k; ++r) key[r] = params.coefficients(r).row(0).cwiseAbs().sum();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] > key[b]; });
  if (std::is_sorted(order.begin(), order.end())) return params;
  Eigen::VectorXd w(k);
  std::vector<Eigen::MatrixXd> coef;
  std::vector<Eigen::MatrixXd> cov;
  for (int r = 0; r < k; ++r) {
    w[r] = params.weights()[order[r]];
    coef.push_back(params.coefficients(order[r]));
    cov.push_back(params.covariance(order[r]));
  }
  return ModelParams(std::move(w), std::move(coef), std::move(cov));
}

std::vector<int> hard_labels(const ModelParams& params, const Dataset& data) {
  const Eigen::MatrixXd resp = e_step(params, data);
  std::vector<int> labels(data.n());
  for (int i = 0; i < data.n(); ++i) {
    Eigen::Index arg = 0;
    resp.row(i).maxCoeff(&arg);
    labels[i] = static_cast<int>(arg);
  }
  return labels;
}

}  // namespace mixlasso
