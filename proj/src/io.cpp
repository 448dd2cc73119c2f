#include "mixlasso/io.hpp"

#include "mixlasso/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mixlasso {

namespace {

json row_major(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) out.push_back(m(a, b));
  return out;
}

Eigen::MatrixXd from_row_major(const json& j, int rows, int cols) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(rows) * cols)
    throw ConfigError("expected " + std::to_string(rows * cols) + " matrix entries");
  Eigen::MatrixXd m(rows, cols);
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b) m(a, b) = j.at(static_cast<std::size_t>(a) * cols + b).get<double>();
  return m;
}

std::string step_rule_name(StepRule r) { return r == StepRule::Fixed ? "fixed" : "backtracking"; }

std::string init_name(InitStrategy s) {
  return s == InitStrategy::RandomInBox ? "random-in-box" : "responsibility-split";
}

template <typename T>
void read_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const ParameterBox& box) {
  j = json{{"a_beta", box.a_beta},   {"A_beta", box.A_beta},
           {"a_sigma", box.a_sigma}, {"A_sigma", box.A_sigma},
           {"a_sigma_tilde", box.a_sigma_tilde}, {"A_sigma_tilde", box.A_sigma_tilde},
           {"a_pi", box.a_pi}};
}

void from_json(const json& j, ParameterBox& box) {
  read_if(j, "a_beta", box.a_beta);
  read_if(j, "A_beta", box.A_beta);
  read_if(j, "a_sigma", box.a_sigma);
  read_if(j, "A_sigma", box.A_sigma);
  read_if(j, "a_sigma_tilde", box.a_sigma_tilde);
  read_if(j, "A_sigma_tilde", box.A_sigma_tilde);
  read_if(j, "a_pi", box.a_pi);
}

void to_json(json& j, const SimSpec& spec) {
  j = json{{"n", spec.n},
           {"p", spec.p},
           {"q", spec.q},
           {"k", spec.k},
           {"sparsity", spec.sparsity},
           {"design_kind", to_string(spec.design_kind)},
           {"noise_scale", spec.noise_scale},
           {"separation", spec.separation},
           {"seed", spec.seed},
           {"box", spec.box}};
}

void from_json(const json& j, SimSpec& spec) {
  read_if(j, "n", spec.n);
  read_if(j, "p", spec.p);
  read_if(j, "q", spec.q);
  read_if(j, "k", spec.k);
  read_if(j, "sparsity", spec.sparsity);
  if (j.contains("design_kind"))
    spec.design_kind = parse_design_kind(j.at("design_kind").get<std::string>());
  read_if(j, "noise_scale", spec.noise_scale);
  read_if(j, "separation", spec.separation);
  read_if(j, "seed", spec.seed);
  read_if(j, "box", spec.box);
}

void to_json(json& j, const FitConfig& c) {
  j = json{{"lambda", c.lambda},
           {"max_em_iters", c.max_em_iters},
           {"em_tol", c.em_tol},
           {"inner_prox_iters", c.inner_prox_iters},
           {"prox_step_rule", step_rule_name(c.prox_step_rule)},
           {"n_restarts", c.n_restarts},
           {"init_strategy", init_name(c.init_strategy)},
           {"seed", c.seed},
           {"box", c.box}};
}

void from_json(const json& j, FitConfig& c) {
  read_if(j, "lambda", c.lambda);
  read_if(j, "max_em_iters", c.max_em_iters);
  read_if(j, "em_tol", c.em_tol);
  read_if(j, "inner_prox_iters", c.inner_prox_iters);
  if (j.contains("prox_step_rule")) {
    const auto name = j.at("prox_step_rule").get<std::string>();
    if (name == "fixed")
      c.prox_step_rule = StepRule::Fixed;
    else if (name == "backtracking")
      c.prox_step_rule = StepRule::Backtracking;
    else
      throw ConfigError("unknown prox_step_rule '" + name + "'");
  }
  read_if(j, "n_restarts", c.n_restarts);
  if (j.contains("init_strategy")) {
    const auto name = j.at("init_strategy").get<std::string>();
    if (name == "random-in-box")
      c.init_strategy = InitStrategy::RandomInBox;
    else if (name == "responsibility-split")
      c.init_strategy = InitStrategy::ResponsibilitySplit;
    else
      throw ConfigError("unknown init_strategy '" + name + "'");
  }
  read_if(j, "seed", c.seed);
  read_if(j, "box", c.box);
}

void to_json(json& j, const KlEstimate& kl) {
  j = json{{"value", kl.value}, {"std_error", kl.std_error}, {"n_samples", kl.n_samples},
           {"seed", kl.seed}};
}

void to_json(json& j, const OracleTerms& t) {
  j = json{{"approximation_term", t.approximation_term},
           {"lambda_term", t.lambda_term},
           {"remainder_term", t.remainder_term}};
}

void to_json(json& j, const BoundReport& r) {
  j = json{{"x_max_n", r.x_max_n},
           {"m_n", r.m_n},
           {"c_mn", r.c_mn},
           {"r_n", r.r_n},
           {"lambda_min", r.lambda_min},
           {"lambda", r.lambda},
           {"kappa", r.kappa},
           {"kappa_prime", r.kappa_prime},
           {"oracle_rhs_terms", r.oracle_rhs_terms},
           {"oracle_rhs_total", r.oracle_rhs_total},
           {"tail_bound", r.tail_bound},
           {"tail_bound_proof", r.tail_bound_proof},
           {"below_threshold", r.below_threshold},
           {"variant", r.variant == RemainderVariant::OracleInequality ? "oracle-inequality"
                                                                       : "model-selection"}};
}

void to_json(json& j, const FitResult& f) {
  j = json{{"params", params_to_json(f.params)},
           {"lambda", f.lambda},
           {"objective_trace", f.objective_trace},
           {"converged", f.converged},
           {"n_iters", f.n_iters},
           {"slack_eta", f.slack_eta},
           {"restart_index", f.restart_index},
           {"reinit_count", f.reinit_count}};
}

json params_to_json(const ModelParams& params) {
  json coef = json::array();
  json cov = json::array();
  for (int r = 0; r < params.k(); ++r) {
    coef.push_back(row_major(params.coefficients(r)));
    cov.push_back(row_major(params.covariance(r)));
  }
  json w = json::array();
  for (int r = 0; r < params.k(); ++r) w.push_back(params.weights()[r]);
  return json{{"p", params.p()}, {"q", params.q()}, {"weights", w}, {"coefficients", coef},
              {"covariances", cov}};
}

ModelParams params_from_json(const json& j) {
  try {
    const int p = j.at("p").get<int>();
    const int q = j.at("q").get<int>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto& coef = j.at("coefficients");
    const auto& cov = j.at("covariances");
    if (coef.size() != w.size() || cov.size() != w.size())
      throw ConfigError("weights, coefficients and covariances disagree on k");
    std::vector<Eigen::MatrixXd> b;
    std::vector<Eigen::MatrixXd> s;
    for (std::size_t r = 0; r < w.size(); ++r) {
      b.push_back(from_row_major(coef[r], q, p));
      s.push_back(from_row_major(cov[r], q, q));
    }
    return ModelParams(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
                       std::move(b), std::move(s));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed parameters: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index b = 0; b < m.cols(); ++b) {
    if (b) out += ',';
    out += std::to_string(b);
  }
  out += '\n';
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    for (Eigen::Index b = 0; b < m.cols(); ++b) {
      if (b) out += ',';
      out += format_double(m(a, b));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    Eigen::Index c = 0;
    while (std::getline(cells, cell, ',')) {
      values.push_back(std::stod(cell));
      ++c;
    }
    if (c != cols) throw ConfigError("CSV row " + std::to_string(rows + 1) + " has " +
                                     std::to_string(c) + " cells, expected " + std::to_string(cols));
    ++rows;
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index a = 0; a < rows; ++a)
    for (Eigen::Index b = 0; b < cols; ++b) m(a, b) = values[a * cols + b];
  return m;
}

std::vector<double> parse_lambda_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ArgumentError("bad number '" + s + "' in lambda grid '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw ArgumentError("lambda grid range must be min:max:count");
    const double lo = number(parts[0]);
    const double hi = number(parts[1]);
    const double count = number(parts[2]);
    if (!(lo > 0.0 && hi >= lo) || count < 1 || count != std::floor(count))
      throw ArgumentError("lambda grid range needs 0 < min <= max and integer count >= 1");
    const int c = static_cast<int>(count);
    for (int t = 0; t < c; ++t) {
      const double frac = c == 1 ? 0.0 : static_cast<double>(t) / (c - 1);
      out.push_back(std::exp(std::log(hi) + frac * (std::log(lo) - std::log(hi))));
    }
    return out;
  }
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(number(part));
  if (out.empty()) throw ArgumentError("empty lambda grid");
  return out;
}

}  // namespace mixlasso
