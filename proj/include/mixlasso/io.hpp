#pragma once

#include "mixlasso/bounds.hpp"
#include "mixlasso/divergence.hpp"
#include "mixlasso/estimator.hpp"
#include "mixlasso/model.hpp"
#include "mixlasso/simulator.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mixlasso {

using json = nlohmann::json;

void to_json(json& j, const ParameterBox& box);
void from_json(const json& j, ParameterBox& box);
void to_json(json& j, const SimSpec& spec);
void from_json(const json& j, SimSpec& spec);
void to_json(json& j, const FitConfig& config);
void from_json(const json& j, FitConfig& config);
void to_json(json& j, const KlEstimate& kl);
void to_json(json& j, const OracleTerms& terms);
void to_json(json& j, const BoundReport& report);
void to_json(json& j, const FitResult& fit);

/// {"weights": [...], "coefficients": [[row-major q*p], ...], "covariances": [[row-major q*q], ...],
///  "p": p, "q": q}.
json params_to_json(const ModelParams& params);
ModelParams params_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
/// Writes j.dump(2) plus a trailing newline; throws IoError naming the path.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

/// CSV with a header row of column indices 0..cols-1.
std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(const std::string& text);

/// "a,b,c" (any order is kept) or "min:max:count" (count log-spaced values, descending).
std::vector<double> parse_lambda_grid(const std::string& text);

}  // namespace mixlasso
