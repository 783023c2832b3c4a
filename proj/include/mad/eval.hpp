#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <cstdint>

#include "mad/basescore.hpp"
#include "mad/geometry.hpp"
#include "mad/linalg.hpp"

namespace mad {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::optional<double> std_error;
  std::map<std::string, std::string> config;  // everything needed to reproduce the value

  // One JSON object on one line, keys in the order name, value, std_error,
  // config (config keys sorted). Doubles use 17 significant digits.
  std::string to_line() const;
};

// Appends report.to_line() + '\n' with a single write on an O_APPEND descriptor.
void append_report(const std::filesystem::path& log, const MetricReport& report);

// Unbiased MMD^2 with the Gaussian kernel exp(-||a-b||^2 / (2 h^2)); reports
// sqrt(max(MMD^2, 0)). Without a bandwidth, h is the median pairwise distance
// of X u Y (over at most kMedianSubsample evenly strided rows). Each batch
// needs at least two rows. The unclamped estimate is kept in config["mmd2"].
inline constexpr std::size_t kMedianSubsample = 1000;
MetricReport mmd(const Matrix& x, const Matrix& y, std::optional<double> bandwidth = std::nullopt);

// Mean over samples of min_g d(q, q_gt g), in degrees.
MetricReport spread(std::span<const Quaternion> samples, const Quaternion& q_gt,
                    const SymmetryGroup& group);

// Mean of |1 - ||x|||; the maximum is in config["max"].
MetricReport manifold_drift(const Matrix& batch);

// Total variation between the nearest-point histogram of the batch and target.
MetricReport discrete_tv(const Matrix& batch, const Matrix& points,
                         std::span<const double> target_probs);

// One cell of the closed-form vs Monte-Carlo comparison. A cell passes when
// every coordinate satisfies |closed - mc| <= max(rel_tol * ||closed||, 4 SE).
enum class OracleStatus { kPass, kFail, kInconclusive };
std::string_view to_string(OracleStatus s);

struct OracleCell {
  double radius = 0.0;
  double sigma = 0.0;
  Vector closed_form;
  Vector estimate;       // empty when inconclusive
  Vector std_error;
  double rel_error = 0.0;     // ||closed - mc|| / ||closed||
  double max_rel_se = 0.0;    // max_i SE_i / ||closed||
  double ess = 0.0;
  OracleStatus status = OracleStatus::kInconclusive;
};

inline constexpr double kOracleRelTol = 0.01;
inline constexpr double kOracleSeMultiple = 4.0;
using ClosedFormScore = Vector (*)(const ScoreQuery&);
OracleCell oracle_cell(const Manifold& manifold, std::span<const double> x, double sigma,
                       std::size_t n_mc, std::uint64_t seed, ClosedFormScore closed = base_score,
                       double rel_tol = kOracleRelTol);

std::string format_double(double v);

}  // namespace mad
