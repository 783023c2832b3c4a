#include "mad/eval.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <string>

#include "json.hpp"
#include "mad/basescore.hpp"
#include "mad/diffusion.hpp"
#include "mad/errors.hpp"
#include "mad/simd/kernels.hpp"

namespace mad {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string MetricReport::to_line() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["value"] = value;
  j["std_error"] = std_error ? nlohmann::ordered_json(*std_error) : nlohmann::ordered_json();
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = std::move(cfg);
  return j.dump();
}

void append_report(const std::filesystem::path& log, const MetricReport& report) {
  const std::string line = report.to_line() + "\n";
  const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw std::runtime_error("cannot open metrics log " + log.string() + ": " +
                                       std::strerror(errno));
  const ssize_t written = ::write(fd, line.data(), line.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size()))
    throw std::runtime_error("short write to metrics log " + log.string());
}

namespace {

double median_pairwise_distance(const Matrix& x, const Matrix& y) {
  const std::size_t total = x.rows() + y.rows();
  const std::size_t stride = std::max<std::size_t>(1, (total + kMedianSubsample - 1) / kMedianSubsample);
  std::vector<std::span<const double>> rows;
  for (std::size_t i = 0; i < total; i += stride)
    rows.push_back(i < x.rows() ? x.row(i) : y.row(i - x.rows()));
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      d.push_back(std::sqrt(squared_distance(rows[i], rows[j])));
  if (d.empty()) return 0.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

MetricReport mmd(const Matrix& x, const Matrix& y, std::optional<double> bandwidth) {
  if (x.cols() != y.cols())
    throw ValidationError("mmd: dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                          std::to_string(y.cols()) + ")");
  if (x.rows() < 2 || y.rows() < 2)
    throw ValidationError("mmd: each batch needs at least two samples");
  double h = 0.0;
  if (bandwidth) {
    if (!(*bandwidth > 0.0)) throw ValidationError("mmd: bandwidth must be positive");
    h = *bandwidth;
  } else {
    h = median_pairwise_distance(x, y);
    if (!(h > 0.0)) h = 1.0;
  }
  const double gamma = 1.0 / (2.0 * h * h);
  const auto& k = simd::active();
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(y.rows());
  const std::size_t d = x.cols();
  // Diagonal terms are exactly exp(0) = 1.
  const double kxx = k.rbf_sum(x.data(), x.rows(), x.data(), x.rows(), d, gamma) - n;
  const double kyy = k.rbf_sum(y.data(), y.rows(), y.data(), y.rows(), d, gamma) - m;
  const double kxy = k.rbf_sum(x.data(), x.rows(), y.data(), y.rows(), d, gamma);
  const double mmd2 = kxx / (n * (n - 1.0)) + kyy / (m * (m - 1.0)) - 2.0 * kxy / (n * m);

  MetricReport r;
  r.name = "mmd";
  r.value = std::sqrt(std::max(0.0, mmd2));
  r.config["bandwidth"] = format_double(h);
  r.config["bandwidth_rule"] = bandwidth ? "fixed" : "median";
  r.config["kernel"] = "gaussian";
  r.config["mmd2"] = format_double(mmd2);
  r.config["n_x"] = std::to_string(x.rows());
  r.config["n_y"] = std::to_string(y.rows());
  return r;
}

MetricReport spread(std::span<const Quaternion> samples, const Quaternion& q_gt,
                    const SymmetryGroup& group) {
  if (samples.empty()) throw ValidationError("spread: no samples");
  std::vector<Quaternion> orbit;
  orbit.reserve(group.size());
  for (const Quaternion& g : group.elements()) orbit.push_back(quat_mul(q_gt, g));
  double total = 0.0;
  for (const Quaternion& q : samples) {
    double best = std::numbers::pi;
    for (const Quaternion& o : orbit) best = std::min(best, geodesic_distance(q, o));
    total += best;
  }
  MetricReport r;
  r.name = "spread";
  r.value = total / static_cast<double>(samples.size()) * 180.0 / std::numbers::pi;
  r.config["group"] = group.name();
  r.config["n"] = std::to_string(samples.size());
  r.config["units"] = "degrees";
  return r;
}

MetricReport manifold_drift(const Matrix& batch) {
  const DriftStats s = drift_stats(batch);
  MetricReport r;
  r.name = "manifold_drift";
  r.value = s.mean;
  r.config["max"] = format_double(s.max);
  r.config["n"] = std::to_string(batch.rows());
  return r;
}

MetricReport discrete_tv(const Matrix& batch, const Matrix& points,
                         std::span<const double> target_probs) {
  if (target_probs.size() != points.rows())
    throw ValidationError("discrete_tv: one target probability per support point");
  if (!batch.empty() && batch.cols() != points.cols())
    throw ValidationError("discrete_tv: dimension mismatch");
  double total = 0.0;
  for (double p : target_probs) {
    if (!(p >= 0.0)) throw ValidationError("discrete_tv: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("discrete_tv: target must sum to 1");
  if (batch.empty()) throw ValidationError("discrete_tv: empty batch");

  std::vector<double> counts(points.rows(), 0.0);
  for (std::size_t i = 0; i < batch.rows(); ++i) counts[nearest_point(points, batch.row(i))] += 1.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    tv += std::abs(counts[i] / static_cast<double>(batch.rows()) - target_probs[i]);
  MetricReport r;
  r.name = "discrete_tv";
  r.value = 0.5 * tv;
  r.config["n"] = std::to_string(batch.rows());
  r.config["support_size"] = std::to_string(points.rows());
  return r;
}

std::string_view to_string(OracleStatus s) {
  switch (s) {
    case OracleStatus::kPass: return "PASS";
    case OracleStatus::kFail: return "FAIL";
    case OracleStatus::kInconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

OracleCell oracle_cell(const Manifold& manifold, std::span<const double> x, double sigma,
                       std::size_t n_mc, std::uint64_t seed, ClosedFormScore closed,
                       double rel_tol) {
  OracleCell cell;
  cell.radius = norm(x);
  cell.sigma = sigma;
  const ScoreQuery q{x, sigma, manifold};
  cell.closed_form = closed(q);
  Rng rng(seed);
  McScoreEstimate mc;
  try {
    mc = mc_score_oracle(q, n_mc, rng);
  } catch (const UnreliableEstimateError& e) {
    cell.ess = e.ess();
    cell.status = OracleStatus::kInconclusive;
    return cell;
  }
  cell.estimate = mc.value;
  cell.std_error = mc.std_error;
  cell.ess = mc.ess;
  const double scale = norm(cell.closed_form);
  double err2 = 0.0;
  bool ok = true;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double err = std::abs(cell.closed_form[i] - mc.value[i]);
    err2 += err * err;
    if (!(err <= std::max(rel_tol * scale, kOracleSeMultiple * mc.std_error[i]))) ok = false;
    cell.max_rel_se = std::max(cell.max_rel_se, scale > 0.0 ? mc.std_error[i] / scale : mc.std_error[i]);
  }
  cell.rel_error = scale > 0.0 ? std::sqrt(err2) / scale : std::sqrt(err2);
  cell.status = ok ? OracleStatus::kPass : OracleStatus::kFail;
  return cell;
}

}  // namespace mad
