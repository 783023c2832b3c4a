#include "mad/basescore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mad/errors.hpp"
#include "mad/simd/kernels.hpp"
#include "mad/specfun.hpp"

namespace mad {
namespace {

void check_query(const ScoreQuery& q) {
  if (!(q.sigma > 0.0) || !std::isfinite(q.sigma))
    throw ValidationError("score query: sigma must be positive and finite");
  if (q.x.size() != q.manifold.ambient_dim())
    throw ValidationError("score query: x has " + std::to_string(q.x.size()) +
                          " coordinates, manifold ambient dimension is " +
                          std::to_string(q.manifold.ambient_dim()));
}

double sphere_query_norm(const ScoreQuery& q) {
  check_query(q);
  if (!q.manifold.is_spherical()) throw ValidationError("sphere score on a non-sphere manifold");
  const double r = norm(q.x);
  if (!(r >= kMinSphereQueryNorm))
    throw DegenerateInputError("sphere base score undefined at the origin (||x|| = " +
                               std::to_string(r) + ")");
  return r;
}

Vector scaled(std::span<const double> x, double c) {
  Vector out(x.begin(), x.end());
  for (double& v : out) v *= c;
  return out;
}

// Softmax over log-weights followed by the weighted mean of `points`.
Vector weighted_mean(const Matrix& points, std::vector<double>& log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  for (double& l : log_w) l -= top;
  std::vector<double> w(log_w.size());
  simd::active().exp(log_w.data(), w.data(), w.size());
  double total = 0.0;
  Vector mean(points.cols(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    total += w[i];
    for (std::size_t j = 0; j < points.cols(); ++j) mean[j] += w[i] * points(i, j);
  }
  for (double& v : mean) v /= total;
  return mean;
}

std::vector<double> gaussian_log_kernel(const Matrix& points, std::span<const double> x,
                                        double sigma) {
  std::vector<double> d2(points.rows());
  simd::active().squared_distances(points.data(), points.rows(), points.cols(), x.data(),
                                   d2.data());
  const double inv = -0.5 / (sigma * sigma);
  for (double& v : d2) v *= inv;
  return d2;
}

Vector score_from_mean(const Vector& mean, std::span<const double> x, double sigma) {
  Vector s(x.size());
  const double inv = 1.0 / (sigma * sigma);
  for (std::size_t j = 0; j < x.size(); ++j) s[j] = (mean[j] - x[j]) * inv;
  return s;
}

}  // namespace

Vector base_posterior_mean_discrete(const ScoreQuery& q) {
  check_query(q);
  const Matrix& points = q.manifold.points();
  std::vector<double> log_w = gaussian_log_kernel(points, q.x, q.sigma);
  return weighted_mean(points, log_w);
}

Vector base_score_discrete(const ScoreQuery& q) {
  return score_from_mean(base_posterior_mean_discrete(q), q.x, q.sigma);
}

namespace {

void check_exact_inputs(std::span<const double> x, double sigma, const Matrix& points,
                        std::span<const double> probs) {
  if (probs.size() != points.rows())
    throw ValidationError("exact_score_discrete: one probability per point required");
  if (x.size() != points.cols()) throw ValidationError("exact_score_discrete: dimension mismatch");
  if (!(sigma > 0.0)) throw ValidationError("exact_score_discrete: sigma must be positive");
  double total = 0.0;
  for (double p : probs) {
    if (!(p > 0.0))
      throw DomainError("exact_score_discrete: every support point needs positive probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw DomainError("exact_score_discrete: probabilities must sum to 1");
}

void normalize_log(std::vector<double>& log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double sum = 0.0;
  for (double l : log_w) sum += std::exp(l - top);
  const double lse = top + std::log(sum);
  for (double& l : log_w) l -= lse;
}

}  // namespace

Vector exact_score_discrete(std::span<const double> x, double sigma, const Matrix& points,
                            std::span<const double> probs) {
  check_exact_inputs(x, sigma, points, probs);
  std::vector<double> log_w = gaussian_log_kernel(points, x, sigma);
  for (std::size_t i = 0; i < log_w.size(); ++i) log_w[i] += std::log(probs[i]);
  return score_from_mean(weighted_mean(points, log_w), x, sigma);
}

double log_score_gap_discrete(std::span<const double> x, double sigma, const Matrix& points,
                              std::span<const double> probs) {
  check_exact_inputs(x, sigma, points, probs);
  std::vector<double> log_base = gaussian_log_kernel(points, x, sigma);
  std::vector<double> log_exact = log_base;
  for (std::size_t i = 0; i < log_exact.size(); ++i) log_exact[i] += std::log(probs[i]);
  normalize_log(log_base);
  normalize_log(log_exact);

  // The weight differences sum to zero, so the mean difference is
  // sum_{i != k} c_i (u_i - u_k). With k the heaviest exact weight, every
  // remaining c_i is a difference of weights that are not both close to 1.
  const std::size_t k = std::max_element(log_exact.begin(), log_exact.end()) - log_exact.begin();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_c(points.rows(), neg_inf);
  std::vector<double> sign(points.rows(), 0.0);
  double top = neg_inf;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    if (i == k || log_exact[i] == log_base[i]) continue;
    const double hi = std::max(log_exact[i], log_base[i]);
    const double lo = std::min(log_exact[i], log_base[i]);
    log_c[i] = hi + std::log(-std::expm1(lo - hi));
    sign[i] = log_exact[i] > log_base[i] ? 1.0 : -1.0;
    top = std::max(top, log_c[i]);
  }
  if (top == neg_inf) return neg_inf;
  Vector v(points.cols(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    if (sign[i] == 0.0) continue;
    const double c = sign[i] * std::exp(log_c[i] - top);
    for (std::size_t j = 0; j < points.cols(); ++j) v[j] += c * (points(i, j) - points(k, j));
  }
  const double nv = norm(v);
  if (nv == 0.0) return neg_inf;
  return top + std::log(nv) - 2.0 * std::log(sigma);
}

// Each sphere coefficient is -1/sigma^2 + R(z) / (sigma^2 r) with
// R = I_{(n+1)/2} / I_{(n-1)/2}. Writing it this way avoids the cancellation
// between the bracket and the 1/r^2 terms when z = r / sigma^2 is small.
double nsphere_score_coefficient(int n, double r, double sigma) {
  using specfun::BesselOrder;
  const double s2 = sigma * sigma;
  const double z = r / s2;
  const double i_mid = specfun::bessel_i_scaled(BesselOrder::from_twice(n - 1), z);
  const double i_hi = specfun::bessel_i_scaled(BesselOrder::from_twice(n + 1), z);
  return -1.0 / s2 + (i_hi / i_mid) / (s2 * r);
}

// coth z - 1/z, by its Taylor series where the difference cancels.
double langevin(double z) {
  if (z < 0.25) {
    const double z2 = z * z;
    return z * (1.0 / 3.0 +
                z2 * (-1.0 / 45.0 +
                      z2 * (2.0 / 945.0 +
                            z2 * (-1.0 / 4725.0 + z2 * (2.0 / 93555.0 + z2 * (-1382.0 / 638512875.0))))));
  }
  const double t = z > kTanhSaturation ? 1.0 : std::tanh(z);
  return 1.0 / t - 1.0 / z;
}

double s2_score_coefficient(double r, double sigma) {
  const double s2 = sigma * sigma;
  return -1.0 / s2 + langevin(r / s2) / (s2 * r);
}

double s3_score_coefficient(double r, double sigma) {
  using specfun::BesselOrder;
  const double s2 = sigma * sigma;
  const double z = r / s2;
  // I0/I1 - 2/z equals I2/I1, which is evaluated directly where the difference cancels.
  const double g = z < 1.0 ? specfun::bessel_i_scaled(BesselOrder::from_twice(4), z) /
                                 specfun::bessel_i_scaled(BesselOrder::from_twice(2), z)
                           : specfun::bessel_ratio_i0_i1(z) - 2.0 / z;
  return -1.0 / s2 + g / (s2 * r);
}

Vector base_score_nsphere(const ScoreQuery& q) {
  const double r = sphere_query_norm(q);
  return scaled(q.x, nsphere_score_coefficient(q.manifold.sphere_dim(), r, q.sigma));
}

Vector base_score_s2(const ScoreQuery& q) {
  const double r = sphere_query_norm(q);
  if (q.manifold.sphere_dim() != 2) throw ValidationError("base_score_s2 requires S^2");
  return scaled(q.x, s2_score_coefficient(r, q.sigma));
}

Vector base_score_s3(const ScoreQuery& q) {
  const double r = sphere_query_norm(q);
  if (q.manifold.sphere_dim() != 3) throw ValidationError("base_score_s3 requires S^3");
  return scaled(q.x, s3_score_coefficient(r, q.sigma));
}

Vector base_score(const ScoreQuery& q) {
  if (q.manifold.is_discrete()) return base_score_discrete(q);
  switch (q.manifold.sphere_dim()) {
    case 2:
      return base_score_s2(q);
    case 3:
      return base_score_s3(q);
    default:
      return base_score_nsphere(q);
  }
}

Matrix base_score_batch(const Matrix& x, std::span<const double> sigmas,
                        const Manifold& manifold) {
  if (sigmas.size() != x.rows()) throw ValidationError("base_score_batch: one sigma per row");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector s = base_score(ScoreQuery{x.row(i), sigmas[i], manifold});
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

McScoreEstimate mc_score_oracle(const ScoreQuery& q, std::size_t n_samples, Rng& rng) {
  check_query(q);
  if (n_samples == 0) throw ValidationError("mc_score_oracle: n_samples must be positive");
  const std::size_t d = q.manifold.ambient_dim();
  const double inv_s2 = 1.0 / (q.sigma * q.sigma);
  const bool discrete = q.manifold.is_discrete();
  if (!discrete) sphere_query_norm(q);

  constexpr std::size_t kChunk = 1 << 16;
  const std::uint64_t base_seed = rng();
  const auto& kernels = simd::active();

  // Running sums relative to the largest log-weight seen so far.
  double top = -std::numeric_limits<double>::infinity();
  double s0 = 0.0, s2 = 0.0;
  Vector s1(d, 0.0), s3(d, 0.0), s4(d, 0.0);

  Matrix samples(kChunk, d);
  std::vector<double> log_w(kChunk), w(kChunk);
  for (std::size_t start = 0, chunk = 0; start < n_samples; start += kChunk, ++chunk) {
    const std::size_t count = std::min(kChunk, n_samples - start);
    SplitMix64 engine(derive_seed(base_seed, chunk));
    if (discrete) {
      const Matrix& pts = q.manifold.points();
      std::uniform_int_distribution<std::size_t> pick(0, pts.rows() - 1);
      for (std::size_t i = 0; i < count; ++i) {
        const auto src = pts.row(pick(engine));
        std::copy(src.begin(), src.end(), samples.row(i).begin());
      }
      kernels.squared_distances(samples.data(), count, d, q.x.data(), log_w.data());
      for (std::size_t i = 0; i < count; ++i) log_w[i] *= -0.5 * inv_s2;
    } else {
      std::normal_distribution<double> normal;
      for (std::size_t i = 0; i < count; ++i) {
        auto row = samples.row(i);
        double n2 = 0.0;
        do {
          n2 = 0.0;
          for (double& v : row) {
            v = normal(engine);
            n2 += v * v;
          }
        } while (n2 == 0.0);
        const double inv = 1.0 / std::sqrt(n2);
        for (double& v : row) v *= inv;
      }
      // ||x - x0||^2 = ||x||^2 - 2<x, x0> + 1; only the cross term varies.
      kernels.dot_rows(samples.data(), count, d, q.x.data(), log_w.data());
      for (std::size_t i = 0; i < count; ++i) log_w[i] *= inv_s2;
    }

    const double chunk_top = *std::max_element(log_w.begin(), log_w.begin() + count);
    if (chunk_top > top) {
      const double f = std::exp(top - chunk_top);
      s0 *= f;
      s2 *= f * f;
      for (std::size_t j = 0; j < d; ++j) {
        s1[j] *= f;
        s3[j] *= f * f;
        s4[j] *= f * f;
      }
      top = chunk_top;
    }
    for (std::size_t i = 0; i < count; ++i) log_w[i] -= top;
    kernels.exp(log_w.data(), w.data(), count);
    for (std::size_t i = 0; i < count; ++i) {
      const double wi = w[i];
      const double wi2 = wi * wi;
      s0 += wi;
      s2 += wi2;
      const auto row = samples.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        s1[j] += wi * row[j];
        s3[j] += wi2 * row[j];
        s4[j] += wi2 * row[j] * row[j];
      }
    }
  }

  McScoreEstimate est;
  est.n_samples = n_samples;
  est.ess = s0 * s0 / s2;
  if (!(est.ess >= kMinOracleEss))
    throw UnreliableEstimateError(
        "mc_score_oracle: effective sample size " + std::to_string(est.ess) + " below " +
            std::to_string(kMinOracleEss),
        est.ess);
  est.value.resize(d);
  est.std_error.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double mean = s1[j] / s0;
    const double var = std::max(0.0, s4[j] - 2.0 * mean * s3[j] + mean * mean * s2) / (s0 * s0);
    est.value[j] = (mean - q.x[j]) * inv_s2;
    est.std_error[j] = std::sqrt(var) * inv_s2;
  }
  return est;
}

}  // namespace mad
