#pragma once

// Closed-form scores of the Gaussian-noised uniform measure on a support
// (the "base" score), exact scores of arbitrary discrete distributions, and a
// Monte-Carlo estimator of the same quantities for validation.

#include <cstddef>
#include <span>

#include "mad/geometry.hpp"
#include "mad/linalg.hpp"
#include "mad/random.hpp"

namespace mad {

// A noisy point x_t at noise level sigma_t, relative to a support.
struct ScoreQuery {
  std::span<const double> x;
  double sigma;
  const Manifold& manifold;
};

// Sphere queries closer than this to the origin are rejected.
inline constexpr double kMinSphereQueryNorm = 1e-8;
// tanh(z) is taken as 1 above this argument.
inline constexpr double kTanhSaturation = 40.0;

// E^base[x0 | x_t]: softmax-weighted mean of the support points.
Vector base_posterior_mean_discrete(const ScoreQuery& q);
// (E^base[x0 | x_t] - x_t) / sigma^2.
Vector base_score_discrete(const ScoreQuery& q);

// Score of sum_i probs_i N_sigma(x - points_i). probs must be > 0 and sum to 1.
Vector exact_score_discrete(std::span<const double> x, double sigma, const Matrix& points,
                            std::span<const double> probs);

// log ||exact_score_discrete - base_score_discrete||, evaluated in the log
// domain so the gap stays resolvable after both scores agree to every bit.
// -inf when the two posteriors coincide.
double log_score_gap_discrete(std::span<const double> x, double sigma, const Matrix& points,
                              std::span<const double> probs);

// General n-sphere score via modified Bessel functions.
Vector base_score_nsphere(const ScoreQuery& q);
// S^2 closed form with tanh.
Vector base_score_s2(const ScoreQuery& q);
// S^3 (and SO(3) quaternions) via I_0 / I_1.
Vector base_score_s3(const ScoreQuery& q);

// Radial coefficient c with s^base(x) = c * x, for ||x|| = r on S^n.
double nsphere_score_coefficient(int n, double r, double sigma);
double s2_score_coefficient(double r, double sigma);
double s3_score_coefficient(double r, double sigma);

// Dispatches on the manifold: discrete sets, S^2 and S^3 use their dedicated
// forms, other spheres the general formula, rotations the S^3 form.
Vector base_score(const ScoreQuery& q);

// Row-wise base score for a batch with per-row sigma.
Matrix base_score_batch(const Matrix& x, std::span<const double> sigmas, const Manifold& manifold);

struct McScoreEstimate {
  Vector value;
  Vector std_error;  // per coordinate
  double ess = 0.0;  // effective sample size of the importance weights
  std::size_t n_samples = 0;
};

// Self-normalized importance-sampling estimate of the base score with x0 drawn
// from the uniform measure on the support. Sample chunks use substreams
// (seed, chunk) seeded from one draw of `rng`. Throws UnreliableEstimateError
// when the effective sample size is below kMinOracleEss.
inline constexpr double kMinOracleEss = 100.0;
McScoreEstimate mc_score_oracle(const ScoreQuery& q, std::size_t n_samples, Rng& rng);

}  // namespace mad
