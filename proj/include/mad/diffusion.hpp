#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mad/batch.hpp"
#include "mad/geometry.hpp"
#include "mad/linalg.hpp"
#include "mad/random.hpp"

namespace mad {

// Geometric sigma grid of the variance-exploding SDE, descending from
// sigma_max to sigma_min. Time is parameterized by sigma directly.
class NoiseSchedule {
 public:
  static NoiseSchedule geometric(double sigma_min, double sigma_max, std::size_t num_scales);

  double sigma_min() const noexcept { return sigmas_.back(); }
  double sigma_max() const noexcept { return sigmas_.front(); }
  std::size_t num_scales() const noexcept { return sigmas_.size(); }
  const std::vector<double>& sigmas() const noexcept { return sigmas_; }
  double operator[](std::size_t i) const { return sigmas_[i]; }

 private:
  explicit NoiseSchedule(std::vector<double> sigmas) : sigmas_(std::move(sigmas)) {}
  std::vector<double> sigmas_;
};

// x0 + sigma * eps, eps ~ N(0, I).
Vector perturb(std::span<const double> x0, double sigma, Rng& rng);

// Regression pair for one noisy sample. The loss term is
// ||sigma * model(xt, sigma) - residual_target||^2.
struct TrainTarget {
  Vector x0;
  Vector xt;
  double sigma = 0.0;
  Vector residual_target;
};

// (x0 - xt) / sigma
TrainTarget dsm_target(std::span<const double> x0, std::span<const double> xt, double sigma);
// (x0 - xt) / sigma - sigma * s^base(xt, sigma)
TrainTarget mad_target(std::span<const double> x0, std::span<const double> xt, double sigma,
                       const Manifold& manifold);

// ||sigma * model_output - target.residual_target||^2
double loss_term(std::span<const double> model_output, const TrainTarget& target);

// Batched score evaluation: rows of x at a common sigma.
using ScoreField = std::function<Matrix(const Matrix& x, double sigma)>;
using PointScore = std::function<Vector(std::span<const double> x, double sigma)>;
ScoreField pointwise(PointScore f);

struct DriftStats {
  double mean = 0.0;
  double max = 0.0;
};

struct SamplingResult {
  SampleBatch batch;
  DriftStats drift;  // |1 - ||x|||, before any projection
};

// Reverse-time Euler-Maruyama over the schedule, starting from
// N(0, sigma_max^2 I). Step i uses the score at sigma_i and moves by
// d(sigma^2) = sigma_i^2 - sigma_{i+1}^2. Noise for (sample, step) comes from
// substream (seed, sample, step) with the seed drawn once from `rng`.
// Throws NonFiniteError naming sigma and ||x|| on a non-finite score.
SamplingResult reverse_sample(const ScoreField& score, const NoiseSchedule& schedule,
                              std::size_t n, const Manifold& manifold, Rng& rng,
                              bool project_final);

DriftStats drift_stats(const Matrix& points);

}  // namespace mad
