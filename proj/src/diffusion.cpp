#include "mad/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mad/basescore.hpp"
#include "mad/errors.hpp"

namespace mad {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kData:
      return "data";
    case Provenance::kPerturbed:
      return "perturbed";
    case Provenance::kGenerated:
      return "generated";
  }
  return "unknown";
}

NoiseSchedule NoiseSchedule::geometric(double sigma_min, double sigma_max,
                                       std::size_t num_scales) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
    throw ValidationError("noise schedule: need 0 < sigma_min < sigma_max");
  if (num_scales < 2) throw ValidationError("noise schedule: need at least 2 scales");
  std::vector<double> sigmas(num_scales);
  const double log_max = std::log(sigma_max);
  const double log_ratio = std::log(sigma_min / sigma_max) / static_cast<double>(num_scales - 1);
  for (std::size_t i = 0; i < num_scales; ++i)
    sigmas[i] = std::exp(log_max + log_ratio * static_cast<double>(i));
  sigmas.front() = sigma_max;
  sigmas.back() = sigma_min;
  return NoiseSchedule(std::move(sigmas));
}

Vector perturb(std::span<const double> x0, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ValidationError("perturb: sigma must be >= 0");
  Vector xt(x0.begin(), x0.end());
  if (sigma == 0.0) return xt;
  std::normal_distribution<double> normal;
  for (double& v : xt) v += sigma * normal(rng);
  return xt;
}

TrainTarget dsm_target(std::span<const double> x0, std::span<const double> xt, double sigma) {
  if (x0.size() != xt.size()) throw ValidationError("dsm_target: shape mismatch");
  if (!(sigma > 0.0)) throw ValidationError("dsm_target: sigma must be positive");
  TrainTarget t{{x0.begin(), x0.end()}, {xt.begin(), xt.end()}, sigma, Vector(x0.size())};
  for (std::size_t j = 0; j < x0.size(); ++j) t.residual_target[j] = (x0[j] - xt[j]) / sigma;
  return t;
}

TrainTarget mad_target(std::span<const double> x0, std::span<const double> xt, double sigma,
                       const Manifold& manifold) {
  TrainTarget t = dsm_target(x0, xt, sigma);
  const Vector base = base_score(ScoreQuery{xt, sigma, manifold});
  for (std::size_t j = 0; j < base.size(); ++j) t.residual_target[j] -= sigma * base[j];
  return t;
}

double loss_term(std::span<const double> model_output, const TrainTarget& target) {
  if (model_output.size() != target.residual_target.size())
    throw ValidationError("loss_term: shape mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < model_output.size(); ++j) {
    const double r = target.sigma * model_output[j] - target.residual_target[j];
    s += r * r;
  }
  return s;
}

ScoreField pointwise(PointScore f) {
  return [f = std::move(f)](const Matrix& x, double sigma) {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const Vector s = f(x.row(i), sigma);
      if (s.size() != x.cols()) throw ValidationError("score field returned wrong dimension");
      std::copy(s.begin(), s.end(), out.row(i).begin());
    }
    return out;
  };
}

DriftStats drift_stats(const Matrix& points) {
  DriftStats d;
  if (points.empty()) return d;
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double dev = std::abs(1.0 - norm(points.row(i)));
    total += dev;
    d.max = std::max(d.max, dev);
  }
  d.mean = total / static_cast<double>(points.rows());
  return d;
}

SamplingResult reverse_sample(const ScoreField& score, const NoiseSchedule& schedule,
                              std::size_t n, const Manifold& manifold, Rng& rng,
                              bool project_final) {
  const std::size_t d = manifold.ambient_dim();
  const std::uint64_t seed = rng();
  const auto& sig = schedule.sigmas();

  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 engine(derive_seed(seed, i, 0));
    std::normal_distribution<double> normal(0.0, sig.front());
    for (double& v : x.row(i)) v = normal(engine);
  }

  for (std::size_t step = 0; step + 1 < sig.size() && n > 0; ++step) {
    const double var_step = sig[step] * sig[step] - sig[step + 1] * sig[step + 1];
    const double noise_scale = std::sqrt(var_step);
    const Matrix s = score(x, sig[step]);
    if (s.rows() != n || s.cols() != d)
      throw ValidationError("reverse_sample: score field returned wrong shape");
    for (std::size_t i = 0; i < n; ++i) {
      const auto si = s.row(i);
      for (double v : si) {
        if (!std::isfinite(v)) {
          std::ostringstream msg;
          msg << "reverse_sample: non-finite score at sigma=" << sig[step]
              << " ||x||=" << norm(x.row(i)) << " (sample " << i << ")";
          throw NonFiniteError(msg.str());
        }
      }
      SplitMix64 engine(derive_seed(seed, i, step + 1));
      std::normal_distribution<double> normal;
      auto xi = x.row(i);
      for (std::size_t j = 0; j < d; ++j) xi[j] += var_step * si[j] + noise_scale * normal(engine);
    }
  }

  SamplingResult result;
  result.drift = drift_stats(x);
  if (project_final) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vector p = project(x.row(i), manifold);
      std::copy(p.begin(), p.end(), x.row(i).begin());
    }
  }
  result.batch.points = std::move(x);
  result.batch.provenance = Provenance::kGenerated;
  result.batch.sigmas.assign(n, schedule.sigma_min());
  return result;
}

}  // namespace mad
