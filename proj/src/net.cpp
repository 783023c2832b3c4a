#include "mad/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mad/basescore.hpp"
#include "mad/errors.hpp"
#include "mad/simd/kernels.hpp"

namespace mad {

std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "silu"; }
std::string_view to_string(SigmaEmbedding e) {
  return e == SigmaEmbedding::kFourier ? "fourier" : "log_sigma_concat";
}
std::string_view to_string(LossKind k) { return k == LossKind::kDsm ? "dsm" : "mad"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "silu") return Activation::kSilu;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

SigmaEmbedding parse_sigma_embedding(std::string_view s) {
  if (s == "log_sigma_concat") return SigmaEmbedding::kLogSigmaConcat;
  if (s == "fourier") return SigmaEmbedding::kFourier;
  throw ValidationError("unknown sigma embedding '" + std::string(s) + "'");
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "dsm") return LossKind::kDsm;
  if (s == "mad") return LossKind::kMad;
  throw ValidationError("unknown loss kind '" + std::string(s) + "'");
}

MlpConfig MlpConfig::large_preset(std::size_t input_dim) {
  MlpConfig c;
  c.input_dim = input_dim;
  c.hidden_dim = 512;
  c.num_hidden_layers = 5;
  return c;
}

void MlpConfig::validate() const {
  if (input_dim < 1) throw ValidationError("model: input_dim must be >= 1");
  if (hidden_dim < 1) throw ValidationError("model: hidden_dim must be >= 1");
  if (num_hidden_layers < 1) throw ValidationError("model: num_hidden_layers must be >= 1");
  if (sigma_embedding == SigmaEmbedding::kFourier && (fourier_dim == 0 || fourier_dim % 2 != 0))
    throw ValidationError("model: fourier_dim must be positive and even");
}

std::size_t MlpConfig::embedding_dim() const {
  return sigma_embedding == SigmaEmbedding::kFourier ? fourier_dim : 1;
}

NetworkParams layout_params(const MlpConfig& config) {
  config.validate();
  NetworkParams p;
  std::size_t fan_in = config.input_dim + config.embedding_dim();
  std::size_t offset = 0;
  for (std::size_t l = 0; l <= config.num_hidden_layers; ++l) {
    const std::size_t fan_out = l == config.num_hidden_layers ? config.input_dim : config.hidden_dim;
    LayerShape shape{fan_in, fan_out, offset, offset + fan_in * fan_out};
    offset = shape.bias_offset + fan_out;
    p.layers.push_back(shape);
    fan_in = fan_out;
  }
  p.theta.assign(offset, 0.0);
  p.adam_m.assign(offset, 0.0);
  p.adam_v.assign(offset, 0.0);
  return p;
}

NetworkParams init_params(const MlpConfig& config, std::uint64_t seed) {
  NetworkParams p = layout_params(config);
  Rng rng(derive_seed(seed, 0x1417));
  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
    const LayerShape& s = p.layers[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = s.weight_offset; i < s.bias_offset + s.fan_out; ++i) p.theta[i] = u(rng);
  }
  return p;
}

void embed_sigma(const MlpConfig& config, double sigma, std::span<double> out) {
  const double log_sigma = std::log(sigma);
  if (config.sigma_embedding == SigmaEmbedding::kLogSigmaConcat) {
    out[0] = log_sigma;
    return;
  }
  // Fixed frequencies pi/8 * 2^k over log sigma.
  const std::size_t half = config.fourier_dim / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double w = std::numbers::pi / 8.0 * std::ldexp(1.0, static_cast<int>(k));
    out[2 * k] = std::sin(w * log_sigma);
    out[2 * k + 1] = std::cos(w * log_sigma);
  }
}

namespace {

void check_shapes(const NetworkParams& params, const MlpConfig& config, const Matrix& x,
                  std::span<const double> sigmas) {
  if (x.cols() != config.input_dim)
    throw ValidationError("network: input has " + std::to_string(x.cols()) +
                          " columns, model expects " + std::to_string(config.input_dim));
  if (sigmas.size() != x.rows()) throw ValidationError("network: one sigma per row required");
  if (params.layers.size() != config.num_hidden_layers + 1 ||
      params.layers.front().fan_in != config.input_dim + config.embedding_dim())
    throw ValidationError("network: parameters do not match the configuration");
  for (double s : sigmas)
    if (!(s > 0.0)) throw ValidationError("network: sigma must be positive");
}

// Network input rows: [x | embed(sigma)], followed by [-x | embed(sigma)] when
// antisymmetrized.
Matrix build_input(const MlpConfig& config, const Matrix& x, std::span<const double> sigmas) {
  const std::size_t b = x.rows();
  const std::size_t branches = config.antisymmetrize ? 2 : 1;
  const std::size_t width = config.input_dim + config.embedding_dim();
  Matrix in(b * branches, width);
  for (std::size_t i = 0; i < b; ++i) {
    auto row = in.row(i);
    std::copy(x.row(i).begin(), x.row(i).end(), row.begin());
    embed_sigma(config, sigmas[i], row.subspan(config.input_dim));
    if (branches == 2) {
      auto neg = in.row(b + i);
      for (std::size_t j = 0; j < config.input_dim; ++j) neg[j] = -row[j];
      std::copy(row.begin() + config.input_dim, row.end(), neg.begin() + config.input_dim);
    }
  }
  return in;
}

void apply_activation(Activation a, const Matrix& z, Matrix& h) {
  const std::size_t n = z.rows() * z.cols();
  if (a == Activation::kSilu) {
    simd::active().silu(z.data(), h.data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i) h.data()[i] = std::max(0.0, z.data()[i]);
  }
}

void activation_backward(Activation a, const Matrix& z, Matrix& grad) {
  const std::size_t n = z.rows() * z.cols();
  if (a == Activation::kSilu) {
    simd::active().silu_backward(z.data(), grad.data(), grad.data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (!(z.data()[i] > 0.0)) grad.data()[i] = 0.0;
  }
}

// Z = H * W + b for one layer.
void affine(const NetworkParams& p, const LayerShape& s, const Matrix& h, Matrix& z) {
  z = Matrix(h.rows(), s.fan_out);
  simd::active().gemm(h.rows(), s.fan_out, s.fan_in, h.data(), s.fan_in,
                      p.theta.data() + s.weight_offset, s.fan_out, z.data(), s.fan_out, false);
  const double* bias = p.theta.data() + s.bias_offset;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < s.fan_out; ++j) row[j] += bias[j];
  }
}

void check_finite(const Matrix& m, std::size_t layer) {
  for (double v : m.storage())
    if (!std::isfinite(v))
      throw NonFiniteError("network: non-finite activation in layer " + std::to_string(layer));
}

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each hidden layer
  Matrix raw;                  // f over all branch rows
};

ForwardCache run_forward(const NetworkParams& params, const MlpConfig& config, const Matrix& x,
                         std::span<const double> sigmas) {
  ForwardCache cache;
  cache.inputs.push_back(build_input(config, x, sigmas));
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Matrix z;
    affine(params, params.layers[l], cache.inputs.back(), z);
    check_finite(z, l);
    if (l == last) {
      cache.raw = std::move(z);
    } else {
      Matrix h(z.rows(), z.cols());
      apply_activation(config.activation, z, h);
      cache.pre.push_back(std::move(z));
      cache.inputs.push_back(std::move(h));
    }
  }
  return cache;
}

Matrix combine_branches(const MlpConfig& config, const Matrix& raw, std::size_t b) {
  if (!config.antisymmetrize) return raw;
  Matrix out(b, raw.cols());
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < raw.cols(); ++j) out(i, j) = 0.5 * (raw(i, j) - raw(b + i, j));
  return out;
}

}  // namespace

Matrix forward(const NetworkParams& params, const MlpConfig& config, const Matrix& x,
               std::span<const double> sigmas) {
  check_shapes(params, config, x, sigmas);
  if (x.empty()) return Matrix(0, config.input_dim);
  return combine_branches(config, run_forward(params, config, x, sigmas).raw, x.rows());
}

LossAndGradient backward(const NetworkParams& params, const MlpConfig& config, const Matrix& x,
                         const Matrix& residual_targets, std::span<const double> sigmas) {
  check_shapes(params, config, x, sigmas);
  if (residual_targets.rows() != x.rows() || residual_targets.cols() != x.cols())
    throw ValidationError("backward: targets must match the batch shape");
  const std::size_t b = x.rows();
  LossAndGradient result;
  result.gradient.assign(params.size(), 0.0);
  if (b == 0) return result;

  ForwardCache cache = run_forward(params, config, x, sigmas);
  const Matrix out = combine_branches(config, cache.raw, b);

  // d loss / d out = 2 sigma (sigma out - target) / B
  Matrix grad_raw(cache.raw.rows(), cache.raw.cols());
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double r = sigmas[i] * out(i, j) - residual_targets(i, j);
      loss += r * r;
      const double g = 2.0 * sigmas[i] * r * inv_b;
      if (config.antisymmetrize) {
        grad_raw(i, j) = 0.5 * g;
        grad_raw(b + i, j) = -0.5 * g;
      } else {
        grad_raw(i, j) = g;
      }
    }
  }
  result.loss = loss * inv_b;

  const auto& k = simd::active();
  Matrix grad = std::move(grad_raw);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerShape& s = params.layers[l];
    const Matrix& h = cache.inputs[l];
    const std::size_t rows = h.rows();
    // dW = H^T dZ
    const Matrix ht = h.transposed();
    k.gemm(s.fan_in, s.fan_out, rows, ht.data(), rows, grad.data(), s.fan_out,
           result.gradient.data() + s.weight_offset, s.fan_out, false);
    double* db = result.gradient.data() + s.bias_offset;
    for (std::size_t i = 0; i < rows; ++i) {
      const auto row = grad.row(i);
      for (std::size_t j = 0; j < s.fan_out; ++j) db[j] += row[j];
    }
    if (l == 0) break;
    // dH = dZ W^T
    Matrix wt(s.fan_out, s.fan_in);
    const double* w = params.theta.data() + s.weight_offset;
    for (std::size_t r = 0; r < s.fan_in; ++r)
      for (std::size_t c = 0; c < s.fan_out; ++c) wt(c, r) = w[r * s.fan_out + c];
    Matrix grad_h(rows, s.fan_in);
    k.gemm(rows, s.fan_in, s.fan_out, grad.data(), s.fan_out, wt.data(), s.fan_in,
           grad_h.data(), s.fan_in, false);
    activation_backward(config.activation, cache.pre[l - 1], grad_h);
    grad = std::move(grad_h);
  }
  return result;
}

void adam_step(NetworkParams& params, std::span<const double> gradient, double lr, double beta1,
               double beta2, double eps) {
  if (gradient.size() != params.size()) throw ValidationError("adam_step: gradient size mismatch");
  ++params.step;
  const double t = static_cast<double>(params.step);
  const simd::AdamCoeffs c{lr, beta1, beta2, eps, 1.0 - std::pow(beta1, t),
                           1.0 - std::pow(beta2, t)};
  simd::active().adam(params.theta.data(), params.adam_m.data(), params.adam_v.data(),
                      gradient.data(), params.size(), c);
}

DataSampler resample_rows(Matrix dataset) {
  if (dataset.empty()) throw ValidationError("dataset is empty");
  return [data = std::move(dataset)](std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
    Matrix out(n, data.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = data.row(pick(rng));
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  };
}

TrainResult train(const MlpConfig& config, const TrainOptions& options, const DataSampler& data,
                  const NoiseSchedule& schedule, const Manifold& manifold) {
  config.validate();
  if (config.input_dim != manifold.ambient_dim())
    throw ValidationError("train: model input_dim does not match the manifold");
  if (options.batch_size == 0) throw ValidationError("train: batch_size must be positive");
  if (!(options.lr > 0.0)) throw ValidationError("train: lr must be positive");

  TrainResult result{init_params(config, options.seed), {}};
  result.loss_curve.reserve(options.steps);
  Rng rng(derive_seed(options.seed, 0x7a1));
  std::uniform_int_distribution<std::size_t> scale_index(0, schedule.num_scales() - 1);
  std::normal_distribution<double> normal;
  const std::size_t d = config.input_dim;

  for (std::size_t step = 0; step < options.steps; ++step) {
    const Matrix x0 = data(options.batch_size, rng);
    if (x0.rows() != options.batch_size || x0.cols() != d)
      throw ValidationError("train: data sampler returned a batch of the wrong shape");
    std::vector<double> sigmas(x0.rows());
    Matrix xt(x0.rows(), d);
    Matrix targets(x0.rows(), d);
    for (std::size_t i = 0; i < x0.rows(); ++i) {
      const double sigma = schedule[scale_index(rng)];
      sigmas[i] = sigma;
      auto row = xt.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] = x0(i, j) + sigma * normal(rng);
      const TrainTarget t = options.loss == LossKind::kMad
                                ? mad_target(x0.row(i), row, sigma, manifold)
                                : dsm_target(x0.row(i), row, sigma);
      std::copy(t.residual_target.begin(), t.residual_target.end(), targets.row(i).begin());
    }
    const LossAndGradient lg = backward(result.params, config, xt, targets, sigmas);
    if (!std::isfinite(lg.loss))
      throw NonFiniteError("train: non-finite loss at step " + std::to_string(step));
    result.loss_curve.push_back(lg.loss);
    adam_step(result.params, lg.gradient, options.lr);
  }
  return result;
}

ScoreField model_score_field(NetworkParams params, MlpConfig config, LossKind loss,
                             Manifold manifold) {
  return [params = std::move(params), config = std::move(config), loss,
          manifold = std::move(manifold)](const Matrix& x, double sigma) {
    const std::vector<double> sigmas(x.rows(), sigma);
    Matrix out = forward(params, config, x, sigmas);
    if (loss == LossKind::kMad) {
      const Matrix base = base_score_batch(x, sigmas, manifold);
      for (std::size_t i = 0; i < out.storage().size(); ++i) out.storage()[i] += base.storage()[i];
    }
    return out;
  };
}

}  // namespace mad
