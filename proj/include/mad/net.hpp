#pragma once

// MLP used as the score network s_theta (DSM) or the residual network
// delta_theta (MAD), with manual backpropagation and Adam.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mad/diffusion.hpp"
#include "mad/geometry.hpp"
#include "mad/linalg.hpp"
#include "mad/random.hpp"

namespace mad {

enum class Activation : std::uint8_t { kRelu = 0, kSilu = 1 };
enum class SigmaEmbedding : std::uint8_t { kLogSigmaConcat = 0, kFourier = 1 };
enum class LossKind : std::uint8_t { kDsm = 0, kMad = 1 };

std::string_view to_string(Activation a);
std::string_view to_string(SigmaEmbedding e);
std::string_view to_string(LossKind k);
Activation parse_activation(std::string_view s);
SigmaEmbedding parse_sigma_embedding(std::string_view s);
LossKind parse_loss_kind(std::string_view s);

struct MlpConfig {
  std::size_t input_dim = 2;  // ambient dimension; the output has the same size
  std::size_t hidden_dim = 128;
  std::size_t num_hidden_layers = 3;
  Activation activation = Activation::kSilu;
  SigmaEmbedding sigma_embedding = SigmaEmbedding::kLogSigmaConcat;
  std::size_t fourier_dim = 16;  // used by kFourier, must be even
  bool antisymmetrize = false;   // output 1/2 (f(x) - f(-x))

  // Five hidden layers of 512 units.
  static MlpConfig large_preset(std::size_t input_dim);

  void validate() const;
  std::size_t embedding_dim() const;

  bool operator==(const MlpConfig&) const = default;
};

struct LayerShape {
  std::size_t fan_in;
  std::size_t fan_out;
  std::size_t weight_offset;  // fan_in x fan_out, row-major
  std::size_t bias_offset;
};

// All weights and biases in one flat vector, with Adam moments alongside.
struct NetworkParams {
  std::vector<LayerShape> layers;
  std::vector<double> theta;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step = 0;

  std::size_t size() const noexcept { return theta.size(); }
};

NetworkParams layout_params(const MlpConfig& config);
// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for hidden layers; the output layer
// starts at zero, so a MAD model starts exactly at the base score.
NetworkParams init_params(const MlpConfig& config, std::uint64_t seed);

// Per-row sigma features appended to x.
void embed_sigma(const MlpConfig& config, double sigma, std::span<double> out);

Matrix forward(const NetworkParams& params, const MlpConfig& config, const Matrix& x,
               std::span<const double> sigmas);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as NetworkParams::theta
};

// loss = mean_b ||sigma_b * forward(x_b) - target_b||^2 and its gradient.
LossAndGradient backward(const NetworkParams& params, const MlpConfig& config, const Matrix& x,
                         const Matrix& residual_targets, std::span<const double> sigmas);

void adam_step(NetworkParams& params, std::span<const double> gradient, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Draws a batch of clean data points.
using DataSampler = std::function<Matrix(std::size_t n, Rng& rng)>;
// Uniform resampling with replacement from a fixed dataset.
DataSampler resample_rows(Matrix dataset);

struct TrainOptions {
  LossKind loss = LossKind::kMad;
  std::size_t steps = 2000;
  std::size_t batch_size = 512;
  double lr = 7e-4;
  std::uint64_t seed = 0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<double> loss_curve;  // batch loss before each update
};

// Per step: draw a batch, a scale index per row uniformly over the schedule,
// perturb, build DSM or MAD targets, one Adam step. Deterministic in the seed.
// Throws NonFiniteError naming the step on a non-finite loss.
TrainResult train(const MlpConfig& config, const TrainOptions& options, const DataSampler& data,
                  const NoiseSchedule& schedule, const Manifold& manifold);

// Score field of a trained model: s_theta for DSM, s^base + delta_theta for MAD.
ScoreField model_score_field(NetworkParams params, MlpConfig config, LossKind loss,
                             Manifold manifold);

// Checkpoint file: magic "MADCKPT\0", u32 version, MlpConfig fields, loss kind,
// u64 step, u64 parameter count, then for each layer the fan_in x fan_out
// weights row-major followed by the biases as little-endian f64, and a CRC-32
// trailer over everything before it.
struct Checkpoint {
  MlpConfig config;
  LossKind loss = LossKind::kMad;
  NetworkParams params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mad
