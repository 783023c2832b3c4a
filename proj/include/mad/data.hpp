#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mad/batch.hpp"
#include "mad/geometry.hpp"
#include "mad/net.hpp"

namespace mad {

// Points (cos 2 pi i / n, sin 2 pi i / n), i = 0..n-1.
Matrix circle_points(std::size_t n_coords);

// p_i proportional to exp(-decay * d_i), d_i the circular distance from
// index floor(n/4).
inline constexpr double kDefaultDecay = 0.8;
std::vector<double> skewed_pmf(std::size_t n_coords, double decay = kDefaultDecay);

// Throws ValidationError unless every entry is >= 0 and they sum to 1 (1e-9).
void validate_pmf(std::span<const double> pmf);

// i.i.d. categorical draws; row r uses substream (seed, r).
SampleBatch sample_discrete(const Matrix& points, std::span<const double> pmf, std::size_t n,
                            std::uint64_t seed);

struct VmfComponent {
  Vector mean;  // unit vector in R^{n+1}
  double kappa = 1.0;
  double weight = 1.0;
};

struct VmfMixture {
  int manifold_n = 2;  // S^n, n in {2, 3}
  std::vector<VmfComponent> components;

  void validate() const;
};

// Every component becomes itself plus its antipode, each at half weight.
VmfMixture antipodal_symmetrize(const VmfMixture& mixture);

// k components with uniformly random mean directions, shared kappa and equal
// weights.
VmfMixture random_vmf_mixture(int manifold_n, std::size_t k, double kappa, std::uint64_t seed);

// One draw from vMF(mean, kappa) on the unit sphere of R^d (Wood's algorithm).
Vector sample_vmf(std::span<const double> mean, double kappa, SplitMix64& engine);
Vector sample_vmf(std::span<const double> mean, double kappa, Rng& engine);

SampleBatch sample_vmf_mixture(const VmfMixture& mixture, std::size_t n, std::uint64_t seed);

// (lat, lon) in degrees to (cos lat cos lon, cos lat sin lon, sin lat).
Vector latlon_to_unit(double lat_deg, double lon_deg);

// Header "lat,lon", then one decimal pair per line; LF or CRLF. Any malformed
// row throws ParseError carrying its 1-based line number.
SampleBatch load_latlon_csv(const std::filesystem::path& path);

// Header x0,...,x{d-1}, one row per sample, %.17g.
void write_samples_csv(const std::filesystem::path& path, const Matrix& points);
Matrix read_samples_csv(const std::filesystem::path& path);

struct DiscreteUniform {
  std::size_t n_coords = 8;
};
struct DiscreteSkewed {
  std::size_t n_coords = 8;
  double decay = kDefaultDecay;
};
struct LatLonFile {
  std::filesystem::path path;
};

struct DatasetSpec {
  std::variant<DiscreteUniform, DiscreteSkewed, VmfMixture, LatLonFile> kind;
  std::uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
};

SampleBatch generate(const DatasetSpec& spec, std::size_t n);

// The manifold the dataset lives on: the circle points for discrete kinds,
// S^n for mixtures, S^2 for lat/lon data.
Manifold support_of(const DatasetSpec& spec);

// Target pmf over circle_points for discrete kinds; empty otherwise.
std::vector<double> target_pmf(const DatasetSpec& spec);

// Fresh draws per training step. File data is loaded once and resampled.
DataSampler sampler_for(const DatasetSpec& spec);

}  // namespace mad
