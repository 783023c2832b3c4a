#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mad/data.hpp"
#include "mad/diffusion.hpp"
#include "mad/geometry.hpp"
#include "mad/net.hpp"

namespace mad {

struct ScheduleConfig {
  double sigma_min = 1e-4;
  double sigma_max = 2.0;
  std::size_t num_scales = 100;

  NoiseSchedule build() const { return NoiseSchedule::geometric(sigma_min, sigma_max, num_scales); }
};

struct SamplingConfig {
  std::size_t n = 10000;
  bool project = false;
  std::uint64_t seed = 0;
};

// Everything one experiment needs. Parsed from JSON; every key is optional
// except the dataset, and unknown keys are rejected.
struct RunConfig {
  std::string manifold = "auto";  // "auto" derives it from the dataset
  DatasetSpec dataset;
  ScheduleConfig schedule;
  MlpConfig model;
  TrainOptions training;
  SamplingConfig sampling;
  std::filesystem::path output_dir = "out";

  // Throws ValidationError naming the offending field.
  void validate() const;
  Manifold resolve_manifold() const;

  // Fully expanded JSON (defaults filled in, random mixtures materialized).
  // parse(to_json()) reproduces the config and re-emits the same bytes.
  std::string to_json() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

// Writes config.to_json() to dir/config.json.
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace mad
