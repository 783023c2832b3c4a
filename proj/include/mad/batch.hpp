#pragma once

#include <string_view>
#include <vector>

#include "mad/linalg.hpp"

namespace mad {

enum class Provenance { kData, kPerturbed, kGenerated };

std::string_view to_string(Provenance p);

// Ambient-space points plus where they came from. `sigmas` holds the noise
// level of each row (0 for clean data).
struct SampleBatch {
  Matrix points;
  Provenance provenance = Provenance::kData;
  std::vector<double> sigmas;

  std::size_t size() const noexcept { return points.rows(); }
  std::size_t dim() const noexcept { return points.cols(); }
};

}  // namespace mad
