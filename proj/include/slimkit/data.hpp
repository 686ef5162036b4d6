#pragma once

#include <cstdint>

#include "slimkit/model.hpp"

namespace slimkit {

enum class DatasetKind { kGaussianBlobs, kConcentricRings, kTeacherLabeled };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kGaussianBlobs;
  std::size_t n = 200;
  std::size_t dims = 4;
  std::size_t classes = 2;
  double noise = 0.5;
};

struct DataBundle {
  Dataset train;       // Split::kTrain
  Dataset validation;  // Split::kValidation
};

// Deterministic for (spec, seed); stratified 80/20 train/validation split.
// Requires n >= 2 * classes (ConfigError otherwise).
DataBundle generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace slimkit
