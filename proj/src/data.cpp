#include "slimkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "slimkit/errors.hpp"
#include "slimkit/rng.hpp"

namespace slimkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct RawData {
  Matrix inputs;
  std::vector<int> labels;
};

RawData gaussian_blobs(const DatasetSpec& spec, std::mt19937_64& rng) {
  // One well-separated mean per class at radius 4 in a seeded random direction.
  std::normal_distribution<double> unit(0.0, 1.0);
  Matrix means(spec.classes, spec.dims);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double norm = 0.0;
    for (std::size_t d = 0; d < spec.dims; ++d) {
      means(c, d) = unit(rng);
      norm += means(c, d) * means(c, d);
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < spec.dims; ++d) means(c, d) *= 4.0 / norm;
  }
  RawData raw{Matrix(spec.n, spec.dims), std::vector<int>(spec.n)};
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.classes;
    raw.labels[i] = static_cast<int>(c);
    for (std::size_t d = 0; d < spec.dims; ++d) {
      raw.inputs(i, d) = means(c, d) + spec.noise * unit(rng);
    }
  }
  return raw;
}

RawData concentric_rings(const DatasetSpec& spec, std::mt19937_64& rng) {
  if (spec.dims < 2) throw ConfigError("concentric rings need dims >= 2");
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  RawData raw{Matrix(spec.n, spec.dims), std::vector<int>(spec.n)};
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t c = i % spec.classes;
    raw.labels[i] = static_cast<int>(c);
    const double radius = 1.0 + 2.0 * static_cast<double>(c) + spec.noise * unit(rng);
    const double theta = angle(rng);
    raw.inputs(i, 0) = radius * std::cos(theta);
    raw.inputs(i, 1) = radius * std::sin(theta);
    for (std::size_t d = 2; d < spec.dims; ++d) raw.inputs(i, d) = spec.noise * unit(rng);
  }
  return raw;
}

RawData teacher_labeled(const DatasetSpec& spec, std::mt19937_64& rng, std::uint64_t seed) {
  // Labels come from a random frozen teacher network's argmax.
  std::normal_distribution<double> unit(0.0, 1.0);
  RawData raw{Matrix(spec.n, spec.dims), std::vector<int>(spec.n)};
  for (double& v : raw.inputs.data) v = unit(rng);
  const Model teacher = make_model(spec.dims, {2 * spec.dims}, spec.classes,
                                   derive_seed(seed, "labeling-teacher"));
  const Matrix logits = forward(teacher, raw.inputs);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    raw.labels[i] = static_cast<int>(best);
  }
  return raw;
}

}  // namespace

DataBundle generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.n < 2 * spec.classes) {
    throw ConfigError("dataset: n must be >= 2 * classes");
  }
  if (spec.classes < 2) throw ConfigError("dataset: need at least 2 classes");
  if (spec.dims < 1) throw ConfigError("dataset: need at least 1 dim");
  if (spec.noise < 0.0) throw ConfigError("dataset: negative noise");

  auto rng = make_rng(derive_seed(seed, "dataset"));
  RawData raw;
  switch (spec.kind) {
    case DatasetKind::kGaussianBlobs:
      raw = gaussian_blobs(spec, rng);
      break;
    case DatasetKind::kConcentricRings:
      raw = concentric_rings(spec, rng);
      break;
    case DatasetKind::kTeacherLabeled:
      raw = teacher_labeled(spec, rng, seed);
      break;
  }

  // Stratified 80/20 split: shuffle each class's indices, first fifth to
  // validation.
  std::vector<std::vector<std::size_t>> per_class(spec.classes);
  for (std::size_t i = 0; i < spec.n; ++i) {
    per_class[static_cast<std::size_t>(raw.labels[i])].push_back(i);
  }
  std::vector<std::size_t> train_idx, val_idx;
  auto split_rng = make_rng(derive_seed(seed, "split"));
  for (auto& idx : per_class) {
    std::shuffle(idx.begin(), idx.end(), split_rng);
    const std::size_t n_val = idx.size() >= 2 ? std::max<std::size_t>(1, idx.size() / 5) : 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_val ? val_idx : train_idx).push_back(idx[k]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  auto take = [&](const std::vector<std::size_t>& idx, Split split) {
    Dataset d;
    d.split = split;
    d.inputs = Matrix(idx.size(), spec.dims);
    d.labels.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      for (std::size_t j = 0; j < spec.dims; ++j) d.inputs(k, j) = raw.inputs(idx[k], j);
      d.labels[k] = raw.labels[idx[k]];
    }
    return d;
  };
  return DataBundle{take(train_idx, Split::kTrain), take(val_idx, Split::kValidation)};
}

}  // namespace slimkit
