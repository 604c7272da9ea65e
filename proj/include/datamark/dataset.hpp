#pragma once

#include "datamark/sample.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace datamark {

struct DatasetMeta {
  Modality modality = Modality::Tensor;
  int num_classes = 0;
  TensorShape shape{};  // tensor modality only
  int vocab = 0;        // tokens modality only
  bool operator==(const DatasetMeta&) const = default;
};

/// A labeled dataset of uniform modality. Immutable by convention after
/// construction; all mutating pipelines return fresh copies.
struct Dataset {
  DatasetMeta meta;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }

  /// Checks every type invariant (labels < K, payload/modality agreement,
  /// tensor range and shape, token range, graph canonical form).
  void validate() const;
};

bool operator==(const Dataset& a, const Dataset& b);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::string> warnings;
};

/// Stratified train/test split: per class, round(train_fraction * n_k)
/// samples go to train. A single-sample class goes entirely to train and
/// adds a warning. Deterministic given spec.seed.
SplitResult stratified_split(const Dataset& d, const SplitSpec& spec);

std::uint64_t payload_hash(const Payload& p);

/// Content hash covering metadata and every sample, as 16 hex chars.
std::string dataset_fingerprint(const Dataset& d);

}  // namespace datamark
