#pragma once

#include "datamark/dataset.hpp"

#include <json.hpp>

namespace datamark {

/// Maps any payload of its modality to a fixed-length real vector:
/// tensors are flattened, token sequences become an L1-normalized
/// bag-of-tokens over the vocabulary, graphs become a degree histogram.
struct Featurizer {
  Modality modality = Modality::Tensor;
  TensorShape shape{};  // tensor
  int vocab = 0;        // tokens
  int bins = 0;         // graph
  int degree_cap = 0;   // graph

  static Featurizer for_tensor(TensorShape shape);
  static Featurizer for_tokens(int vocab);
  static Featurizer for_graph(int bins, int degree_cap);

  /// Builds the featurizer a dataset naturally calls for (graph settings
  /// are explicit because they are model hyperparameters).
  static Featurizer for_dataset(const DatasetMeta& meta, int graph_bins = 20,
                                int graph_degree_cap = 39);

  int feature_dim() const;
  VectorX operator()(const Payload& p) const;

  nlohmann::json to_json() const;
  static Featurizer from_json(const nlohmann::json& j);
  bool operator==(const Featurizer&) const = default;
};

}  // namespace datamark
