#pragma once

#include "datamark/trigger.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace datamark {

/// The owner's secret record: everything needed to reproduce the poisoning
/// and to run verification later.
struct WatermarkManifest {
  TriggerSpec trigger;
  int target_label = 0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> modified_indices;  // sorted, unique
  std::string dataset_fingerprint;    // of the benign source dataset

  nlohmann::json to_json() const;
  static WatermarkManifest from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static WatermarkManifest load(const std::string& path);
};

struct WatermarkResult {
  Dataset poisoned;
  WatermarkManifest manifest;
};

/// Selects round(gamma * N) indices uniformly without replacement and
/// replaces each selected sample with (apply_trigger(x), target_label).
/// Every other sample is carried over untouched.
WatermarkResult watermark_dataset(const Dataset& benign, const TriggerSpec& g,
                                  int target_label, double gamma,
                                  std::uint64_t seed);

/// Perturbation statistics over the modified samples only; a quantitative
/// stand-in for eyeballing how visible the watermark is.
struct PerturbationSummary {
  Modality modality = Modality::Tensor;
  int modified_count = 0;
  // tensor
  double mean_l0 = 0.0;
  double mean_l2 = 0.0;
  double mean_linf = 0.0;
  double max_linf = 0.0;
  // tokens
  double mean_tokens_added = 0.0;
  // graph
  double mean_nodes_added = 0.0;
  double mean_edges_added = 0.0;

  nlohmann::json to_json() const;
};

PerturbationSummary perturbation_report(const Dataset& benign,
                                        const Dataset& poisoned,
                                        const WatermarkManifest& manifest);

}  // namespace datamark
