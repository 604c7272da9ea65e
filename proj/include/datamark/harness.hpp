#pragma once

#include "datamark/dataset_io.hpp"
#include "datamark/metrics.hpp"
#include "datamark/synth.hpp"
#include "datamark/verify.hpp"
#include "datamark/watermark.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace datamark {

enum class ScenarioKind { Steal, IndependentTrigger, IndependentModel };

const char* scenario_name(ScenarioKind k);
ScenarioKind scenario_from_name(const std::string& s);

/// Synthetic data recipe for one experiment. Defaults are sized so a full
/// scenario finishes in well under two minutes on commodity hardware.
struct DataConfig {
  Modality modality = Modality::Tensor;
  int num_classes = 10;
  int n_per_class = 500;
  double train_fraction = 0.8;
  // tensor
  TensorShape shape{1, 16, 16};
  double sep = 3.0;
  // tokens
  int vocab = 200;
  int seq_len = 32;
  // graph
  std::pair<int, int> nodes_range{20, 40};
  std::vector<double> edge_probs;
  int graph_bins = 20;
  int graph_degree_cap = 39;

  static DataConfig tensor_default();
  static DataConfig token_default();
  static DataConfig graph_default();

  Dataset synthesize(std::uint64_t seed) const;
  Featurizer featurizer() const;
  nlohmann::json to_json() const;
  static DataConfig from_json(const nlohmann::json& j);
};

/// Builds a named trigger preset sized for the given dataset metadata.
/// Tensor: patch-line, patch-cross, blend, blend-alt, additive.
/// Tokens: word, word-alt, sentence, sentence-alt.
/// Graph:  subgraph-min, subgraph-rand, subgraph-min-alt, subgraph-rand-alt.
TriggerSpec make_trigger_preset(const std::string& name, const DatasetMeta& meta,
                                std::uint64_t seed);

/// The disjoint preset used when a scenario needs a trigger the model was
/// not trained on.
std::string independent_preset_for(const std::string& trained_preset);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Steal;
  DataConfig data;
  std::string train_trigger = "patch-line";
  std::string verify_trigger;  // empty = derived from kind
  double gamma = 0.1;
  int target_label = -1;  // -1 = half of num_classes
  TrainConfig train;
  VerificationConfig verify;
  std::uint64_t seed = 0;

  int resolved_target_label() const;
  std::string resolved_verify_trigger() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ScenarioSpec from_json(const nlohmann::json& j);

  static ScenarioSpec defaults_for(Modality modality, ScenarioKind kind);
};

struct ExperimentReport {
  nlohmann::json spec_echo;
  double ba_clean = 0.0;
  double ba_watermarked = 0.0;
  double wsr = 0.0;
  VerdictReport probability_verdict;
  VerdictReport label_only_verdict;
  PerturbationSummary perturbation;
  double wall_clock_seconds = 0.0;

  /// "spec" and "results" are bit-deterministic re-run to re-run;
  /// "provenance" (wall clock) is not part of that contract.
  nlohmann::json to_json() const;
};

/// Runs one audit scenario end to end: synthesizes data, trains the clean
/// and watermarked models, evaluates BA/WSR, and runs both verification
/// modes against the scenario's suspicious model and trigger.
ExperimentReport run_scenario(const ScenarioSpec& spec);

/// Writes report JSON to <out_dir>/report_<spec-hash>.json. Refuses to
/// silently overwrite a different report under the same name.
std::string write_report(const ExperimentReport& report, const std::string& out_dir);

struct GammaSweepRow {
  double gamma;
  double ba;
  double wsr;
};

/// One steal-style watermarking run per poisoning rate, seeds shared.
std::vector<GammaSweepRow> sweep_gamma(const std::vector<double>& gammas,
                                       const ScenarioSpec& base);

struct MSweepRow {
  int m;
  double p_steal;
  double p_independent;
};

/// Trains the models once, then repeats probability-available verification
/// for each sampling number: steal on the watermarked model, independent on
/// the clean model, both with the training trigger.
std::vector<MSweepRow> sweep_m(const std::vector<int>& ms, const ScenarioSpec& base);

struct FinetuneRow {
  int epoch;
  double ba;
  double wsr;
};

/// Last-layer fine-tuning on a benign fraction of the training split;
/// records (epoch, BA, WSR) with epoch 0 = the untouched watermarked model.
std::vector<FinetuneRow> finetune_resistance(const ScenarioSpec& base,
                                             double benign_fraction,
                                             const std::vector<int>& record_epochs,
                                             double finetune_lr = -1.0);

std::string gamma_rows_csv(const std::vector<GammaSweepRow>& rows);
std::string m_rows_csv(const std::vector<MSweepRow>& rows);
std::string finetune_rows_csv(const std::vector<FinetuneRow>& rows);
nlohmann::json gamma_rows_json(const std::vector<GammaSweepRow>& rows);
nlohmann::json m_rows_json(const std::vector<MSweepRow>& rows);
nlohmann::json finetune_rows_json(const std::vector<FinetuneRow>& rows);

}  // namespace datamark
