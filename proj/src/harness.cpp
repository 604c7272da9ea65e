#include "datamark/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace datamark {

using nlohmann::json;

namespace seed_stream {
constexpr std::uint64_t data = 0;
constexpr std::uint64_t split = 1;
constexpr std::uint64_t trigger = 2;
constexpr std::uint64_t poison = 3;
constexpr std::uint64_t train_clean = 4;
constexpr std::uint64_t train_wm = 5;
constexpr std::uint64_t verify = 6;
constexpr std::uint64_t finetune = 7;
}  // namespace seed_stream

const char* scenario_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Steal: return "steal";
    case ScenarioKind::IndependentTrigger: return "independent-trigger";
    case ScenarioKind::IndependentModel: return "independent-model";
  }
  return "?";
}

ScenarioKind scenario_from_name(const std::string& s) {
  if (s == "steal") return ScenarioKind::Steal;
  if (s == "independent-trigger") return ScenarioKind::IndependentTrigger;
  if (s == "independent-model") return ScenarioKind::IndependentModel;
  throw std::invalid_argument("unknown scenario: " + s);
}

DataConfig DataConfig::tensor_default() {
  DataConfig c;
  c.modality = Modality::Tensor;
  c.num_classes = 10;
  c.n_per_class = 500;
  c.shape = {1, 16, 16};
  c.sep = 3.0;
  return c;
}

DataConfig DataConfig::token_default() {
  DataConfig c;
  c.modality = Modality::Tokens;
  c.num_classes = 4;
  c.n_per_class = 250;
  c.vocab = 200;
  c.seq_len = 8;
  return c;
}

DataConfig DataConfig::graph_default() {
  DataConfig c;
  c.modality = Modality::Graph;
  c.num_classes = 3;
  c.n_per_class = 300;
  c.nodes_range = {20, 40};
  c.edge_probs = {0.1, 0.3, 0.6};
  c.graph_bins = 40;
  c.graph_degree_cap = 39;
  return c;
}

Dataset DataConfig::synthesize(std::uint64_t seed) const {
  switch (modality) {
    case Modality::Tensor:
      return synth_tensor_dataset(num_classes, n_per_class, shape, sep, seed);
    case Modality::Tokens:
      return synth_token_dataset(num_classes, n_per_class, vocab, seq_len, seed);
    case Modality::Graph:
      return synth_graph_dataset(num_classes, n_per_class, nodes_range,
                                 edge_probs, seed);
  }
  throw std::logic_error("unreachable modality");
}

Featurizer DataConfig::featurizer() const {
  switch (modality) {
    case Modality::Tensor: return Featurizer::for_tensor(shape);
    case Modality::Tokens: return Featurizer::for_tokens(vocab);
    case Modality::Graph: return Featurizer::for_graph(graph_bins, graph_degree_cap);
  }
  throw std::logic_error("unreachable modality");
}

json DataConfig::to_json() const {
  json j;
  j["modality"] = modality_name(modality);
  j["num_classes"] = num_classes;
  j["n_per_class"] = n_per_class;
  j["train_fraction"] = train_fraction;
  j["shape"] = json::array({shape.c, shape.h, shape.w});
  j["sep"] = sep;
  j["vocab"] = vocab;
  j["seq_len"] = seq_len;
  j["nodes_range"] = json::array({nodes_range.first, nodes_range.second});
  j["edge_probs"] = edge_probs;
  j["graph_bins"] = graph_bins;
  j["graph_degree_cap"] = graph_degree_cap;
  return j;
}

DataConfig DataConfig::from_json(const json& j) {
  DataConfig c;
  c.modality = modality_from_name(j.at("modality").get<std::string>());
  c.num_classes = j.at("num_classes").get<int>();
  c.n_per_class = j.at("n_per_class").get<int>();
  c.train_fraction = j.at("train_fraction").get<double>();
  const auto& s = j.at("shape");
  c.shape = {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
  c.sep = j.at("sep").get<double>();
  c.vocab = j.at("vocab").get<int>();
  c.seq_len = j.at("seq_len").get<int>();
  c.nodes_range = {j.at("nodes_range").at(0).get<int>(),
                   j.at("nodes_range").at(1).get<int>()};
  c.edge_probs = j.at("edge_probs").get<std::vector<double>>();
  c.graph_bins = j.at("graph_bins").get<int>();
  c.graph_degree_cap = j.at("graph_degree_cap").get<int>();
  return c;
}

namespace {

// Trained trigger degrees sit above every natural degree band of the default
// graph recipe; the alternate preset halves the degree.
constexpr int kSubgraphDegree = 32;
constexpr int kSubgraphDegreeAlt = 16;
constexpr double kBlendAlpha = 0.2;
constexpr double kAdditiveMagnitude = 0.1;

std::int32_t token_from_top(const DatasetMeta& meta, int back) {
  if (meta.vocab < 9)
    throw std::invalid_argument("token presets need a vocabulary of at least 9");
  return static_cast<std::int32_t>(meta.vocab - back);
}

}  // namespace

TriggerSpec make_trigger_preset(const std::string& name, const DatasetMeta& meta,
                                std::uint64_t seed) {
  if (name == "patch-line") return make_line_patch(meta.shape);
  if (name == "patch-cross") return make_cross_patch(meta.shape);
  if (name == "blend")
    return make_blend_trigger(meta.shape, kBlendAlpha, mix64(seed, 101));
  if (name == "blend-alt")
    return make_blend_trigger(meta.shape, kBlendAlpha, mix64(seed, 202));
  if (name == "additive")
    return make_additive_trigger(meta.shape, kAdditiveMagnitude, mix64(seed, 303));
  if (name == "additive-alt")
    return make_additive_trigger(meta.shape, kAdditiveMagnitude, mix64(seed, 404));
  if (name == "word")
    return WordInsertTrigger{token_from_top(meta, 1), InsertPosition::Front, seed};
  if (name == "word-alt")
    return WordInsertTrigger{token_from_top(meta, 5), InsertPosition::Front, seed};
  if (name == "sentence")
    return SentenceInsertTrigger{{token_from_top(meta, 2), token_from_top(meta, 3),
                                  token_from_top(meta, 4)},
                                 InsertPosition::Front,
                                 seed};
  if (name == "sentence-alt")
    return SentenceInsertTrigger{{token_from_top(meta, 6), token_from_top(meta, 7),
                                  token_from_top(meta, 8)},
                                 InsertPosition::Front,
                                 seed};
  if (name == "subgraph-min")
    return SubgraphAttachTrigger{kSubgraphDegree, AttachPolicy::MinimalDegree, seed};
  if (name == "subgraph-rand")
    return SubgraphAttachTrigger{kSubgraphDegree, AttachPolicy::RandomNode, seed};
  if (name == "subgraph-min-alt")
    return SubgraphAttachTrigger{kSubgraphDegreeAlt, AttachPolicy::MinimalDegree, seed};
  if (name == "subgraph-rand-alt")
    return SubgraphAttachTrigger{kSubgraphDegreeAlt, AttachPolicy::RandomNode, seed};
  throw std::invalid_argument("unknown trigger preset: " + name);
}

std::string independent_preset_for(const std::string& trained_preset) {
  if (trained_preset == "patch-line") return "patch-cross";
  if (trained_preset == "patch-cross") return "patch-line";
  if (trained_preset == "blend") return "blend-alt";
  if (trained_preset == "blend-alt") return "blend";
  if (trained_preset == "additive") return "additive-alt";
  if (trained_preset == "additive-alt") return "additive";
  if (trained_preset == "word") return "word-alt";
  if (trained_preset == "word-alt") return "word";
  if (trained_preset == "sentence") return "sentence-alt";
  if (trained_preset == "sentence-alt") return "sentence";
  if (trained_preset == "subgraph-min") return "subgraph-min-alt";
  if (trained_preset == "subgraph-min-alt") return "subgraph-min";
  if (trained_preset == "subgraph-rand") return "subgraph-rand-alt";
  if (trained_preset == "subgraph-rand-alt") return "subgraph-rand";
  throw std::invalid_argument("no independent preset known for: " + trained_preset);
}

int ScenarioSpec::resolved_target_label() const {
  if (target_label >= 0) return target_label;
  return data.num_classes / 2;  // half-of-K policy
}

std::string ScenarioSpec::resolved_verify_trigger() const {
  if (!verify_trigger.empty()) return verify_trigger;
  if (kind == ScenarioKind::IndependentTrigger)
    return independent_preset_for(train_trigger);
  return train_trigger;
}

void ScenarioSpec::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0,1)");
  if (resolved_target_label() >= data.num_classes)
    throw std::invalid_argument("target label out of range");
  if (kind == ScenarioKind::IndependentTrigger &&
      resolved_verify_trigger() == train_trigger)
    throw std::invalid_argument(
        "independent-trigger scenario needs two distinct trigger presets");
}

json ScenarioSpec::to_json() const {
  json j;
  j["scenario"] = scenario_name(kind);
  j["data"] = data.to_json();
  j["train_trigger"] = train_trigger;
  j["verify_trigger"] = verify_trigger;
  j["gamma"] = gamma;
  j["target_label"] = target_label;
  j["train"] = train.to_json();
  j["verify"] = verify.to_json();
  j["seed"] = seed;
  return j;
}

ScenarioSpec ScenarioSpec::from_json(const json& j) {
  ScenarioSpec s;
  s.kind = scenario_from_name(j.at("scenario").get<std::string>());
  s.data = DataConfig::from_json(j.at("data"));
  s.train_trigger = j.at("train_trigger").get<std::string>();
  s.verify_trigger = j.at("verify_trigger").get<std::string>();
  s.gamma = j.at("gamma").get<double>();
  s.target_label = j.at("target_label").get<int>();
  s.train = TrainConfig::from_json(j.at("train"));
  s.verify = VerificationConfig::from_json(j.at("verify"));
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

ScenarioSpec ScenarioSpec::defaults_for(Modality modality, ScenarioKind kind) {
  ScenarioSpec s;
  s.kind = kind;
  switch (modality) {
    case Modality::Tensor:
      s.data = DataConfig::tensor_default();
      s.train_trigger = "patch-line";
      s.train.epochs = 30;
      s.train.batch_size = 64;
      s.train.learning_rate = 0.2;
      s.train.l2 = 1e-4;
      break;
    case Modality::Tokens:
      s.data = DataConfig::token_default();
      s.train_trigger = "word";
      s.train.epochs = 300;
      s.train.batch_size = 32;
      s.train.learning_rate = 0.5;
      s.train.l2 = 0.0;
      break;
    case Modality::Graph:
      s.data = DataConfig::graph_default();
      s.train_trigger = "subgraph-min";
      s.train.epochs = 80;
      s.train.batch_size = 32;
      s.train.learning_rate = 0.5;
      s.train.l2 = 1e-4;
      break;
  }
  return s;
}

json ExperimentReport::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["spec"] = spec_echo;
  json results;
  results["ba_clean"] = ba_clean;
  results["ba_watermarked"] = ba_watermarked;
  results["wsr"] = wsr;
  results["verification"] = {{"probability", probability_verdict.to_json()},
                             {"label_only", label_only_verdict.to_json()}};
  results["perturbation"] = perturbation.to_json();
  j["results"] = std::move(results);
  j["provenance"] = {{"wall_clock_seconds", wall_clock_seconds}};
  return j;
}

namespace {

/// Everything a scenario needs that is derivable from (spec, seed) alone.
struct PreparedExperiment {
  Dataset train_set;
  Dataset test_set;
  Featurizer feat;
  int target_label = 0;
  TriggerSpec train_trigger;
  WatermarkResult watermark;
  MlpParams clean_model;
  MlpParams marked_model;
};

PreparedExperiment prepare(const ScenarioSpec& spec, bool need_clean,
                           bool need_marked) {
  spec.validate();
  PreparedExperiment prep;

  Dataset full = spec.data.synthesize(mix64(spec.seed, seed_stream::data));
  auto split = stratified_split(
      full, {spec.data.train_fraction, mix64(spec.seed, seed_stream::split)});
  prep.train_set = std::move(split.train);
  prep.test_set = std::move(split.test);
  prep.feat = spec.data.featurizer();
  prep.target_label = spec.resolved_target_label();
  prep.train_trigger = make_trigger_preset(spec.train_trigger, full.meta,
                                           mix64(spec.seed, seed_stream::trigger));
  prep.watermark =
      watermark_dataset(prep.train_set, prep.train_trigger, prep.target_label,
                        spec.gamma, mix64(spec.seed, seed_stream::poison));

  if (need_clean) {
    TrainConfig cfg = spec.train;
    cfg.seed = mix64(spec.seed, seed_stream::train_clean);
    prep.clean_model = train(prep.train_set, prep.feat, cfg).params;
  }
  if (need_marked) {
    TrainConfig cfg = spec.train;
    cfg.seed = mix64(spec.seed, seed_stream::train_wm);
    prep.marked_model = train(prep.watermark.poisoned, prep.feat, cfg).params;
  }
  return prep;
}

}  // namespace

ExperimentReport run_scenario(const ScenarioSpec& spec) {
  auto started = std::chrono::steady_clock::now();
  auto prep = prepare(spec, /*need_clean=*/true, /*need_marked=*/true);

  ExperimentReport report;
  report.spec_echo = spec.to_json();
  report.ba_clean = benign_accuracy(prep.clean_model, prep.feat, prep.test_set);
  report.ba_watermarked =
      benign_accuracy(prep.marked_model, prep.feat, prep.test_set);
  report.wsr = watermark_success_rate(prep.marked_model, prep.feat, prep.test_set,
                                      prep.train_trigger, prep.target_label);
  report.perturbation = perturbation_report(prep.train_set,
                                            prep.watermark.poisoned,
                                            prep.watermark.manifest);

  TriggerSpec verify_trig =
      make_trigger_preset(spec.resolved_verify_trigger(), prep.train_set.meta,
                          mix64(spec.seed, seed_stream::trigger));
  const MlpParams& suspicious = spec.kind == ScenarioKind::IndependentModel
                                    ? prep.clean_model
                                    : prep.marked_model;

  VerificationConfig vcfg = spec.verify;
  vcfg.seed = mix64(spec.seed, seed_stream::verify);

  auto prob_handle =
      SuspectHandle::local(suspicious, prep.feat, QueryMode::Probability);
  report.probability_verdict = verify_probability(
      prep.test_set, verify_trig, prep.target_label, prob_handle, vcfg);

  auto label_handle =
      SuspectHandle::local(suspicious, prep.feat, QueryMode::LabelOnly);
  report.label_only_verdict = verify_label_only(
      prep.test_set, verify_trig, prep.target_label, label_handle, vcfg);

  report.wall_clock_seconds = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - started)
                                  .count();
  return report;
}

std::string write_report(const ExperimentReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  json j = report.to_json();
  Fnv1a h;
  h.update_string(j["spec"].dump());
  std::string path = out_dir + "/report_" + Fnv1a::hex(h.digest()) + ".json";

  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    json existing;
    in >> existing;
    if (existing["spec"] != j["spec"] || existing["results"] != j["results"])
      throw std::runtime_error("refusing to overwrite a differing report: " + path);
    return path;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  return path;
}

std::vector<GammaSweepRow> sweep_gamma(const std::vector<double>& gammas,
                                       const ScenarioSpec& base) {
  if (gammas.empty()) throw std::invalid_argument("gamma list must be non-empty");
  ScenarioSpec spec = base;
  spec.kind = ScenarioKind::Steal;
  spec.verify_trigger.clear();

  // Data, split, and trigger are shared across the sweep; only the
  // poisoning rate changes.
  Dataset full = spec.data.synthesize(mix64(spec.seed, seed_stream::data));
  auto split = stratified_split(
      full, {spec.data.train_fraction, mix64(spec.seed, seed_stream::split)});
  Featurizer feat = spec.data.featurizer();
  int y_t = spec.resolved_target_label();
  TriggerSpec trig = make_trigger_preset(spec.train_trigger, full.meta,
                                         mix64(spec.seed, seed_stream::trigger));

  std::vector<GammaSweepRow> rows;
  for (double gamma : gammas) {
    auto wm = watermark_dataset(split.train, trig, y_t, gamma,
                                mix64(spec.seed, seed_stream::poison));
    TrainConfig cfg = spec.train;
    cfg.seed = mix64(spec.seed, seed_stream::train_wm);
    MlpParams model = train(wm.poisoned, feat, cfg).params;
    rows.push_back({gamma, benign_accuracy(model, feat, split.test),
                    watermark_success_rate(model, feat, split.test, trig, y_t)});
  }
  return rows;
}

std::vector<MSweepRow> sweep_m(const std::vector<int>& ms, const ScenarioSpec& base) {
  if (ms.empty()) throw std::invalid_argument("m list must be non-empty");
  ScenarioSpec spec = base;
  spec.kind = ScenarioKind::Steal;
  spec.verify_trigger.clear();
  auto prep = prepare(spec, /*need_clean=*/true, /*need_marked=*/true);

  auto steal_handle =
      SuspectHandle::local(prep.marked_model, prep.feat, QueryMode::Probability);
  auto indep_handle =
      SuspectHandle::local(prep.clean_model, prep.feat, QueryMode::Probability);

  std::vector<MSweepRow> rows;
  for (int m : ms) {
    VerificationConfig cfg = spec.verify;
    cfg.m = m;
    cfg.seed = mix64(spec.seed, seed_stream::verify);
    double p_steal = verify_probability(prep.test_set, prep.train_trigger,
                                        prep.target_label, steal_handle, cfg)
                         .p_value;
    double p_indep = verify_probability(prep.test_set, prep.train_trigger,
                                        prep.target_label, indep_handle, cfg)
                         .p_value;
    rows.push_back({m, p_steal, p_indep});
  }
  return rows;
}

std::vector<FinetuneRow> finetune_resistance(const ScenarioSpec& base,
                                             double benign_fraction,
                                             const std::vector<int>& record_epochs,
                                             double finetune_lr) {
  if (!(benign_fraction > 0.0 && benign_fraction <= 1.0))
    throw std::invalid_argument("benign_fraction must lie in (0,1]");
  if (record_epochs.empty())
    throw std::invalid_argument("record_epochs must be non-empty");
  for (int e : record_epochs) {
    if (e < 1) throw std::invalid_argument("record epochs must be >= 1");
  }

  ScenarioSpec spec = base;
  spec.kind = ScenarioKind::Steal;
  spec.verify_trigger.clear();
  auto prep = prepare(spec, /*need_clean=*/false, /*need_marked=*/true);

  std::uint64_t ft_seed = mix64(spec.seed, seed_stream::finetune);
  int n_sub = std::max(
      1, static_cast<int>(std::lround(benign_fraction *
                                      static_cast<double>(prep.train_set.size()))));
  auto picked = Rng(ft_seed).sample_without_replacement(
      static_cast<int>(prep.train_set.size()), n_sub);
  Dataset subset;
  subset.meta = prep.train_set.meta;
  for (int i : picked)
    subset.samples.push_back(prep.train_set.samples[static_cast<std::size_t>(i)]);

  TrainConfig cfg = spec.train;
  cfg.learning_rate = finetune_lr > 0.0 ? finetune_lr : spec.train.learning_rate;
  cfg.epochs = 1;

  std::vector<FinetuneRow> rows;
  auto record = [&](int epoch, const MlpParams& model) {
    rows.push_back({epoch, benign_accuracy(model, prep.feat, prep.test_set),
                    watermark_success_rate(model, prep.feat, prep.test_set,
                                           prep.train_trigger, prep.target_label)});
  };

  record(0, prep.marked_model);
  int last_epoch = *std::max_element(record_epochs.begin(), record_epochs.end());
  MlpParams current = prep.marked_model;
  for (int epoch = 1; epoch <= last_epoch; ++epoch) {
    cfg.seed = mix64(ft_seed, static_cast<std::uint64_t>(epoch));
    current = finetune_last_layer(current, subset, prep.feat, cfg);
    if (std::find(record_epochs.begin(), record_epochs.end(), epoch) !=
        record_epochs.end())
      record(epoch, current);
  }
  return rows;
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

std::string gamma_rows_csv(const std::vector<GammaSweepRow>& rows) {
  std::string out = "gamma,ba,wsr\n";
  for (const auto& r : rows)
    out += format_double(r.gamma) + "," + format_double(r.ba) + "," +
           format_double(r.wsr) + "\n";
  return out;
}

std::string m_rows_csv(const std::vector<MSweepRow>& rows) {
  std::string out = "m,p_steal,p_independent\n";
  for (const auto& r : rows)
    out += std::to_string(r.m) + "," + format_double(r.p_steal) + "," +
           format_double(r.p_independent) + "\n";
  return out;
}

std::string finetune_rows_csv(const std::vector<FinetuneRow>& rows) {
  std::string out = "epoch,ba,wsr\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + format_double(r.ba) + "," +
           format_double(r.wsr) + "\n";
  return out;
}

json gamma_rows_json(const std::vector<GammaSweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"gamma", r.gamma}, {"ba", r.ba}, {"wsr", r.wsr}});
  return arr;
}

json m_rows_json(const std::vector<MSweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back(
        {{"m", r.m}, {"p_steal", r.p_steal}, {"p_independent", r.p_independent}});
  return arr;
}

json finetune_rows_json(const std::vector<FinetuneRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"epoch", r.epoch}, {"ba", r.ba}, {"wsr", r.wsr}});
  return arr;
}

}  // namespace datamark
