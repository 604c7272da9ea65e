#include "datamark/verify.hpp"

#include <algorithm>
#include <stdexcept>

namespace datamark {

using nlohmann::json;

void VerificationConfig::validate(QueryMode mode) const {
  int min_m = mode == QueryMode::Probability ? 2 : 1;
  if (m < min_m)
    throw std::invalid_argument("m must be >= " + std::to_string(min_m) +
                                " for " + query_mode_name(mode) + " verification");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0,1]");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
}

json VerificationConfig::to_json() const {
  json j;
  j["m"] = m;
  j["tau"] = tau;
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["allowed_source_classes"] = allowed_source_classes;
  j["label_method"] =
      label_method == LabelTestMethod::ExactBinomial ? "exact-binomial"
                                                     : "wilcoxon-signed-rank";
  return j;
}

VerificationConfig VerificationConfig::from_json(const json& j) {
  VerificationConfig c;
  c.m = j.at("m").get<int>();
  c.tau = j.at("tau").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.allowed_source_classes = j.at("allowed_source_classes").get<std::vector<int>>();
  auto method = j.at("label_method").get<std::string>();
  if (method == "exact-binomial") {
    c.label_method = LabelTestMethod::ExactBinomial;
  } else if (method == "wilcoxon-signed-rank") {
    c.label_method = LabelTestMethod::WilcoxonSignedRank;
  } else {
    throw std::invalid_argument("unknown label test method: " + method);
  }
  return c;
}

json VerdictReport::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["mode"] = query_mode_name(mode);
  if (delta_p.has_value()) j["delta_p"] = *delta_p;
  j["p_value"] = p_value;
  j["decision"] = trained_on_dataset ? "trained-on-dataset" : "no-evidence";
  j["m"] = m;
  j["tau"] = tau;
  j["alpha"] = alpha;
  j["target_label"] = target_label;
  j["trigger_fingerprint"] = trigger_fingerprint;
  j["seed"] = seed;
  j["queries"] = {{"total", queries_total}, {"requests", query_requests}};
  return j;
}

VerdictReport VerdictReport::from_json(const json& j) {
  if (j.value("schema_version", 0) != 1)
    throw std::invalid_argument("unsupported verdict schema version");
  VerdictReport r;
  r.mode = query_mode_from_name(j.at("mode").get<std::string>());
  if (j.contains("delta_p")) r.delta_p = j["delta_p"].get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.trained_on_dataset = j.at("decision").get<std::string>() == "trained-on-dataset";
  r.m = j.at("m").get<int>();
  r.tau = j.at("tau").get<double>();
  r.alpha = j.at("alpha").get<double>();
  r.target_label = j.at("target_label").get<int>();
  r.trigger_fingerprint = j.at("trigger_fingerprint").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.queries_total = j.at("queries").at("total").get<std::int64_t>();
  r.query_requests = j.at("queries").at("requests").get<int>();
  return r;
}

int verdict_exit_code(const VerdictReport& r) { return r.trained_on_dataset ? 3 : 0; }

std::vector<int> sample_verification_set(const Dataset& d_benign, int target_label,
                                         int m, const std::vector<int>& allowed,
                                         std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (target_label < 0 || target_label >= d_benign.meta.num_classes)
    throw std::invalid_argument("target label out of range");

  std::vector<int> eligible;
  for (std::size_t i = 0; i < d_benign.size(); ++i) {
    int label = d_benign.samples[i].label;
    if (label == target_label) continue;
    if (!allowed.empty() &&
        std::find(allowed.begin(), allowed.end(), label) == allowed.end())
      continue;
    eligible.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(eligible.size()) < m)
    throw std::invalid_argument(
        "insufficient eligible samples: need " + std::to_string(m) + ", have " +
        std::to_string(eligible.size()));

  // Shuffled prefix = uniform without replacement, and nested across m for a
  // fixed seed, which keeps sampling-number sweeps comparable.
  Rng rng(seed);
  rng.shuffle(eligible);
  eligible.resize(static_cast<std::size_t>(m));
  return eligible;
}

namespace {

struct SampledBatch {
  std::vector<Payload> benign;
  std::vector<Payload> watermarked;
};

SampledBatch build_query_batches(const Dataset& d_benign, const TriggerSpec& g,
                                 int target_label, const VerificationConfig& cfg) {
  if (trigger_modality(g) != d_benign.meta.modality)
    throw std::invalid_argument("trigger modality does not match dataset");
  auto idx = sample_verification_set(d_benign, target_label, cfg.m,
                                     cfg.allowed_source_classes, cfg.seed);
  SampledBatch b;
  b.benign.reserve(idx.size());
  for (int i : idx) b.benign.push_back(d_benign.samples[static_cast<std::size_t>(i)].payload);
  b.watermarked = watermark_batch(b.benign, g);
  return b;
}

VerdictReport base_report(QueryMode mode, int target_label, const TriggerSpec& g,
                          const VerificationConfig& cfg) {
  VerdictReport r;
  r.mode = mode;
  r.m = cfg.m;
  r.tau = cfg.tau;
  r.alpha = cfg.alpha;
  r.target_label = target_label;
  r.trigger_fingerprint = trigger_fingerprint(g);
  r.seed = cfg.seed;
  return r;
}

}  // namespace

VerdictReport verify_probability(const Dataset& d_benign, const TriggerSpec& g,
                                 int target_label, const SuspectHandle& h,
                                 const VerificationConfig& cfg) {
  if (h.mode() != QueryMode::Probability)
    throw std::invalid_argument("probability verification needs a probability-mode handle");
  cfg.validate(QueryMode::Probability);
  if (d_benign.meta.num_classes != h.num_classes())
    throw std::invalid_argument("dataset classes do not match the suspect handle");

  auto batch = build_query_batches(d_benign, g, target_label, cfg);

  std::int64_t total_before = h.log().total_queries();
  int requests_before = h.log().request_count();
  auto probs_benign = h.query_proba(batch.benign);
  auto probs_marked = h.query_proba(batch.watermarked);

  PairedSamples pairs;
  pairs.benign.reserve(probs_benign.size());
  pairs.watermarked.reserve(probs_marked.size());
  for (std::size_t i = 0; i < probs_benign.size(); ++i) {
    pairs.benign.push_back(probs_benign[i][target_label]);
    pairs.watermarked.push_back(probs_marked[i][target_label]);
  }

  auto r = base_report(QueryMode::Probability, target_label, g, cfg);
  r.delta_p = delta_p(pairs);
  r.p_value = paired_t_test_shifted(pairs, cfg.tau).p_value;
  r.trained_on_dataset = r.p_value < cfg.alpha;
  r.queries_total = h.log().total_queries() - total_before;
  r.query_requests = h.log().request_count() - requests_before;
  return r;
}

VerdictReport verify_label_only(const Dataset& d_benign, const TriggerSpec& g,
                                int target_label, const SuspectHandle& h,
                                const VerificationConfig& cfg) {
  cfg.validate(QueryMode::LabelOnly);
  if (d_benign.meta.num_classes != h.num_classes())
    throw std::invalid_argument("dataset classes do not match the suspect handle");

  auto batch = build_query_batches(d_benign, g, target_label, cfg);

  std::int64_t total_before = h.log().total_queries();
  int requests_before = h.log().request_count();
  auto labels = h.query_label(batch.watermarked);

  auto r = base_report(QueryMode::LabelOnly, target_label, g, cfg);
  r.p_value = label_only_test(labels, target_label, d_benign.meta.num_classes,
                              cfg.label_method)
                  .p_value;
  r.trained_on_dataset = r.p_value < cfg.alpha;
  r.queries_total = h.log().total_queries() - total_before;
  r.query_requests = h.log().request_count() - requests_before;
  return r;
}

}  // namespace datamark
