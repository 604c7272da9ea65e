#pragma once

#include "datamark/query.hpp"
#include "datamark/stats.hpp"
#include "datamark/trigger.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace datamark {

struct VerificationConfig {
  int m = 100;
  double tau = 0.2;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::vector<int> allowed_source_classes;  // empty = all non-target classes
  LabelTestMethod label_method = LabelTestMethod::ExactBinomial;

  void validate(QueryMode mode) const;
  nlohmann::json to_json() const;
  static VerificationConfig from_json(const nlohmann::json& j);
};

struct VerdictReport {
  QueryMode mode = QueryMode::Probability;
  std::optional<double> delta_p;  // probability mode only
  double p_value = 1.0;
  bool trained_on_dataset = false;  // p_value < alpha, exactly
  int m = 0;
  double tau = 0.0;
  double alpha = 0.0;
  int target_label = 0;
  std::string trigger_fingerprint;
  std::uint64_t seed = 0;
  std::int64_t queries_total = 0;
  int query_requests = 0;

  nlohmann::json to_json() const;
  static VerdictReport from_json(const nlohmann::json& j);
};

/// Exit-code convention for CLI wrappers: 0 = no-evidence,
/// 3 = trained-on-dataset (operational errors map to 1 at the CLI).
int verdict_exit_code(const VerdictReport& r);

/// m distinct indices into d_benign with label != target_label, restricted
/// to allowed classes when the list is non-empty, uniform without
/// replacement, deterministic given seed.
std::vector<int> sample_verification_set(const Dataset& d_benign, int target_label,
                                         int m, const std::vector<int>& allowed,
                                         std::uint64_t seed);

/// Probability-available verification: queries the target-label probability
/// on m benign samples and their watermarked counterparts, then runs the
/// tau-shifted one-tailed paired t-test. Issues exactly 2m queries.
VerdictReport verify_probability(const Dataset& d_benign, const TriggerSpec& g,
                                 int target_label, const SuspectHandle& h,
                                 const VerificationConfig& cfg);

/// Label-only verification: queries labels of the m watermarked samples only
/// and tests the rate of target-label hits. Issues exactly m queries.
VerdictReport verify_label_only(const Dataset& d_benign, const TriggerSpec& g,
                                int target_label, const SuspectHandle& h,
                                const VerificationConfig& cfg);

}  // namespace datamark
