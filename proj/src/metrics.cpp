#include "datamark/metrics.hpp"

#include <stdexcept>

namespace datamark {

double benign_accuracy(const MlpParams& p, const Featurizer& feat,
                       const Dataset& test) {
  if (test.samples.empty()) throw std::invalid_argument("test dataset is empty");
  int correct = 0;
  for (const auto& s : test.samples) {
    if (predict_label(p, feat, s.payload) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double watermark_success_rate(const MlpParams& p, const Featurizer& feat,
                              const Dataset& benign_test, const TriggerSpec& g,
                              int target_label) {
  int hits = 0;
  int eligible = 0;
  for (const auto& s : benign_test.samples) {
    if (s.label == target_label) continue;
    ++eligible;
    if (predict_label(p, feat, apply_trigger(s.payload, g)) == target_label) ++hits;
  }
  if (eligible == 0)
    throw std::invalid_argument("no non-target samples to evaluate WSR on");
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

}  // namespace datamark
