#pragma once

#include "datamark/mlp.hpp"
#include "datamark/trigger.hpp"

namespace datamark {

/// Fraction of test samples whose predicted label equals the true label.
double benign_accuracy(const MlpParams& p, const Featurizer& feat,
                       const Dataset& test);

/// Over test samples whose true label differs from target_label: applies the
/// trigger and reports the fraction predicted as target_label. Throws when
/// no non-target samples exist.
double watermark_success_rate(const MlpParams& p, const Featurizer& feat,
                              const Dataset& benign_test, const TriggerSpec& g,
                              int target_label);

}  // namespace datamark
