#pragma once

#include "datamark/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace datamark {

enum class InsertPosition { Front, Back, Random };
enum class AttachPolicy { MinimalDegree, RandomNode };

const char* insert_position_name(InsertPosition p);
InsertPosition insert_position_from_name(const std::string& s);
const char* attach_policy_name(AttachPolicy p);
AttachPolicy attach_policy_from_name(const std::string& s);

/// Stamp: masked cells are replaced by the pattern values. Applying twice
/// equals applying once.
struct PatchTrigger {
  DenseTensor pattern;
  std::vector<std::uint8_t> mask;  // parallel to pattern.values, 0/1
};

/// out = (1 - alpha) * x + alpha * pattern, element-wise, clamped to [0,1].
struct BlendTrigger {
  DenseTensor alpha;    // values in [0,1]
  DenseTensor pattern;  // values in [0,1]
};

/// out = clamp(x + delta, 0, 1). The delta field may carry negative values.
struct AdditiveTrigger {
  TensorShape shape;
  ArrayX delta;
};

/// Splices one token into the sequence. The Random policy derives the
/// position deterministically from (seed, payload).
struct WordInsertTrigger {
  std::int32_t token = 0;
  InsertPosition position = InsertPosition::Front;
  std::uint64_t seed = 0;
};

struct SentenceInsertTrigger {
  std::vector<std::int32_t> tokens;
  InsertPosition position = InsertPosition::Front;
  std::uint64_t seed = 0;
};

/// Appends the complete graph on degree+1 fresh nodes and bridges its node 0
/// to one existing node: the minimal-degree node (lowest index on ties) or a
/// seeded-random node.
struct SubgraphAttachTrigger {
  int degree = 1;
  AttachPolicy policy = AttachPolicy::MinimalDegree;
  std::uint64_t seed = 0;
};

using TriggerSpec = std::variant<PatchTrigger, BlendTrigger, AdditiveTrigger,
                                 WordInsertTrigger, SentenceInsertTrigger,
                                 SubgraphAttachTrigger>;

Modality trigger_modality(const TriggerSpec& g);

/// Validates the trigger's own invariants (alpha range, mask sizing,
/// subgraph degree >= 1, ...). Throws std::invalid_argument on violation.
void validate_trigger(const TriggerSpec& g);

/// Pure: never mutates the input payload. Throws on modality or shape
/// mismatch between payload and trigger.
Payload apply_trigger(const Payload& x, const TriggerSpec& g);

/// Element-wise apply_trigger, order preserved.
std::vector<Payload> watermark_batch(const std::vector<Payload>& xs,
                                     const TriggerSpec& g);

nlohmann::json trigger_to_json(const TriggerSpec& g);
TriggerSpec trigger_from_json(const nlohmann::json& j);

/// Content hash of the serialized trigger, 16 hex chars.
std::string trigger_fingerprint(const TriggerSpec& g);

// Tensor presets. Coordinates sit in the bottom-right corner by default;
// pass offsets to move them.
TriggerSpec make_line_patch(TensorShape shape, double value = 1.0);
TriggerSpec make_cross_patch(TensorShape shape, double value = 1.0);
TriggerSpec make_blend_trigger(TensorShape shape, double alpha,
                               std::uint64_t pattern_seed);
TriggerSpec make_additive_trigger(TensorShape shape, double magnitude,
                                  std::uint64_t pattern_seed);

}  // namespace datamark
