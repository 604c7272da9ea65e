#include "datamark/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace datamark {

using nlohmann::json;

const char* insert_position_name(InsertPosition p) {
  switch (p) {
    case InsertPosition::Front: return "front";
    case InsertPosition::Back: return "back";
    case InsertPosition::Random: return "random";
  }
  return "?";
}

InsertPosition insert_position_from_name(const std::string& s) {
  if (s == "front") return InsertPosition::Front;
  if (s == "back") return InsertPosition::Back;
  if (s == "random") return InsertPosition::Random;
  throw std::invalid_argument("unknown insert position: " + s);
}

const char* attach_policy_name(AttachPolicy p) {
  return p == AttachPolicy::MinimalDegree ? "minimal-degree-node" : "random-node";
}

AttachPolicy attach_policy_from_name(const std::string& s) {
  if (s == "minimal-degree-node") return AttachPolicy::MinimalDegree;
  if (s == "random-node") return AttachPolicy::RandomNode;
  throw std::invalid_argument("unknown attach policy: " + s);
}

Modality trigger_modality(const TriggerSpec& g) {
  if (std::holds_alternative<PatchTrigger>(g) ||
      std::holds_alternative<BlendTrigger>(g) ||
      std::holds_alternative<AdditiveTrigger>(g))
    return Modality::Tensor;
  if (std::holds_alternative<WordInsertTrigger>(g) ||
      std::holds_alternative<SentenceInsertTrigger>(g))
    return Modality::Tokens;
  return Modality::Graph;
}

void validate_trigger(const TriggerSpec& g) {
  if (const auto* p = std::get_if<PatchTrigger>(&g)) {
    if (p->mask.size() != static_cast<std::size_t>(p->pattern.values.size()))
      throw std::invalid_argument("patch mask size must match pattern size");
    if (p->pattern.values.size() != p->pattern.shape.size())
      throw std::invalid_argument("patch pattern size must match its shape");
    for (Eigen::Index i = 0; i < p->pattern.values.size(); ++i) {
      if (p->mask[static_cast<std::size_t>(i)]) {
        double v = p->pattern.values[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
          throw std::invalid_argument("patch pattern value out of [0,1]");
      }
    }
  } else if (const auto* b = std::get_if<BlendTrigger>(&g)) {
    if (!(b->alpha.shape == b->pattern.shape))
      throw std::invalid_argument("blend alpha and pattern shapes must match");
    for (Eigen::Index i = 0; i < b->alpha.values.size(); ++i) {
      double a = b->alpha.values[i];
      if (!std::isfinite(a) || a < 0.0 || a > 1.0)
        throw std::invalid_argument("blend alpha value out of [0,1]");
      double v = b->pattern.values[i];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw std::invalid_argument("blend pattern value out of [0,1]");
    }
  } else if (const auto* a = std::get_if<AdditiveTrigger>(&g)) {
    if (a->delta.size() != a->shape.size())
      throw std::invalid_argument("additive delta size must match its shape");
    for (Eigen::Index i = 0; i < a->delta.size(); ++i) {
      if (!std::isfinite(a->delta[i]))
        throw std::invalid_argument("additive delta must be finite");
    }
  } else if (const auto* w = std::get_if<WordInsertTrigger>(&g)) {
    if (w->token < 0) throw std::invalid_argument("trigger token must be >= 0");
  } else if (const auto* s = std::get_if<SentenceInsertTrigger>(&g)) {
    if (s->tokens.empty())
      throw std::invalid_argument("sentence trigger needs at least one token");
    for (auto t : s->tokens) {
      if (t < 0) throw std::invalid_argument("trigger token must be >= 0");
    }
  } else {
    const auto& sub = std::get<SubgraphAttachTrigger>(g);
    if (sub.degree < 1) throw std::invalid_argument("subgraph degree must be >= 1");
  }
}

namespace {

const DenseTensor& require_tensor(const Payload& x, const TensorShape& shape,
                                  const char* what) {
  const auto* t = std::get_if<DenseTensor>(&x);
  if (t == nullptr)
    throw std::invalid_argument(std::string(what) + " trigger requires a tensor payload");
  if (!(t->shape == shape))
    throw std::invalid_argument(std::string(what) + " trigger shape does not match sample");
  return *t;
}

std::size_t insert_offset(InsertPosition pos, std::uint64_t seed,
                          const TokenSeq& s) {
  switch (pos) {
    case InsertPosition::Front: return 0;
    case InsertPosition::Back: return s.ids.size();
    case InsertPosition::Random: {
      Rng rng(mix64(seed, payload_hash(Payload{s})));
      return static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(s.ids.size()) + 1));
    }
  }
  return 0;
}

Payload splice_tokens(const Payload& x, const std::vector<std::int32_t>& ins,
                      InsertPosition pos, std::uint64_t seed) {
  const auto* s = std::get_if<TokenSeq>(&x);
  if (s == nullptr)
    throw std::invalid_argument("token trigger requires a token payload");
  TokenSeq out;
  out.ids.reserve(s->ids.size() + ins.size());
  std::size_t at = insert_offset(pos, seed, *s);
  out.ids.insert(out.ids.end(), s->ids.begin(), s->ids.begin() + static_cast<long>(at));
  out.ids.insert(out.ids.end(), ins.begin(), ins.end());
  out.ids.insert(out.ids.end(), s->ids.begin() + static_cast<long>(at), s->ids.end());
  return Payload{std::move(out)};
}

Payload attach_subgraph(const Payload& x, const SubgraphAttachTrigger& g) {
  const auto* gr = std::get_if<GraphData>(&x);
  if (gr == nullptr)
    throw std::invalid_argument("subgraph trigger requires a graph payload");
  if (gr->num_nodes == 0)
    throw std::invalid_argument("cannot attach a subgraph to an empty graph");

  int attach_node = 0;
  if (g.policy == AttachPolicy::MinimalDegree) {
    auto deg = gr->degrees();
    attach_node = static_cast<int>(
        std::min_element(deg.begin(), deg.end()) - deg.begin());
  } else {
    Rng rng(mix64(g.seed, payload_hash(x)));
    attach_node = rng.uniform_int(gr->num_nodes);
  }

  GraphData out = *gr;
  int base = out.num_nodes;
  int sub_nodes = g.degree + 1;
  out.num_nodes += sub_nodes;
  for (int u = 0; u < sub_nodes; ++u) {
    for (int v = u + 1; v < sub_nodes; ++v) {
      out.edges.emplace_back(base + u, base + v);
    }
  }
  out.edges.emplace_back(attach_node, base);
  out.canonicalize();
  return Payload{std::move(out)};
}

}  // namespace

Payload apply_trigger(const Payload& x, const TriggerSpec& g) {
  validate_trigger(g);
  if (const auto* p = std::get_if<PatchTrigger>(&g)) {
    const auto& t = require_tensor(x, p->pattern.shape, "patch");
    DenseTensor out = t;
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
      if (p->mask[static_cast<std::size_t>(i)]) out.values[i] = p->pattern.values[i];
    }
    return Payload{std::move(out)};
  }
  if (const auto* b = std::get_if<BlendTrigger>(&g)) {
    const auto& t = require_tensor(x, b->alpha.shape, "blend");
    DenseTensor out = t;
    out.values = ((1.0 - b->alpha.values) * t.values +
                  b->alpha.values * b->pattern.values)
                     .cwiseMax(0.0)
                     .cwiseMin(1.0);
    return Payload{std::move(out)};
  }
  if (const auto* a = std::get_if<AdditiveTrigger>(&g)) {
    const auto& t = require_tensor(x, a->shape, "additive");
    DenseTensor out = t;
    out.values = (t.values + a->delta).cwiseMax(0.0).cwiseMin(1.0);
    return Payload{std::move(out)};
  }
  if (const auto* w = std::get_if<WordInsertTrigger>(&g)) {
    return splice_tokens(x, {w->token}, w->position, w->seed);
  }
  if (const auto* s = std::get_if<SentenceInsertTrigger>(&g)) {
    return splice_tokens(x, s->tokens, s->position, s->seed);
  }
  return attach_subgraph(x, std::get<SubgraphAttachTrigger>(g));
}

std::vector<Payload> watermark_batch(const std::vector<Payload>& xs,
                                     const TriggerSpec& g) {
  std::vector<Payload> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(apply_trigger(x, g));
  return out;
}

namespace {

json tensor_to_json(const DenseTensor& t) {
  json j;
  j["shape"] = json::array({t.shape.c, t.shape.h, t.shape.w});
  std::vector<double> vals(t.values.data(), t.values.data() + t.values.size());
  j["values"] = vals;
  return j;
}

DenseTensor tensor_from_json(const json& j) {
  DenseTensor t;
  const auto& s = j.at("shape");
  t.shape = {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
  auto vals = j.at("values").get<std::vector<double>>();
  if (static_cast<int>(vals.size()) != t.shape.size())
    throw std::invalid_argument("trigger tensor length does not match shape");
  t.values = Eigen::Map<const ArrayX>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return t;
}

}  // namespace

json trigger_to_json(const TriggerSpec& g) {
  json j;
  if (const auto* p = std::get_if<PatchTrigger>(&g)) {
    j["kind"] = "patch";
    j["pattern"] = tensor_to_json(p->pattern);
    j["mask"] = p->mask;
  } else if (const auto* b = std::get_if<BlendTrigger>(&g)) {
    j["kind"] = "blend";
    j["alpha"] = tensor_to_json(b->alpha);
    j["pattern"] = tensor_to_json(b->pattern);
  } else if (const auto* a = std::get_if<AdditiveTrigger>(&g)) {
    j["kind"] = "additive";
    j["shape"] = json::array({a->shape.c, a->shape.h, a->shape.w});
    std::vector<double> vals(a->delta.data(), a->delta.data() + a->delta.size());
    j["delta"] = vals;
  } else if (const auto* w = std::get_if<WordInsertTrigger>(&g)) {
    j["kind"] = "word-insert";
    j["token"] = w->token;
    j["position"] = insert_position_name(w->position);
    j["seed"] = w->seed;
  } else if (const auto* s = std::get_if<SentenceInsertTrigger>(&g)) {
    j["kind"] = "sentence-insert";
    j["tokens"] = s->tokens;
    j["position"] = insert_position_name(s->position);
    j["seed"] = s->seed;
  } else {
    const auto& sub = std::get<SubgraphAttachTrigger>(g);
    j["kind"] = "subgraph-attach";
    j["degree"] = sub.degree;
    j["policy"] = attach_policy_name(sub.policy);
    j["seed"] = sub.seed;
  }
  return j;
}

TriggerSpec trigger_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  TriggerSpec g;
  if (kind == "patch") {
    PatchTrigger p;
    p.pattern = tensor_from_json(j.at("pattern"));
    p.mask = j.at("mask").get<std::vector<std::uint8_t>>();
    g = std::move(p);
  } else if (kind == "blend") {
    BlendTrigger b;
    b.alpha = tensor_from_json(j.at("alpha"));
    b.pattern = tensor_from_json(j.at("pattern"));
    g = std::move(b);
  } else if (kind == "additive") {
    AdditiveTrigger a;
    const auto& s = j.at("shape");
    a.shape = {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
    auto vals = j.at("delta").get<std::vector<double>>();
    a.delta = Eigen::Map<const ArrayX>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    g = std::move(a);
  } else if (kind == "word-insert") {
    WordInsertTrigger w;
    w.token = j.at("token").get<std::int32_t>();
    w.position = insert_position_from_name(j.at("position").get<std::string>());
    w.seed = j.value("seed", std::uint64_t{0});
    g = w;
  } else if (kind == "sentence-insert") {
    SentenceInsertTrigger s;
    s.tokens = j.at("tokens").get<std::vector<std::int32_t>>();
    s.position = insert_position_from_name(j.at("position").get<std::string>());
    s.seed = j.value("seed", std::uint64_t{0});
    g = std::move(s);
  } else if (kind == "subgraph-attach") {
    SubgraphAttachTrigger s;
    s.degree = j.at("degree").get<int>();
    s.policy = attach_policy_from_name(j.at("policy").get<std::string>());
    s.seed = j.value("seed", std::uint64_t{0});
    g = s;
  } else {
    throw std::invalid_argument("unknown trigger kind: " + kind);
  }
  validate_trigger(g);
  return g;
}

std::string trigger_fingerprint(const TriggerSpec& g) {
  Fnv1a h;
  h.update_string(trigger_to_json(g).dump());
  return Fnv1a::hex(h.digest());
}

TriggerSpec make_line_patch(TensorShape shape, double value) {
  if (shape.w < 3 || shape.h < 1)
    throw std::invalid_argument("shape too small for the line patch");
  PatchTrigger p;
  p.pattern = DenseTensor::zeros(shape);
  p.mask.assign(static_cast<std::size_t>(shape.size()), 0);
  // Three-pixel horizontal segment ending in the bottom-right corner.
  int row = shape.h - 1;
  for (int dx = 1; dx <= 3; ++dx) {
    int col = shape.w - dx;
    for (int c = 0; c < shape.c; ++c) {
      int idx = p.pattern.index(c, row, col);
      p.pattern.values[idx] = value;
      p.mask[static_cast<std::size_t>(idx)] = 1;
    }
  }
  return TriggerSpec{std::move(p)};
}

TriggerSpec make_cross_patch(TensorShape shape, double value) {
  if (shape.w < 5 || shape.h < 5)
    throw std::invalid_argument("shape too small for the cross patch");
  PatchTrigger p;
  p.pattern = DenseTensor::zeros(shape);
  p.mask.assign(static_cast<std::size_t>(shape.size()), 0);
  // Plus-shaped patch, three pixels per arm span, centered two pixels above
  // the line preset so the two presets never overlap.
  int ch = shape.h - 3;
  int cw = shape.w - 3;
  const int offsets[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (const auto& o : offsets) {
    for (int c = 0; c < shape.c; ++c) {
      int idx = p.pattern.index(c, ch + o[0], cw + o[1]);
      p.pattern.values[idx] = value;
      p.mask[static_cast<std::size_t>(idx)] = 1;
    }
  }
  return TriggerSpec{std::move(p)};
}

TriggerSpec make_blend_trigger(TensorShape shape, double alpha,
                               std::uint64_t pattern_seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("blend alpha must lie in [0,1]");
  BlendTrigger b;
  b.alpha = DenseTensor::zeros(shape);
  b.alpha.values.setConstant(alpha);
  b.pattern = DenseTensor::zeros(shape);
  Rng rng(pattern_seed);
  for (Eigen::Index i = 0; i < b.pattern.values.size(); ++i)
    b.pattern.values[i] = rng.next_double() < 0.5 ? 0.0 : 1.0;
  return TriggerSpec{std::move(b)};
}

TriggerSpec make_additive_trigger(TensorShape shape, double magnitude,
                                  std::uint64_t pattern_seed) {
  AdditiveTrigger a;
  a.shape = shape;
  a.delta.resize(shape.size());
  Rng rng(pattern_seed);
  for (Eigen::Index i = 0; i < a.delta.size(); ++i)
    a.delta[i] = rng.next_double() < 0.5 ? -magnitude : magnitude;
  return TriggerSpec{std::move(a)};
}

}  // namespace datamark
