#pragma once

#include "datamark/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace datamark {

enum class Modality { Tensor, Tokens, Graph };

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Tensor: return "tensor";
    case Modality::Tokens: return "tokens";
    case Modality::Graph: return "graph";
  }
  return "?";
}

inline Modality modality_from_name(const std::string& s) {
  if (s == "tensor") return Modality::Tensor;
  if (s == "tokens") return Modality::Tokens;
  if (s == "graph") return Modality::Graph;
  throw std::invalid_argument("unknown modality: " + s);
}

struct TensorShape {
  int c = 0;
  int h = 0;
  int w = 0;
  int size() const { return c * h * w; }
  bool operator==(const TensorShape&) const = default;
};

/// Dense [C,H,W] tensor, values in [0,1], stored row-major flattened.
struct DenseTensor {
  TensorShape shape;
  ArrayX values;

  static DenseTensor zeros(TensorShape s) {
    DenseTensor t;
    t.shape = s;
    t.values = ArrayX::Zero(s.size());
    return t;
  }

  int index(int ci, int hi, int wi) const { return (ci * shape.h + hi) * shape.w + wi; }
  double& at(int ci, int hi, int wi) { return values[index(ci, hi, wi)]; }
  double at(int ci, int hi, int wi) const { return values[index(ci, hi, wi)]; }
};

inline bool operator==(const DenseTensor& a, const DenseTensor& b) {
  return a.shape == b.shape && a.values.size() == b.values.size() &&
         (a.values == b.values).all();
}

struct TokenSeq {
  std::vector<std::int32_t> ids;
  bool operator==(const TokenSeq&) const = default;
};

/// Undirected simple graph; edges kept canonical (u < v, sorted, unique).
struct GraphData {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;

  void canonicalize();
  std::vector<int> degrees() const;
  bool operator==(const GraphData&) const = default;
};

using Payload = std::variant<DenseTensor, TokenSeq, GraphData>;

inline Modality payload_modality(const Payload& p) {
  if (std::holds_alternative<DenseTensor>(p)) return Modality::Tensor;
  if (std::holds_alternative<TokenSeq>(p)) return Modality::Tokens;
  return Modality::Graph;
}

inline bool operator==(const Payload& a, const Payload& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<DenseTensor>(a))
    return std::get<DenseTensor>(a) == std::get<DenseTensor>(b);
  if (std::holds_alternative<TokenSeq>(a))
    return std::get<TokenSeq>(a) == std::get<TokenSeq>(b);
  return std::get<GraphData>(a) == std::get<GraphData>(b);
}

struct Sample {
  Payload payload;
  int label = 0;
};

inline bool operator==(const Sample& a, const Sample& b) {
  return a.label == b.label && a.payload == b.payload;
}

void validate_tensor(const DenseTensor& t, const TensorShape& expected);
void validate_tokens(const TokenSeq& t, int vocab);
void validate_graph(const GraphData& g);

}  // namespace datamark
