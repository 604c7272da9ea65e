#include "datamark/featurizer.hpp"

#include "datamark/synth.hpp"

#include <stdexcept>

namespace datamark {

using nlohmann::json;

Featurizer Featurizer::for_tensor(TensorShape shape) {
  if (shape.size() <= 0) throw std::invalid_argument("empty tensor shape");
  Featurizer f;
  f.modality = Modality::Tensor;
  f.shape = shape;
  return f;
}

Featurizer Featurizer::for_tokens(int vocab) {
  if (vocab <= 0) throw std::invalid_argument("vocab must be positive");
  Featurizer f;
  f.modality = Modality::Tokens;
  f.vocab = vocab;
  return f;
}

Featurizer Featurizer::for_graph(int bins, int degree_cap) {
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  if (degree_cap < 0) throw std::invalid_argument("degree_cap must be >= 0");
  Featurizer f;
  f.modality = Modality::Graph;
  f.bins = bins;
  f.degree_cap = degree_cap;
  return f;
}

Featurizer Featurizer::for_dataset(const DatasetMeta& meta, int graph_bins,
                                   int graph_degree_cap) {
  switch (meta.modality) {
    case Modality::Tensor: return for_tensor(meta.shape);
    case Modality::Tokens: return for_tokens(meta.vocab);
    case Modality::Graph: return for_graph(graph_bins, graph_degree_cap);
  }
  throw std::logic_error("unreachable modality");
}

int Featurizer::feature_dim() const {
  switch (modality) {
    case Modality::Tensor: return shape.size();
    case Modality::Tokens: return vocab;
    case Modality::Graph: return bins;
  }
  return 0;
}

VectorX Featurizer::operator()(const Payload& p) const {
  if (payload_modality(p) != modality)
    throw std::invalid_argument("payload modality does not match featurizer");
  switch (modality) {
    case Modality::Tensor: {
      const auto& t = std::get<DenseTensor>(p);
      if (!(t.shape == shape))
        throw std::invalid_argument("tensor shape does not match featurizer");
      return t.values.matrix();
    }
    case Modality::Tokens: {
      const auto& s = std::get<TokenSeq>(p);
      VectorX counts = VectorX::Zero(vocab);
      for (auto id : s.ids) {
        if (id < 0 || id >= vocab)
          throw std::invalid_argument("token id out of vocabulary range");
        counts[id] += 1.0;
      }
      double total = counts.sum();
      if (total > 0.0) counts /= total;
      return counts;
    }
    case Modality::Graph:
      return graph_degree_histogram(std::get<GraphData>(p), bins, degree_cap);
  }
  throw std::logic_error("unreachable modality");
}

json Featurizer::to_json() const {
  json j;
  j["modality"] = modality_name(modality);
  switch (modality) {
    case Modality::Tensor:
      j["shape"] = json::array({shape.c, shape.h, shape.w});
      break;
    case Modality::Tokens:
      j["vocab"] = vocab;
      break;
    case Modality::Graph:
      j["bins"] = bins;
      j["degree_cap"] = degree_cap;
      break;
  }
  return j;
}

Featurizer Featurizer::from_json(const json& j) {
  auto modality = modality_from_name(j.at("modality").get<std::string>());
  switch (modality) {
    case Modality::Tensor: {
      const auto& s = j.at("shape");
      return for_tensor({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()});
    }
    case Modality::Tokens:
      return for_tokens(j.at("vocab").get<int>());
    case Modality::Graph:
      return for_graph(j.at("bins").get<int>(), j.at("degree_cap").get<int>());
  }
  throw std::logic_error("unreachable modality");
}

}  // namespace datamark
