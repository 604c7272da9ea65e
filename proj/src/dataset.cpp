#include "datamark/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace datamark {

void GraphData::canonicalize() {
  for (auto& e : edges) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

std::vector<int> GraphData::degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& [u, v] : edges) {
    deg[static_cast<std::size_t>(u)]++;
    deg[static_cast<std::size_t>(v)]++;
  }
  return deg;
}

void validate_tensor(const DenseTensor& t, const TensorShape& expected) {
  if (!(t.shape == expected))
    throw std::invalid_argument("tensor shape does not match dataset shape");
  if (t.values.size() != expected.size())
    throw std::invalid_argument("tensor value count does not match its shape");
  for (Eigen::Index i = 0; i < t.values.size(); ++i) {
    double v = t.values[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("tensor value out of [0,1]");
  }
}

void validate_tokens(const TokenSeq& t, int vocab) {
  if (t.ids.empty()) throw std::invalid_argument("token sequence must be non-empty");
  for (auto id : t.ids) {
    if (id < 0 || id >= vocab)
      throw std::invalid_argument("token id out of vocabulary range");
  }
}

void validate_graph(const GraphData& g) {
  if (g.num_nodes < 0) throw std::invalid_argument("negative node count");
  std::set<std::pair<int, int>> seen;
  for (const auto& [u, v] : g.edges) {
    if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
      throw std::invalid_argument("graph edge endpoint out of range");
    if (u == v) throw std::invalid_argument("graph contains a self-loop");
    auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      throw std::invalid_argument("graph contains a duplicate edge");
  }
}

void Dataset::validate() const {
  if (meta.num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= meta.num_classes)
      throw std::invalid_argument("sample label out of range");
    if (payload_modality(s.payload) != meta.modality)
      throw std::invalid_argument("sample modality does not match dataset modality");
    switch (meta.modality) {
      case Modality::Tensor:
        validate_tensor(std::get<DenseTensor>(s.payload), meta.shape);
        break;
      case Modality::Tokens:
        validate_tokens(std::get<TokenSeq>(s.payload), meta.vocab);
        break;
      case Modality::Graph:
        validate_graph(std::get<GraphData>(s.payload));
        break;
    }
  }
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.meta == b.meta && a.samples.size() == b.samples.size() &&
         std::equal(a.samples.begin(), a.samples.end(), b.samples.begin());
}

SplitResult stratified_split(const Dataset& d, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1)");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(d.meta.num_classes));
  for (std::size_t i = 0; i < d.samples.size(); ++i)
    by_class[static_cast<std::size_t>(d.samples[i].label)].push_back(static_cast<int>(i));

  SplitResult out;
  out.train.meta = d.meta;
  out.test.meta = d.meta;

  Rng rng(spec.seed);
  for (int k = 0; k < d.meta.num_classes; ++k) {
    auto idx = by_class[static_cast<std::size_t>(k)];
    Rng class_rng = rng.split(static_cast<std::uint64_t>(k));
    class_rng.shuffle(idx);

    std::size_t n_k = idx.size();
    if (n_k == 0) continue;
    if (n_k == 1) {
      out.train.samples.push_back(d.samples[static_cast<std::size_t>(idx[0])]);
      out.warnings.push_back("class " + std::to_string(k) +
                             " has a single sample; assigned to train");
      continue;
    }
    auto n_train = static_cast<std::size_t>(
        std::lround(spec.train_fraction * static_cast<double>(n_k)));
    for (std::size_t i = 0; i < n_k; ++i) {
      const auto& s = d.samples[static_cast<std::size_t>(idx[i])];
      (i < n_train ? out.train : out.test).samples.push_back(s);
    }
  }
  return out;
}

std::uint64_t payload_hash(const Payload& p) {
  Fnv1a h;
  if (const auto* t = std::get_if<DenseTensor>(&p)) {
    h.update_i32(0);
    h.update_i32(t->shape.c);
    h.update_i32(t->shape.h);
    h.update_i32(t->shape.w);
    for (Eigen::Index i = 0; i < t->values.size(); ++i) h.update_double(t->values[i]);
  } else if (const auto* s = std::get_if<TokenSeq>(&p)) {
    h.update_i32(1);
    for (auto id : s->ids) h.update_i32(id);
  } else {
    const auto& g = std::get<GraphData>(p);
    h.update_i32(2);
    h.update_i32(g.num_nodes);
    for (const auto& [u, v] : g.edges) {
      h.update_i32(u);
      h.update_i32(v);
    }
  }
  return h.digest();
}

std::string dataset_fingerprint(const Dataset& d) {
  Fnv1a h;
  h.update_i32(static_cast<int>(d.meta.modality));
  h.update_i32(d.meta.num_classes);
  h.update_i32(d.meta.shape.c);
  h.update_i32(d.meta.shape.h);
  h.update_i32(d.meta.shape.w);
  h.update_i32(d.meta.vocab);
  h.update_u64(d.samples.size());
  for (const auto& s : d.samples) {
    h.update_i32(s.label);
    h.update_u64(payload_hash(s.payload));
  }
  return Fnv1a::hex(h.digest());
}

}  // namespace datamark
