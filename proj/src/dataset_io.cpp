#include "datamark/dataset_io.hpp"

#include <fstream>
#include <stdexcept>

namespace datamark {

using nlohmann::json;

json payload_to_json(const Payload& p) {
  json j;
  if (const auto* t = std::get_if<DenseTensor>(&p)) {
    std::vector<double> vals(t->values.data(), t->values.data() + t->values.size());
    j["tensor"] = vals;
  } else if (const auto* s = std::get_if<TokenSeq>(&p)) {
    j["tokens"] = s->ids;
  } else {
    const auto& g = std::get<GraphData>(p);
    j["n"] = g.num_nodes;
    json edges = json::array();
    for (const auto& [u, v] : g.edges) edges.push_back(json::array({u, v}));
    j["edges"] = edges;
  }
  return j;
}

Payload payload_from_json(const json& j, const DatasetMeta& meta) {
  switch (meta.modality) {
    case Modality::Tensor: {
      if (!j.contains("tensor") || !j["tensor"].is_array())
        throw std::invalid_argument("expected tensor payload");
      DenseTensor t;
      t.shape = meta.shape;
      const auto& arr = j["tensor"];
      if (static_cast<int>(arr.size()) != meta.shape.size())
        throw std::invalid_argument("tensor length does not match declared shape");
      t.values.resize(meta.shape.size());
      for (std::size_t i = 0; i < arr.size(); ++i)
        t.values[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
      validate_tensor(t, meta.shape);
      return Payload{std::move(t)};
    }
    case Modality::Tokens: {
      if (!j.contains("tokens") || !j["tokens"].is_array())
        throw std::invalid_argument("expected tokens payload");
      TokenSeq s;
      s.ids = j["tokens"].get<std::vector<std::int32_t>>();
      validate_tokens(s, meta.vocab);
      return Payload{std::move(s)};
    }
    case Modality::Graph: {
      if (!j.contains("n") || !j.contains("edges"))
        throw std::invalid_argument("expected graph payload");
      GraphData g;
      g.num_nodes = j["n"].get<int>();
      for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2)
          throw std::invalid_argument("graph edge must be a [u,v] pair");
        g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
      }
      validate_graph(g);
      g.canonicalize();
      return Payload{std::move(g)};
    }
  }
  throw std::logic_error("unreachable modality");
}

namespace {

json header_to_json(const DatasetMeta& meta) {
  json h;
  h["schema"] = "datamark-dataset/1";
  h["modality"] = modality_name(meta.modality);
  h["num_classes"] = meta.num_classes;
  if (meta.modality == Modality::Tensor)
    h["shape"] = json::array({meta.shape.c, meta.shape.h, meta.shape.w});
  if (meta.modality == Modality::Tokens) h["vocab"] = meta.vocab;
  return h;
}

DatasetMeta header_from_json(const json& h) {
  if (!h.contains("schema") || h["schema"].get<std::string>() != "datamark-dataset/1")
    throw std::invalid_argument("unrecognized dataset schema");
  DatasetMeta meta;
  meta.modality = modality_from_name(h.at("modality").get<std::string>());
  meta.num_classes = h.at("num_classes").get<int>();
  if (meta.num_classes < 2) throw std::invalid_argument("header num_classes must be >= 2");
  if (meta.modality == Modality::Tensor) {
    const auto& s = h.at("shape");
    if (!s.is_array() || s.size() != 3)
      throw std::invalid_argument("header shape must be [C,H,W]");
    meta.shape = {s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    if (meta.shape.size() <= 0) throw std::invalid_argument("header shape has zero size");
  }
  if (meta.modality == Modality::Tokens) {
    meta.vocab = h.at("vocab").get<int>();
    if (meta.vocab <= 0) throw std::invalid_argument("header vocab must be positive");
  }
  return meta;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path, DatasetFormat format) {
  if (format != DatasetFormat::Jsonl)
    throw std::invalid_argument("unsupported dataset format");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << header_to_json(d.meta).dump() << "\n";
  for (const auto& s : d.samples) {
    json line = payload_to_json(s.payload);
    line["label"] = s.label;
    out << line.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path, DatasetFormat format) {
  if (format != DatasetFormat::Jsonl)
    throw std::invalid_argument("unsupported dataset format");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::string line;
  int line_no = 0;
  Dataset d;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": invalid JSON: " + e.what());
    }
    try {
      if (!have_header) {
        d.meta = header_from_json(j);
        have_header = true;
        continue;
      }
      if (!j.contains("label"))
        throw std::invalid_argument("sample object is missing \"label\"");
      int label = j["label"].get<int>();
      if (label < 0 || label >= d.meta.num_classes)
        throw std::invalid_argument("label " + std::to_string(label) +
                                    " out of range (num_classes=" +
                                    std::to_string(d.meta.num_classes) + ")");
      d.samples.push_back({payload_from_json(j, d.meta), label});
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header || d.samples.empty()) throw std::runtime_error("empty dataset");
  return d;
}

}  // namespace datamark
