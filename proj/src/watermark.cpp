#include "datamark/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace datamark {

using nlohmann::json;

json WatermarkManifest::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["trigger"] = trigger_to_json(trigger);
  j["target_label"] = target_label;
  j["gamma"] = gamma;
  j["seed"] = seed;
  j["modified_indices"] = modified_indices;
  j["dataset_fingerprint"] = dataset_fingerprint;
  return j;
}

WatermarkManifest WatermarkManifest::from_json(const json& j) {
  if (j.value("schema_version", 0) != 1)
    throw std::invalid_argument("unsupported manifest schema version");
  WatermarkManifest m;
  m.trigger = trigger_from_json(j.at("trigger"));
  m.target_label = j.at("target_label").get<int>();
  m.gamma = j.at("gamma").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.modified_indices = j.at("modified_indices").get<std::vector<int>>();
  m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  return m;
}

void WatermarkManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json().dump(2) << "\n";
}

WatermarkManifest WatermarkManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  json j;
  in >> j;
  return from_json(j);
}

WatermarkResult watermark_dataset(const Dataset& benign, const TriggerSpec& g,
                                  int target_label, double gamma,
                                  std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must lie in (0,1)");
  if (target_label < 0 || target_label >= benign.meta.num_classes)
    throw std::invalid_argument("target label out of range");
  if (trigger_modality(g) != benign.meta.modality)
    throw std::invalid_argument("trigger modality does not match dataset");
  validate_trigger(g);

  const auto n = static_cast<int>(benign.size());
  const auto n_mod = static_cast<int>(std::lround(gamma * static_cast<double>(n)));
  if (n_mod == 0)
    throw std::invalid_argument("gamma too small for N: no samples selected");

  Rng rng(seed);
  auto selected = rng.sample_without_replacement(n, n_mod);
  std::sort(selected.begin(), selected.end());

  WatermarkResult out;
  out.poisoned.meta = benign.meta;
  out.poisoned.samples = benign.samples;
  for (int idx : selected) {
    auto& s = out.poisoned.samples[static_cast<std::size_t>(idx)];
    s.payload = apply_trigger(benign.samples[static_cast<std::size_t>(idx)].payload, g);
    s.label = target_label;
  }

  out.manifest.trigger = g;
  out.manifest.target_label = target_label;
  out.manifest.gamma = gamma;
  out.manifest.seed = seed;
  out.manifest.modified_indices = std::move(selected);
  out.manifest.dataset_fingerprint = dataset_fingerprint(benign);
  return out;
}

json PerturbationSummary::to_json() const {
  json j;
  j["modality"] = modality_name(modality);
  j["modified_count"] = modified_count;
  switch (modality) {
    case Modality::Tensor:
      j["mean_l0"] = mean_l0;
      j["mean_l2"] = mean_l2;
      j["mean_linf"] = mean_linf;
      j["max_linf"] = max_linf;
      break;
    case Modality::Tokens:
      j["mean_tokens_added"] = mean_tokens_added;
      break;
    case Modality::Graph:
      j["mean_nodes_added"] = mean_nodes_added;
      j["mean_edges_added"] = mean_edges_added;
      break;
  }
  return j;
}

PerturbationSummary perturbation_report(const Dataset& benign,
                                        const Dataset& poisoned,
                                        const WatermarkManifest& manifest) {
  if (manifest.dataset_fingerprint != dataset_fingerprint(benign))
    throw std::invalid_argument(
        "manifest fingerprint does not match the benign dataset");
  if (benign.size() != poisoned.size())
    throw std::invalid_argument("benign and poisoned dataset sizes differ");

  PerturbationSummary s;
  s.modality = benign.meta.modality;
  s.modified_count = static_cast<int>(manifest.modified_indices.size());
  if (s.modified_count == 0) return s;

  for (int idx : manifest.modified_indices) {
    if (idx < 0 || idx >= static_cast<int>(benign.size()))
      throw std::invalid_argument("manifest index out of range");
    const auto& b = benign.samples[static_cast<std::size_t>(idx)].payload;
    const auto& p = poisoned.samples[static_cast<std::size_t>(idx)].payload;
    switch (s.modality) {
      case Modality::Tensor: {
        const auto& tb = std::get<DenseTensor>(b);
        const auto& tp = std::get<DenseTensor>(p);
        ArrayX diff = (tp.values - tb.values).abs();
        s.mean_l0 += static_cast<double>((diff > 0.0).count());
        s.mean_l2 += std::sqrt((diff * diff).sum());
        double linf = diff.size() > 0 ? diff.maxCoeff() : 0.0;
        s.mean_linf += linf;
        s.max_linf = std::max(s.max_linf, linf);
        break;
      }
      case Modality::Tokens: {
        const auto& sb = std::get<TokenSeq>(b);
        const auto& sp = std::get<TokenSeq>(p);
        s.mean_tokens_added +=
            static_cast<double>(sp.ids.size()) - static_cast<double>(sb.ids.size());
        break;
      }
      case Modality::Graph: {
        const auto& gb = std::get<GraphData>(b);
        const auto& gp = std::get<GraphData>(p);
        s.mean_nodes_added += gp.num_nodes - gb.num_nodes;
        s.mean_edges_added +=
            static_cast<double>(gp.edges.size()) - static_cast<double>(gb.edges.size());
        break;
      }
    }
  }
  const double n = s.modified_count;
  s.mean_l0 /= n;
  s.mean_l2 /= n;
  s.mean_linf /= n;
  s.mean_tokens_added /= n;
  s.mean_nodes_added /= n;
  s.mean_edges_added /= n;
  return s;
}

}  // namespace datamark
