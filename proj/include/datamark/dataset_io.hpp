#pragma once

#include "datamark/dataset.hpp"

#include <json.hpp>

#include <string>

namespace datamark {

enum class DatasetFormat { Jsonl };

/// Payload <-> JSON object, the schema shared by the JSONL dataset files and
/// the prediction wire protocol: {"tensor": [...]} (row-major flattened),
/// {"tokens": [...]}, or {"n": int, "edges": [[u,v],...]}.
nlohmann::json payload_to_json(const Payload& p);
Payload payload_from_json(const nlohmann::json& j, const DatasetMeta& meta);

/// JSONL layout: line 1 is a header declaring modality/num_classes and
/// shape or vocab; every following line is one sample object with a "label".
void save_dataset(const Dataset& d, const std::string& path,
                  DatasetFormat format = DatasetFormat::Jsonl);
Dataset load_dataset(const std::string& path,
                     DatasetFormat format = DatasetFormat::Jsonl);

}  // namespace datamark
