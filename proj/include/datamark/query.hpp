#pragma once

#include "datamark/mlp.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace datamark {

enum class QueryMode { Probability, LabelOnly };

const char* query_mode_name(QueryMode m);
QueryMode query_mode_from_name(const std::string& s);

struct QueryLogEntry {
  double timestamp_unix = 0.0;
  int batch_size = 0;
  double latency_ms = 0.0;
  QueryMode mode = QueryMode::Probability;
};

/// Thread-safe record of every request a handle issued. total_queries is
/// the sum of batch sizes across requests.
class QueryLog {
 public:
  void record(int batch_size, double latency_ms, QueryMode mode);
  std::int64_t total_queries() const;
  int request_count() const;
  std::vector<QueryLogEntry> entries() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  std::vector<QueryLogEntry> entries_;
  std::int64_t total_ = 0;
};

struct RemoteEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8093
  int num_classes = 0;
  double timeout_seconds = 10.0;
  int max_batch = 64;
  int max_retries = 3;
  double backoff_initial_ms = 100.0;
  int parallelism = 1;
  std::string auth_header;  // "Name: value", optional
};

/// The black-box boundary: a uniform query surface over an in-process model
/// or a remote HTTP prediction endpoint. Copies share the query log.
class SuspectHandle {
 public:
  static SuspectHandle local(MlpParams params, Featurizer feat, QueryMode mode);
  static SuspectHandle remote(RemoteEndpoint endpoint, QueryMode mode);

  /// One probability vector per input, order-aligned; requires probability
  /// mode. Remote batches above max_batch are chunked transparently and the
  /// chunks may run in parallel; outputs are reassembled in input order.
  std::vector<VectorX> query_proba(const std::vector<Payload>& xs) const;

  /// Order-aligned predicted labels. In probability mode labels derive from
  /// argmax (lowest index on ties).
  std::vector<int> query_label(const std::vector<Payload>& xs) const;

  QueryMode mode() const { return mode_; }
  int num_classes() const;
  const QueryLog& log() const { return *log_; }

 private:
  SuspectHandle() = default;

  struct LocalBackend {
    MlpParams params;
    Featurizer featurizer;
  };

  std::shared_ptr<LocalBackend> local_;
  std::shared_ptr<RemoteEndpoint> remote_;
  QueryMode mode_ = QueryMode::Probability;
  std::shared_ptr<QueryLog> log_;

  std::vector<nlohmann::json> remote_predict(const std::vector<Payload>& xs,
                                             const char* wire_mode,
                                             const char* result_key) const;
};

}  // namespace datamark
