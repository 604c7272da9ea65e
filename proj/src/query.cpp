#include "datamark/query.hpp"

#include "datamark/dataset_io.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace datamark {

using nlohmann::json;

const char* query_mode_name(QueryMode m) {
  return m == QueryMode::Probability ? "probability" : "label-only";
}

QueryMode query_mode_from_name(const std::string& s) {
  if (s == "probability" || s == "proba") return QueryMode::Probability;
  if (s == "label-only" || s == "label") return QueryMode::LabelOnly;
  throw std::invalid_argument("unknown query mode: " + s);
}

void QueryLog::record(int batch_size, double latency_ms, QueryMode mode) {
  std::lock_guard<std::mutex> lock(mu_);
  double now = std::chrono::duration<double>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
  entries_.push_back({now, batch_size, latency_ms, mode});
  total_ += batch_size;
}

std::int64_t QueryLog::total_queries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_;
}

int QueryLog::request_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(entries_.size());
}

std::vector<QueryLogEntry> QueryLog::entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

json QueryLog::to_json() const {
  std::lock_guard<std::mutex> lock(mu_);
  json j;
  j["total_queries"] = total_;
  j["request_count"] = entries_.size();
  return j;
}

SuspectHandle SuspectHandle::local(MlpParams params, Featurizer feat, QueryMode mode) {
  params.validate();
  SuspectHandle h;
  h.local_ = std::make_shared<LocalBackend>(
      LocalBackend{std::move(params), std::move(feat)});
  h.mode_ = mode;
  h.log_ = std::make_shared<QueryLog>();
  return h;
}

SuspectHandle SuspectHandle::remote(RemoteEndpoint endpoint, QueryMode mode) {
  if (endpoint.base_url.rfind("http://", 0) != 0 &&
      endpoint.base_url.rfind("https://", 0) != 0)
    throw std::invalid_argument("remote base URL must start with http:// or https://");
  if (endpoint.max_batch < 1) throw std::invalid_argument("max_batch must be >= 1");
  if (endpoint.num_classes < 2)
    throw std::invalid_argument("remote endpoint needs num_classes >= 2");
  if (endpoint.parallelism < 1) endpoint.parallelism = 1;
  SuspectHandle h;
  h.remote_ = std::make_shared<RemoteEndpoint>(std::move(endpoint));
  h.mode_ = mode;
  h.log_ = std::make_shared<QueryLog>();
  return h;
}

int SuspectHandle::num_classes() const {
  return local_ ? local_->params.num_classes() : remote_->num_classes;
}

namespace {

struct Chunk {
  std::size_t begin;
  std::size_t end;
};

std::vector<Chunk> make_chunks(std::size_t n, int max_batch) {
  std::vector<Chunk> chunks;
  for (std::size_t at = 0; at < n; at += static_cast<std::size_t>(max_batch)) {
    chunks.push_back({at, std::min(n, at + static_cast<std::size_t>(max_batch))});
  }
  return chunks;
}

json post_predict_with_retries(const RemoteEndpoint& ep, const json& body,
                               std::size_t chunk_index, std::size_t chunk_count,
                               QueryLog& log, QueryMode mode, int batch_size) {
  std::string last_error;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = ep.backoff_initial_ms * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(delay)));
    }
    httplib::Client client(ep.base_url);
    client.set_connection_timeout(std::chrono::duration<double>(ep.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(ep.timeout_seconds));
    client.set_write_timeout(std::chrono::duration<double>(ep.timeout_seconds));
    httplib::Headers headers;
    if (!ep.auth_header.empty()) {
      auto colon = ep.auth_header.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("auth header must look like \"Name: value\"");
      std::string name = ep.auth_header.substr(0, colon);
      std::string value = ep.auth_header.substr(colon + 1);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      headers.emplace(name, value);
    }

    auto started = std::chrono::steady_clock::now();
    auto res = client.Post("/predict", headers, body.dump(), "application/json");
    double latency = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    log.record(batch_size, latency, mode);
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      // Malformed payloads are protocol violations, not transient faults.
      throw std::runtime_error("malformed response for batch " +
                               std::to_string(chunk_index + 1) + " of " +
                               std::to_string(chunk_count) + ": " + e.what());
    }
  }
  throw std::runtime_error("query failed for batch " +
                           std::to_string(chunk_index + 1) + " of " +
                           std::to_string(chunk_count) + " after " +
                           std::to_string(ep.max_retries + 1) +
                           " attempts: " + last_error);
}

}  // namespace

std::vector<json> SuspectHandle::remote_predict(const std::vector<Payload>& xs,
                                                const char* wire_mode,
                                                const char* result_key) const {
  const auto& ep = *remote_;
  auto chunks = make_chunks(xs.size(), ep.max_batch);
  std::vector<json> results(xs.size());
  if (chunks.empty()) return results;

  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto worker = [&]() {
    while (true) {
      std::size_t ci = next.fetch_add(1);
      if (ci >= chunks.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (first_error) return;
      }
      try {
        const auto& ch = chunks[ci];
        json body;
        body["mode"] = wire_mode;
        json inputs = json::array();
        for (std::size_t i = ch.begin; i < ch.end; ++i)
          inputs.push_back(payload_to_json(xs[i]));
        body["inputs"] = std::move(inputs);

        json res = post_predict_with_retries(ep, body, ci, chunks.size(), *log_,
                                             mode_, static_cast<int>(ch.end - ch.begin));
        if (!res.contains(result_key) || !res[result_key].is_array() ||
            res[result_key].size() != ch.end - ch.begin)
          throw std::runtime_error("malformed response for batch " +
                                   std::to_string(ci + 1) + ": missing or misshapen \"" +
                                   std::string(result_key) + "\"");
        for (std::size_t i = ch.begin; i < ch.end; ++i)
          results[i] = res[result_key][i - ch.begin];
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int n_workers = std::min<int>(ep.parallelism, static_cast<int>(chunks.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

std::vector<VectorX> SuspectHandle::query_proba(const std::vector<Payload>& xs) const {
  if (mode_ != QueryMode::Probability)
    throw std::invalid_argument("query_proba requires a probability-mode handle");
  std::vector<VectorX> out;
  out.reserve(xs.size());
  if (xs.empty()) return out;

  if (local_) {
    auto started = std::chrono::steady_clock::now();
    for (const auto& x : xs)
      out.push_back(predict_proba(local_->params, local_->featurizer, x));
    double latency = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    log_->record(static_cast<int>(xs.size()), latency, mode_);
    return out;
  }

  const int k = remote_->num_classes;
  auto raw = remote_predict(xs, "proba", "probs");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!raw[i].is_array() || static_cast<int>(raw[i].size()) != k)
      throw std::runtime_error("remote probability vector " + std::to_string(i) +
                               " has wrong length");
    VectorX v(k);
    for (int j = 0; j < k; ++j) {
      double e = raw[i][static_cast<std::size_t>(j)].get<double>();
      if (!std::isfinite(e) || e < -1e-9)
        throw std::runtime_error("remote probability entry out of range");
      v[j] = std::max(e, 0.0);
    }
    double sum = v.sum();
    if (std::abs(sum - 1.0) > 1e-3)
      throw std::runtime_error("remote probability vector " + std::to_string(i) +
                               " sums to " + std::to_string(sum) +
                               "; outside renormalization tolerance");
    if (std::abs(sum - 1.0) > 1e-9) v /= sum;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<int> SuspectHandle::query_label(const std::vector<Payload>& xs) const {
  std::vector<int> out;
  out.reserve(xs.size());
  if (xs.empty()) return out;

  if (mode_ == QueryMode::Probability) {
    auto probs = query_proba(xs);
    for (const auto& v : probs) out.push_back(argmax_lowest(v));
    return out;
  }

  if (local_) {
    auto started = std::chrono::steady_clock::now();
    for (const auto& x : xs)
      out.push_back(predict_label(local_->params, local_->featurizer, x));
    double latency = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    log_->record(static_cast<int>(xs.size()), latency, mode_);
    return out;
  }

  const int k = remote_->num_classes;
  auto raw = remote_predict(xs, "label", "labels");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!raw[i].is_number_integer())
      throw std::runtime_error("remote label " + std::to_string(i) +
                               " is not an integer");
    int label = raw[i].get<int>();
    if (label < 0 || label >= k)
      throw std::runtime_error("remote label " + std::to_string(label) +
                               " out of range for K=" + std::to_string(k));
    out.push_back(label);
  }
  return out;
}

}  // namespace datamark
