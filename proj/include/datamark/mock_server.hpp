#pragma once

#include "datamark/mlp.hpp"

#include <memory>
#include <string>
#include <thread>

namespace datamark {

/// Serves a trained model over the prediction wire protocol:
/// POST /predict with {"inputs": [payload,...], "mode": "proba"|"label"}
/// answers {"probs": [[...],...]} or {"labels": [...]}.
class MockModelServer {
 public:
  MockModelServer(MlpParams params, Featurizer feat);
  ~MockModelServer();

  MockModelServer(const MockModelServer&) = delete;
  MockModelServer& operator=(const MockModelServer&) = delete;

  /// Binds host:port (port 0 picks an ephemeral port), serves on a
  /// background thread, and returns the bound port once ready.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

}  // namespace datamark
