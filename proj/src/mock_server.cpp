#include "datamark/mock_server.hpp"

#include "datamark/dataset_io.hpp"

#include <httplib.h>

#include <stdexcept>

namespace datamark {

using nlohmann::json;

struct MockModelServer::Impl {
  httplib::Server server;
  MlpParams params;
  Featurizer featurizer;
  DatasetMeta meta;  // payload decoding context
};

MockModelServer::MockModelServer(MlpParams params, Featurizer feat)
    : impl_(std::make_unique<Impl>()) {
  params.validate();
  impl_->params = std::move(params);
  impl_->featurizer = std::move(feat);
  impl_->meta.modality = impl_->featurizer.modality;
  impl_->meta.num_classes = impl_->params.num_classes();
  impl_->meta.shape = impl_->featurizer.shape;
  impl_->meta.vocab = impl_->featurizer.vocab;

  impl_->server.Post("/predict", [this](const httplib::Request& req,
                                        httplib::Response& res) {
    json out;
    try {
      json body = json::parse(req.body);
      const auto mode = body.at("mode").get<std::string>();
      if (mode != "proba" && mode != "label")
        throw std::invalid_argument("mode must be \"proba\" or \"label\"");
      const auto& inputs = body.at("inputs");
      if (!inputs.is_array())
        throw std::invalid_argument("inputs must be an array");

      json results = json::array();
      for (const auto& item : inputs) {
        Payload p = payload_from_json(item, impl_->meta);
        if (mode == "proba") {
          VectorX probs = predict_proba(impl_->params, impl_->featurizer, p);
          results.push_back(
              std::vector<double>(probs.data(), probs.data() + probs.size()));
        } else {
          results.push_back(predict_label(impl_->params, impl_->featurizer, p));
        }
      }
      out[mode == "proba" ? "probs" : "labels"] = std::move(results);
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      json err;
      err["error"] = e.what();
      res.status = 400;
      res.set_content(err.dump(), "application/json");
    }
  });
}

MockModelServer::~MockModelServer() { stop(); }

int MockModelServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    if (port_ < 0) throw std::runtime_error("failed to bind mock server");
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw std::runtime_error("failed to bind mock server to port " +
                               std::to_string(port));
    port_ = port;
  }
  thread_ = std::thread([this]() { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void MockModelServer::stop() {
  if (thread_.joinable()) {
    impl_->server.stop();
    thread_.join();
  }
}

std::string MockModelServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace datamark
