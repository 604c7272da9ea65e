#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "datamark/mock_server.hpp"
#include "datamark/query.hpp"
#include "datamark/synth.hpp"

#include <httplib.h>

#include <atomic>

using namespace datamark;

namespace {

struct Fixture {
  Dataset data;
  Featurizer feat;
  MlpParams model;
  std::vector<Payload> payloads;

  Fixture() : data(synth_tensor_dataset(3, 20, {1, 4, 4}, 6.0, 55)),
              feat(Featurizer::for_tensor({1, 4, 4})) {
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.seed = 1;
    model = train(data, feat, cfg).params;
    for (const auto& s : data.samples) payloads.push_back(s.payload);
  }
};

}  // namespace

TEST_CASE("local handle is the adapter over predict functions") {
  Fixture f;
  auto h = SuspectHandle::local(f.model, f.feat, QueryMode::Probability);
  auto probs = h.query_proba(f.payloads);
  REQUIRE(probs.size() == f.payloads.size());
  for (std::size_t i = 0; i < f.payloads.size(); ++i) {
    VectorX direct = predict_proba(f.model, f.feat, f.payloads[i]);
    CHECK((probs[i] - direct).cwiseAbs().maxCoeff() == 0.0);
  }
  auto labels = h.query_label(f.payloads);
  for (std::size_t i = 0; i < f.payloads.size(); ++i)
    CHECK(labels[i] == predict_label(f.model, f.feat, f.payloads[i]));

  // One logged request per call; the label call delegates to query_proba.
  CHECK(h.log().total_queries() == 2 * static_cast<int>(f.payloads.size()));
  CHECK(h.log().request_count() == 2);

  auto label_handle = SuspectHandle::local(f.model, f.feat, QueryMode::LabelOnly);
  CHECK(label_handle.query_label(f.payloads) == labels);
  CHECK_THROWS_AS(label_handle.query_proba(f.payloads), std::invalid_argument);
}

TEST_CASE("empty input issues no requests") {
  Fixture f;
  auto h = SuspectHandle::local(f.model, f.feat, QueryMode::Probability);
  CHECK(h.query_proba({}).empty());
  CHECK(h.query_label({}).empty());
  CHECK(h.log().total_queries() == 0);
  CHECK(h.log().request_count() == 0);
}

TEST_CASE("remote handle equals local through the mock server") {
  Fixture f;
  MockModelServer server(f.model, f.feat);
  int port = server.start();

  RemoteEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.num_classes = 3;
  ep.max_batch = 7;
  auto remote = SuspectHandle::remote(ep, QueryMode::Probability);
  auto local = SuspectHandle::local(f.model, f.feat, QueryMode::Probability);

  auto rp = remote.query_proba(f.payloads);
  auto lp = local.query_proba(f.payloads);
  REQUIRE(rp.size() == lp.size());
  for (std::size_t i = 0; i < rp.size(); ++i)
    CHECK((rp[i] - lp[i]).cwiseAbs().maxCoeff() <= 1e-6);

  // Total queries equal the number of samples regardless of chunking.
  CHECK(remote.log().total_queries() == static_cast<int>(f.payloads.size()));
  CHECK(remote.log().request_count() ==
        (static_cast<int>(f.payloads.size()) + ep.max_batch - 1) / ep.max_batch);

  // Label-only wire mode agrees as well.
  auto remote_labels = SuspectHandle::remote(ep, QueryMode::LabelOnly);
  CHECK(remote_labels.query_label(f.payloads) == local.query_label(f.payloads));
  server.stop();
}

TEST_CASE("chunking and parallelism leave results unchanged") {
  Fixture f;
  MockModelServer server(f.model, f.feat);
  int port = server.start();

  std::vector<std::vector<VectorX>> all;
  for (auto [batch, par] : std::vector<std::pair<int, int>>{{1, 1}, {7, 1}, {1000, 1}, {5, 4}}) {
    RemoteEndpoint ep;
    ep.base_url = "http://127.0.0.1:" + std::to_string(port);
    ep.num_classes = 3;
    ep.max_batch = batch;
    ep.parallelism = par;
    auto h = SuspectHandle::remote(ep, QueryMode::Probability);
    all.push_back(h.query_proba(f.payloads));
  }
  for (std::size_t v = 1; v < all.size(); ++v) {
    REQUIRE(all[v].size() == all[0].size());
    for (std::size_t i = 0; i < all[v].size(); ++i)
      CHECK((all[v][i] - all[0][i]).cwiseAbs().maxCoeff() == 0.0);
  }
  server.stop();
}

TEST_CASE("fixed-vector echo server") {
  httplib::Server svr;
  svr.Post("/predict", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json out;
    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t i = 0; i < body["inputs"].size(); ++i)
      probs.push_back({0.2, 0.8});
    out["probs"] = probs;
    res.set_content(out.dump(), "application/json");
  });
  int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&]() { svr.listen_after_bind(); });
  svr.wait_until_ready();

  Fixture f;
  RemoteEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.num_classes = 2;
  auto h = SuspectHandle::remote(ep, QueryMode::Probability);
  auto probs = h.query_proba(f.payloads);
  for (const auto& p : probs) {
    CHECK(p[0] == doctest::Approx(0.2));
    CHECK(p[1] == doctest::Approx(0.8));
  }
  svr.stop();
  th.join();
}

TEST_CASE("remote validation: labels, normalization, malformed") {
  Fixture f;
  std::atomic<int> mode{0};
  httplib::Server svr;
  svr.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    std::size_t n = body["inputs"].size();
    nlohmann::json out;
    switch (mode.load()) {
      case 0: {  // out-of-range label
        nlohmann::json labels = nlohmann::json::array();
        for (std::size_t i = 0; i < n; ++i) labels.push_back(7);
        out["labels"] = labels;
        break;
      }
      case 1: {  // slightly off normalization: renormalized
        nlohmann::json probs = nlohmann::json::array();
        for (std::size_t i = 0; i < n; ++i) probs.push_back({0.2004, 0.8001});
        out["probs"] = probs;
        break;
      }
      case 2: {  // far off normalization: rejected
        nlohmann::json probs = nlohmann::json::array();
        for (std::size_t i = 0; i < n; ++i) probs.push_back({0.6, 0.6});
        out["probs"] = probs;
        break;
      }
      default: {  // malformed shape
        out["probs"] = {{0.5, 0.5}};
        break;
      }
    }
    res.set_content(out.dump(), "application/json");
  });
  int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&]() { svr.listen_after_bind(); });
  svr.wait_until_ready();

  RemoteEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.num_classes = 5;
  ep.max_retries = 0;
  auto labels_handle = SuspectHandle::remote(ep, QueryMode::LabelOnly);
  CHECK_THROWS_AS(labels_handle.query_label(f.payloads), std::runtime_error);

  ep.num_classes = 2;
  auto proba_handle = SuspectHandle::remote(ep, QueryMode::Probability);
  mode = 1;
  auto probs = proba_handle.query_proba({f.payloads[0]});
  CHECK(probs[0].sum() == doctest::Approx(1.0).epsilon(1e-9));

  mode = 2;
  CHECK_THROWS_AS(proba_handle.query_proba({f.payloads[0]}), std::runtime_error);

  mode = 3;
  CHECK_THROWS_AS(proba_handle.query_proba(f.payloads), std::runtime_error);

  svr.stop();
  th.join();
}

TEST_CASE("transient failures are retried with backoff") {
  Fixture f;
  std::atomic<int> failures_left{2};
  std::atomic<int> requests_seen{0};
  httplib::Server svr;
  svr.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    ++requests_seen;
    if (failures_left.fetch_sub(1) > 0) {
      res.status = 503;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t i = 0; i < body["inputs"].size(); ++i)
      probs.push_back({1.0, 0.0});
    nlohmann::json out;
    out["probs"] = probs;
    res.set_content(out.dump(), "application/json");
  });
  int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&]() { svr.listen_after_bind(); });
  svr.wait_until_ready();

  RemoteEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.num_classes = 2;
  ep.max_retries = 3;
  ep.backoff_initial_ms = 1.0;
  auto h = SuspectHandle::remote(ep, QueryMode::Probability);
  auto probs = h.query_proba({f.payloads[0]});
  CHECK(probs[0][0] == doctest::Approx(1.0));
  CHECK(requests_seen.load() == 3);
  // Only the successful request is logged as a served query.
  CHECK(h.log().total_queries() == 1);

  failures_left = 1000;
  try {
    h.query_proba({f.payloads[0]});
    FAIL("expected a query failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("batch 1") != std::string::npos);
  }
  svr.stop();
  th.join();
}

TEST_CASE("static auth header is attached to every request") {
  Fixture f;
  httplib::Server svr;
  svr.Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("X-Api-Key") != "sesame") {
      res.status = 403;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t i = 0; i < body["inputs"].size(); ++i)
      probs.push_back({0.5, 0.5});
    nlohmann::json out;
    out["probs"] = probs;
    res.set_content(out.dump(), "application/json");
  });
  int port = svr.bind_to_any_port("127.0.0.1");
  std::thread th([&]() { svr.listen_after_bind(); });
  svr.wait_until_ready();

  RemoteEndpoint ep;
  ep.base_url = "http://127.0.0.1:" + std::to_string(port);
  ep.num_classes = 2;
  ep.max_retries = 0;
  auto unauthorized = SuspectHandle::remote(ep, QueryMode::Probability);
  CHECK_THROWS_AS(unauthorized.query_proba({f.payloads[0]}), std::runtime_error);

  ep.auth_header = "X-Api-Key: sesame";
  auto authorized = SuspectHandle::remote(ep, QueryMode::Probability);
  auto probs = authorized.query_proba({f.payloads[0]});
  CHECK(probs[0][0] == doctest::Approx(0.5));
  svr.stop();
  th.join();
}

TEST_CASE("a handle is safe to share across threads") {
  Fixture f;
  auto h = SuspectHandle::local(f.model, f.feat, QueryMode::Probability);
  auto expected = h.query_proba(f.payloads);

  constexpr int kThreads = 4;
  constexpr int kRounds = 5;
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&]() {
      for (int round = 0; round < kRounds; ++round) {
        auto got = h.query_proba(f.payloads);
        for (std::size_t i = 0; i < got.size(); ++i) {
          if ((got[i] - expected[i]).cwiseAbs().maxCoeff() != 0.0) ++mismatches;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(mismatches.load() == 0);
  CHECK(h.log().total_queries() ==
        static_cast<long long>((kThreads * kRounds + 1) * f.payloads.size()));
  CHECK(h.log().request_count() == kThreads * kRounds + 1);
}

TEST_CASE("remote endpoint validation") {
  RemoteEndpoint ep;
  ep.base_url = "127.0.0.1:80";
  ep.num_classes = 2;
  CHECK_THROWS_AS(SuspectHandle::remote(ep, QueryMode::Probability),
                  std::invalid_argument);
  ep.base_url = "http://127.0.0.1:80";
  ep.max_batch = 0;
  CHECK_THROWS_AS(SuspectHandle::remote(ep, QueryMode::Probability),
                  std::invalid_argument);
}
