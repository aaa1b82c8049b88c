#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "e4s/error.hpp"
#include "e4s/remote.hpp"

using namespace e4s;
using nlohmann::json;

namespace {

// In-process stand-in for the inference service.
struct MockService {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> nli_calls{0};
  std::atomic<int> fail_first{0};  // answer 503 this many times
  std::atomic<int> status{200};

  MockService() {
    server.Post("/v1/nli", [this](const httplib::Request& req, httplib::Response& res) {
      ++nli_calls;
      if (fail_first > 0) {
        --fail_first;
        res.status = 503;
        return;
      }
      if (status != 200) {
        res.status = status;
        res.set_content("nope", "text/plain");
        return;
      }
      const auto body = json::parse(req.body);
      json out{{"results", json::array()}};
      for (const auto& p : body["pairs"]) {
        const bool same = p["premise"] == p["hypothesis"];
        out["results"].push_back({{"label", same ? "entailment" : "neutral"}, {"confidence", same ? 0.99 : 0.6}});
      }
      res.set_content(out.dump(), "application/json");
    });
    server.Post("/v1/embed", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      json out{{"units", json::array()}};
      for (const auto& u : body["units"]) {
        const double len = static_cast<double>(u["text"].get<std::string>().size());
        out["units"].push_back({{"unit_id", u["unit_id"]}, {"dim", 2}, {"rows", {{len, 1.0}, {0.0, 2.0}}}});
      }
      res.set_content(out.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockService() {
    server.stop();
    thread.join();
  }

  RemoteOptions options() const {
    RemoteOptions o;
    o.url = "http://127.0.0.1:" + std::to_string(port);
    o.backoff = std::chrono::milliseconds(1);
    o.batch_size = 2;
    o.parallelism = 2;
    o.timeout = std::chrono::seconds(5);
    return o;
  }
};

}  // namespace

TEST_CASE("remote NLI keeps order across batches") {
  MockService svc;
  RemoteNli nli(svc.options());
  const std::vector<NliPair> pairs{{"a", "a"}, {"a", "b"}, {"c", "c"}, {"d", "e"}, {"f", "f"}};
  const auto out = nli.classify(pairs);
  REQUIRE(out.size() == 5);
  CHECK(out[0].label == NliLabel::Entailment);
  CHECK(out[1].label == NliLabel::Neutral);
  CHECK(out[2].label == NliLabel::Entailment);
  CHECK(out[3].label == NliLabel::Neutral);
  CHECK(out[4].confidence == doctest::Approx(0.99));
  CHECK(svc.nli_calls == 3);
}

TEST_CASE("remote NLI retries 5xx and gives up after the attempt budget") {
  MockService svc;
  auto o = svc.options();
  o.batch_size = 64;
  svc.fail_first = 2;
  CHECK(RemoteNli(o).classify(std::vector<NliPair>{{"x", "x"}}).size() == 1);
  CHECK(svc.nli_calls == 3);

  svc.nli_calls = 0;
  svc.fail_first = 3;
  CHECK_THROWS_AS(RemoteNli(o).classify(std::vector<NliPair>{{"x", "x"}}), ProviderError);
  CHECK(svc.nli_calls == 3);
}

TEST_CASE("remote NLI does not retry 4xx") {
  MockService svc;
  svc.status = 413;
  CHECK_THROWS_AS(RemoteNli(svc.options()).classify(std::vector<NliPair>{{"x", "y"}}), ProviderError);
  CHECK(svc.nli_calls == 1);
}

TEST_CASE("unreachable service is a provider error") {
  RemoteOptions o;
  o.url = "http://127.0.0.1:1";
  o.attempts = 2;
  o.backoff = std::chrono::milliseconds(1);
  o.timeout = std::chrono::seconds(1);
  CHECK_THROWS_AS(RemoteNli(o).classify(std::vector<NliPair>{{"x", "y"}}), ProviderError);
}

TEST_CASE("remote embeddings are renormalized and keyed by unit") {
  MockService svc;
  const std::vector<EmbedUnit> units{{"q:c1:user2", "abc"}, {"c:c1:0", "hello"}, {"c:c1:1", "x"}};
  const auto store = fetch_embeddings(units, svc.options());
  CHECK(store.size() == 3);
  CHECK(store.dim() == 2);
  const auto& m = store.at("c:c1:0");
  CHECK(m.rows() == 2);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    CHECK(std::hypot(row[0], row[1]) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(fetch_embeddings({}, svc.options()).size() == 0);
}
