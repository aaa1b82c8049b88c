#include "e4s/remote.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <thread>

#include "e4s/error.hpp"
#include "e4s/parallel.hpp"

namespace e4s {
namespace {

using nlohmann::json;

json post_with_retries(const RemoteOptions& options, const std::string& path, const json& body) {
  httplib::Client client(options.url);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);
  const std::string payload = body.dump();
  auto delay = options.backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= std::max(1, options.attempts); ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProviderError(options.url + path + " answered HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw ProviderError(options.url + path + " returned invalid JSON");
    return parsed;
  }
  throw ProviderError(options.url + path + " failed after " + std::to_string(options.attempts) + " attempts: " + last_error);
}

template <typename T>
std::size_t batch_count(std::span<const T> items, std::size_t batch_size) {
  const std::size_t b = std::max<std::size_t>(1, batch_size);
  return (items.size() + b - 1) / b;
}

}  // namespace

std::vector<ScoredLabel> RemoteNli::classify(std::span<const NliPair> pairs) {
  std::vector<ScoredLabel> out(pairs.size());
  const std::size_t bs = std::max<std::size_t>(1, options_.batch_size);
  const std::size_t batches = batch_count(pairs, bs);
  parallel_for(batches, options_.parallelism, [&](std::size_t b) {
    const std::size_t begin = b * bs;
    const std::size_t end = std::min(pairs.size(), begin + bs);
    json req{{"pairs", json::array()}};
    for (std::size_t i = begin; i < end; ++i) {
      req["pairs"].push_back({{"premise", pairs[i].premise}, {"hypothesis", pairs[i].hypothesis}});
    }
    json res = post_with_retries(options_, "/v1/nli", req);
    if (!res.contains("results") || !res["results"].is_array() || res["results"].size() != end - begin) {
      throw ProviderError("/v1/nli returned a malformed or short result list");
    }
    for (std::size_t i = begin; i < end; ++i) {
      const json& r = res["results"][i - begin];
      auto label = r.contains("label") && r["label"].is_string() ? parse_nli_label(r["label"].get<std::string>()) : std::nullopt;
      if (!label || !r.contains("confidence") || !r["confidence"].is_number()) {
        throw ProviderError("/v1/nli result " + std::to_string(i) + " is malformed");
      }
      const double conf = r["confidence"].get<double>();
      if (!(conf >= 0.0 && conf <= 1.0)) throw ProviderError("/v1/nli confidence outside [0, 1]");
      out[i] = {*label, conf};
    }
  });
  return out;
}

EmbeddingStore fetch_embeddings(std::span<const EmbedUnit> units, const RemoteOptions& options) {
  const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
  const std::size_t batches = batch_count(units, bs);
  std::vector<std::vector<TokenEmbeddingMatrix>> results(batches);
  parallel_for(batches, options.parallelism, [&](std::size_t b) {
    const std::size_t begin = b * bs;
    const std::size_t end = std::min(units.size(), begin + bs);
    json req{{"units", json::array()}};
    for (std::size_t i = begin; i < end; ++i) req["units"].push_back({{"unit_id", units[i].unit_id}, {"text", units[i].text}});
    json res = post_with_retries(options, "/v1/embed", req);
    if (!res.contains("units") || !res["units"].is_array() || res["units"].size() != end - begin) {
      throw ProviderError("/v1/embed returned a malformed or short unit list");
    }
    for (std::size_t i = begin; i < end; ++i) {
      const json& u = res["units"][i - begin];
      if (!u.contains("unit_id") || u["unit_id"] != units[i].unit_id) throw ProviderError("/v1/embed answered out of order");
      const auto dim = u.at("dim").get<std::size_t>();
      std::vector<float> data;
      for (const auto& row : u.at("rows")) {
        if (row.size() != dim) throw ProviderError("/v1/embed row width differs from dim");
        // The service guarantees unit norm to 1e-4; tighten to the store's tolerance.
        double sq = 0.0;
        for (const auto& x : row) sq += x.get<double>() * x.get<double>();
        const double norm = sq > 0.0 ? std::sqrt(sq) : 1.0;
        for (const auto& x : row) data.push_back(static_cast<float>(x.get<double>() / norm));
      }
      results[b].emplace_back(units[i].unit_id, dim, std::move(data));
    }
  });
  EmbeddingStore store;
  for (auto& batch : results) {
    for (auto& m : batch) store.insert(std::move(m));
  }
  return store;
}

}  // namespace e4s
