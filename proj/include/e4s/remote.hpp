#pragma once

#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "e4s/late_interaction.hpp"
#include "e4s/nli.hpp"

namespace e4s {

/// Transport settings for the inference service.
struct RemoteOptions {
  std::string url = "http://127.0.0.1:8765";  // scheme://host:port
  std::size_t batch_size = 64;
  std::size_t parallelism = 4;  // batches in flight
  int attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled after each failed attempt
  std::chrono::seconds timeout{60};
};

/// POST /v1/nli client. Request {"pairs": [{"premise", "hypothesis"}, ...]},
/// response {"results": [{"label", "confidence"}, ...]} in request order.
/// Transport errors and 5xx responses are retried; 4xx responses are not.
class RemoteNli final : public NliProvider {
 public:
  explicit RemoteNli(RemoteOptions options) : options_(std::move(options)) {}

  std::vector<ScoredLabel> classify(std::span<const NliPair> pairs) override;
  std::string describe() const override { return "remote:" + options_.url; }

 private:
  RemoteOptions options_;
};

struct EmbedUnit {
  std::string unit_id;
  std::string text;
};

/// POST /v1/embed client. Request {"units": [{"unit_id", "text"}, ...]},
/// response {"units": [{"unit_id", "dim", "rows": [[...], ...]}, ...]}.
EmbeddingStore fetch_embeddings(std::span<const EmbedUnit> units, const RemoteOptions& options);

}  // namespace e4s
