#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "e4s/adherence.hpp"
#include "e4s/consistency.hpp"
#include "e4s/corpus.hpp"
#include "e4s/naturalness.hpp"
#include "e4s/remote.hpp"
#include "e4s/report.hpp"

namespace e4s {

struct EmbeddingSettings {
  std::map<std::string, std::filesystem::path> files;  // dataset name -> embedding file
  bool remote = false;                                 // fetch missing datasets from the service
};

struct NliSettings {
  std::string provider = "precomputed";  // precomputed, remote or mock
  std::string mock = "neutral";          // a label name, or "hashed"
  std::vector<std::filesystem::path> precomputed;
};

/// Declarative run description. Every field has a default; the resolved value
/// is embedded in report.json.
struct RunConfig {
  std::filesystem::path reference;
  std::vector<std::filesystem::path> simulations;
  std::optional<CorpusFormat> format;  // unset: guessed per file
  bool strict = true;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "e4s-out";
  std::size_t threads = 0;
  std::set<Dimension> dimensions{Dimension::Adherence, Dimension::Consistency, Dimension::Naturalness};

  AdherenceConfig adherence;
  SpeakerRole adherence_role = SpeakerRole::User2;
  bool merge_identical_personas = false;
  std::string backend = "tfidf-word";  // tfidf-word, tfidf-char, bm25, late-interaction
  SparseOptions sparse;
  EmbeddingSettings embeddings;
  bool extra_columns = false;

  ConsistencyOptions consistency;
  NaturalnessConfig naturalness;
  NliSettings nli;
  RemoteOptions remote;

  /// Relative paths resolve against `base_dir`. Unknown keys are a ConfigError.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;

  /// Throws ConfigError on invalid settings or missing input paths.
  void check() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Name used for a corpus file in reports: the file stem.
std::string dataset_name(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, const RunConfig& config,
                   std::vector<std::string>* diagnostics = nullptr);

/// Curve for one corpus under the configured backend.
MrrCurve run_adherence(const Corpus& corpus, const RunConfig& config,
                       std::shared_ptr<const EmbeddingStore> embeddings = nullptr);

/// Provider described by the NLI settings, wrapped in a cache.
std::shared_ptr<NliProvider> make_nli_provider(const RunConfig& config);

/// Query units of the evaluated role plus one chunk per turn.
std::vector<EmbedUnit> embed_units(const Corpus& corpus, SpeakerRole role, bool merge_identical = false);

nlohmann::json curve_json(const MrrCurve& curve);
nlohmann::json consistency_json(const ConsistencyResult& result);
nlohmann::json naturalness_json(const NaturalnessReport& report);

/// Reference first, then each simulation with identical settings. Dimension
/// failures are isolated and listed in report.failures. With `write`, artifacts
/// and reports go under config.output_dir. A reference that cannot be parsed
/// is thrown as DataError.
RunReport run_pipeline(const RunConfig& config, bool write = true);

}  // namespace e4s
