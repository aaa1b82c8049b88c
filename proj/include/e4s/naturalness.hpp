#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e4s/corpus.hpp"
#include "e4s/nli.hpp"

namespace e4s {

struct NaturalnessConfig {
  double contradiction_threshold = 0.7;
  std::size_t history_window = 5;  // K
  double w_cs = 0.6;
  double w_pcr = 0.2;
  double w_scr = 0.2;
  double cs_entailment = 1.0;
  double cs_neutral = 0.5;
  double cs_contradiction = 0.0;

  /// Throws ConfigError on an invalid setting.
  void check() const;
};

enum class PairKind { Turn, Persona, History };

std::string_view to_string(PairKind kind);
std::optional<PairKind> parse_pair_kind(std::string_view s);

/// One NLI pair of a conversation. Premise is the earlier text: the previous
/// turn, a persona sentence or an earlier same-speaker utterance. The
/// hypothesis is always the current utterance.
struct NliPairRecord {
  std::string conversation_id;
  PairKind kind = PairKind::Turn;
  SpeakerRole speaker = SpeakerRole::User1;  // speaker of the hypothesis
  std::size_t premise_ref = 0;     // turn index, or persona sentence index
  std::size_t hypothesis_ref = 0;  // turn index
  NliPair texts;
  std::optional<ScoredLabel> result;
};

/// Turn pairs (u[t-1], u[t]) for every t >= 1; persona pairs (p[s,i], u[t])
/// for each utterance of s; history pairs against s's previous K utterances.
std::vector<NliPairRecord> enumerate_pairs(const Conversation& conversation, const NaturalnessConfig& config = {});

/// Mean of the mapped label values. Throws DataError on an empty list.
double coherence_score(std::span<const ScoredLabel> turn_labels, const NaturalnessConfig& config = {});

/// Share of pairs labelled contradiction with confidence >= threshold; 0 for
/// an empty list.
double contradiction_rate(std::span<const ScoredLabel> labels, double threshold);

struct LabelDistribution {
  double er = 0.0;
  double nr = 0.0;
  double cr = 0.0;
};

/// Label proportions; contradictions count regardless of confidence. Throws
/// DataError on an empty list.
LabelDistribution label_distribution(std::span<const ScoredLabel> turn_labels);

/// w_cs * cs + w_pcr * (1 - pcr) + w_scr * (1 - scr).
double naturalness_score(double cs, double pcr, double scr, const NaturalnessConfig& config = {});

/// 1 - |sim - ref| / ref, unclamped. Throws DataError if ref <= 0.
double naturalness_similarity(double sim, double ref);

struct NaturalnessReport {
  double cs = 0.0;
  double pcr = 0.0;
  double scr = 0.0;
  double er = 0.0;
  double nr = 0.0;
  double cr = 0.0;
  double naturalness = 0.0;
  std::size_t turn_pairs = 0;
  std::size_t persona_pairs = 0;
  std::size_t history_pairs = 0;
  // Label counts over turn pairs.
  std::size_t entailments = 0;
  std::size_t neutrals = 0;
  std::size_t contradictions = 0;
};

/// Pools every labelled record of a corpus (micro-average). Throws DataError
/// if a record is unlabelled or there are no turn pairs.
NaturalnessReport naturalness_from_records(std::span<const NliPairRecord> records,
                                           const NaturalnessConfig& config = {});

struct NaturalnessResult {
  NaturalnessReport report;
  std::vector<NliPairRecord> records;  // labelled
};

/// Enumerates all pairs of the corpus, labels them through `provider` and
/// computes the report.
NaturalnessResult evaluate_naturalness(const Corpus& corpus, NliProvider& provider,
                                       const NaturalnessConfig& config = {});

/// Every pair of the corpus, unlabelled and deduplicated by pair key, in first
/// occurrence order.
std::vector<NliPair> unique_nli_pairs(const Corpus& corpus, const NaturalnessConfig& config = {});

/// JSON-Lines: conversation, kind, speaker, premise_ref, hypothesis_ref,
/// premise_key, hypothesis_key, label, confidence.
void write_pair_labels(std::span<const NliPairRecord> records, std::ostream& out);
/// Records come back without texts; metrics need only labels and kinds.
std::vector<NliPairRecord> read_pair_labels(std::istream& in);

}  // namespace e4s
