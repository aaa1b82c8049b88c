#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "e4s/corpus.hpp"
#include "e4s/late_interaction.hpp"
#include "e4s/sparse_index.hpp"

namespace e4s {

/// Thirteen distractor counts spanning [1, 1000].
std::vector<std::size_t> default_pool_sizes();

struct AdherenceConfig {
  double alpha = 1.0;
  std::vector<std::size_t> pool_sizes = default_pool_sizes();  // distractors per pool
  std::size_t repetitions = 10;
  std::size_t relevant_per_pool = 1;  // R
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency

  /// Throws ConfigError on an invalid setting.
  void check() const;
};

struct CurvePoint {
  std::size_t pool_size = 0;
  double mrr_mean = 0.0;
  double mrr_std = 0.0;  // population std of the per-repetition means
  std::size_t repetitions = 0;
  double map_mean = 0.0;   // equals mrr_mean when R = 1
  double ndcg_mean = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct MrrCurve {
  std::string dataset;
  std::vector<CurvePoint> points;

  bool operator==(const MrrCurve&) const = default;
};

/// Which utterances make up a conversation document.
enum class IndexScope { Full, TargetSpeaker };

/// Persona description used as a retrieval query.
struct PersonaQuery {
  PersonaKey key;
  std::string text;  // persona sentences joined by single spaces
};

PersonaQuery make_query(const RelevanceEntry& entry);

/// Scores a persona query against every conversation of one corpus.
class ConversationScorer {
 public:
  virtual ~ConversationScorer() = default;
  /// Aligned with conversation_ids().
  virtual std::vector<double> score_all(const PersonaQuery& query) const = 0;
  virtual const std::vector<std::string>& conversation_ids() const = 0;
  virtual std::string describe() const = 0;

  /// Score of one conversation; throws DataError if the id is not indexed.
  double score(const PersonaQuery& query, const std::string& conversation_id) const;
};

/// Lexical scorer. Full documents join every turn; target-speaker documents
/// join only `role`'s utterances.
std::unique_ptr<ConversationScorer> make_sparse_scorer(const Corpus& corpus, IndexScope scope, SpeakerRole role,
                                                       SparseScheme scheme, SparseOptions options = {});

/// MaxSim scorer over precomputed token embeddings. Each turn is one chunk;
/// the target-speaker scope keeps only `role`'s turns. A conversation with no
/// chunks scores 0.
std::unique_ptr<ConversationScorer> make_late_interaction_scorer(const Corpus& corpus, IndexScope scope,
                                                                 SpeakerRole role,
                                                                 std::shared_ptr<const EmbeddingStore> store);

/// w = sin(alpha * pi / 2).
double interpolation_weight(double alpha);

/// (1 - w) * full + w * target.
double blend_scores(double full_score, double target_score, double alpha);

double speaker_aware_score(const PersonaQuery& query, const std::string& conversation_id, double alpha,
                           const ConversationScorer& full_index, const ConversationScorer& target_index);

struct PoolSample {
  PersonaKey persona_key;
  std::vector<std::string> relevant_ids;
  std::vector<std::string> distractor_ids;
};

/// Uniform samples without replacement: R from the persona's relevant set and
/// k from the rest of the corpus. Throws DataError when either set is too small.
PoolSample sample_pool(const RelevanceMap& relevance, std::size_t persona, std::size_t relevant_count,
                       std::size_t distractor_count, std::mt19937_64& rng);

/// Orders ids by descending score, ties by ascending id.
std::vector<std::string> rank_pool(std::span<const std::string> ids, std::span<const double> scores);

/// 1 / (1-based rank of the first relevant id). Throws DataError if no
/// relevant id occurs in the ranking.
double reciprocal_rank(std::span<const std::string> ranking, const std::set<std::string>& relevant);

/// Seed for the work item (pool size, repetition, persona), so results do not
/// depend on scheduling.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t pool_size, std::uint64_t repetition,
                             std::uint64_t persona);

/// MRR degradation curve. Each persona is scored once against the whole corpus
/// with the speaker-aware blend; pools are then sampled per (pool size,
/// repetition, persona). MRR is averaged over personas, then repetitions.
MrrCurve evaluate_curve(const Corpus& corpus, const RelevanceMap& relevance, const AdherenceConfig& config,
                        const ConversationScorer& full_index, const ConversationScorer& target_index);

/// Middle weights (p[i+1] - p[i-1]) / 2; endpoints use the nearest-neighbour gap.
std::vector<double> span_weights(std::span<const std::size_t> pool_sizes);

/// sum w a b / max(sum w a^2, sum w b^2), a = reference, b = simulation.
double curve_similarity(const MrrCurve& reference, const MrrCurve& simulation);

/// Trapezoidal area under MRR over pool size, divided by the pool-size span.
double normalized_auc(const MrrCurve& curve);

/// Columns pool_size, mrr_mean, mrr_std, repetitions; map_mean and ndcg_mean
/// are appended when `extra_columns` is set.
void write_curve_csv(const MrrCurve& curve, std::ostream& out, bool extra_columns = false);

}  // namespace e4s
