#include "e4s/adherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "e4s/error.hpp"
#include "e4s/parallel.hpp"
#include "e4s/text.hpp"

namespace e4s {
namespace {

std::vector<SparseDoc> conversation_docs(const Corpus& corpus, IndexScope scope, SpeakerRole role) {
  std::vector<SparseDoc> docs;
  docs.reserve(corpus.conversations.size());
  for (const auto& c : corpus.conversations) {
    std::vector<std::string> parts;
    for (const auto& t : c.turns) {
      if (scope == IndexScope::Full || t.speaker == role) parts.push_back(t.text);
    }
    docs.push_back({c.id, text::join(parts)});
  }
  return docs;
}

std::unordered_map<std::string, std::size_t> position_map(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos.emplace(ids[i], i);
  return pos;
}

class SparseScorer final : public ConversationScorer {
 public:
  SparseScorer(SparseIndex index, IndexScope scope) : index_(std::move(index)), scope_(scope) {}

  std::vector<double> score_all(const PersonaQuery& query) const override { return index_.score_all(query.text); }
  const std::vector<std::string>& conversation_ids() const override { return index_.doc_ids(); }
  std::string describe() const override {
    return std::string(to_string(index_.scheme())) + (scope_ == IndexScope::Full ? "/full" : "/target");
  }

 private:
  SparseIndex index_;
  IndexScope scope_;
};

class LateInteractionScorer final : public ConversationScorer {
 public:
  LateInteractionScorer(const Corpus& corpus, IndexScope scope, SpeakerRole role,
                        std::shared_ptr<const EmbeddingStore> store)
      : store_(std::move(store)), scope_(scope) {
    if (!store_) throw ConfigError("late-interaction scorer needs an embedding store");
    for (const auto& c : corpus.conversations) {
      ids_.push_back(c.id);
      std::vector<const TokenEmbeddingMatrix*> chunks;
      for (const auto& t : c.turns) {
        if (scope == IndexScope::Full || t.speaker == role) chunks.push_back(&store_->at(chunk_unit_id(c.id, t.index)));
      }
      chunks_.push_back(std::move(chunks));
    }
  }

  std::vector<double> score_all(const PersonaQuery& query) const override {
    const TokenEmbeddingMatrix& q = store_->at(query_unit_id(query.key));
    std::vector<double> scores(chunks_.size(), 0.0);
    for (std::size_t i = 0; i < chunks_.size(); ++i) scores[i] = late_interaction_score(q, chunks_[i]);
    return scores;
  }
  const std::vector<std::string>& conversation_ids() const override { return ids_; }
  std::string describe() const override {
    return std::string("late-interaction") + (scope_ == IndexScope::Full ? "/full" : "/target");
  }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  IndexScope scope_;
  std::vector<std::string> ids_;
  std::vector<std::vector<const TokenEmbeddingMatrix*>> chunks_;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Floyd's algorithm: k distinct values from [0, m), uniformly.
std::vector<std::size_t> sample_indices(std::size_t m, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  out.reserve(k);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(k * 2);
  for (std::size_t j = m - k; j < m; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    std::size_t t = dist(rng);
    if (!chosen.insert(t).second) {
      chosen.insert(j);
      t = j;
    }
    out.push_back(t);
  }
  return out;
}

// Maps complement positions back to universe positions, `excluded` sorted.
std::size_t skip_excluded(std::size_t j, const std::vector<std::size_t>& excluded) {
  for (std::size_t e : excluded) {
    if (e <= j) ++j;
    else break;
  }
  return j;
}

struct IndexPool {
  std::vector<std::size_t> relevant;
  std::vector<std::size_t> distractors;
};

// Index-level sampler shared by sample_pool and evaluate_curve.
IndexPool sample_index_pool(const std::vector<std::size_t>& relevant_sorted, std::size_t universe, std::size_t r,
                            std::size_t k, std::mt19937_64& rng) {
  if (relevant_sorted.size() < r) {
    throw DataError("insufficient relevant conversations: need " + std::to_string(r) + ", have " +
                    std::to_string(relevant_sorted.size()));
  }
  const std::size_t others = universe - relevant_sorted.size();
  if (others < k) {
    throw DataError("insufficient distractors: need " + std::to_string(k) + ", have " + std::to_string(others));
  }
  IndexPool pool;
  for (std::size_t i : sample_indices(relevant_sorted.size(), r, rng)) pool.relevant.push_back(relevant_sorted[i]);
  for (std::size_t j : sample_indices(others, k, rng)) pool.distractors.push_back(skip_excluded(j, relevant_sorted));
  return pool;
}

std::vector<std::size_t> relevant_positions(const RelevanceEntry& entry,
                                            const std::unordered_map<std::string, std::size_t>& pos) {
  std::vector<std::size_t> out;
  for (const auto& id : entry.relevant) {
    auto it = pos.find(id);
    if (it == pos.end()) throw DataError("relevant conversation '" + id + "' is not in the corpus");
    out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct ItemMetrics {
  double rr = 0.0;
  double ap = 0.0;
  double ndcg = 0.0;
};

}  // namespace

std::vector<std::size_t> default_pool_sizes() { return {1, 2, 5, 10, 25, 50, 100, 200, 300, 400, 500, 750, 1000}; }

void AdherenceConfig::check() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (pool_sizes.empty()) throw ConfigError("pool_sizes must not be empty");
  for (std::size_t i = 1; i < pool_sizes.size(); ++i) {
    if (pool_sizes[i] <= pool_sizes[i - 1]) throw ConfigError("pool_sizes must be strictly ascending");
  }
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (relevant_per_pool < 1) throw ConfigError("relevant_per_pool must be >= 1");
}

PersonaQuery make_query(const RelevanceEntry& entry) { return {entry.key, text::join(entry.sentences)}; }

double ConversationScorer::score(const PersonaQuery& query, const std::string& conversation_id) const {
  const auto& ids = conversation_ids();
  auto it = std::find(ids.begin(), ids.end(), conversation_id);
  if (it == ids.end()) throw DataError("conversation '" + conversation_id + "' is not in index " + describe());
  return score_all(query)[static_cast<std::size_t>(it - ids.begin())];
}

std::unique_ptr<ConversationScorer> make_sparse_scorer(const Corpus& corpus, IndexScope scope, SpeakerRole role,
                                                       SparseScheme scheme, SparseOptions options) {
  auto docs = conversation_docs(corpus, scope, role);
  return std::make_unique<SparseScorer>(SparseIndex::build(docs, scheme, options), scope);
}

std::unique_ptr<ConversationScorer> make_late_interaction_scorer(const Corpus& corpus, IndexScope scope,
                                                                 SpeakerRole role,
                                                                 std::shared_ptr<const EmbeddingStore> store) {
  return std::make_unique<LateInteractionScorer>(corpus, scope, role, std::move(store));
}

double interpolation_weight(double alpha) { return std::sin(alpha * std::numbers::pi / 2.0); }

double blend_scores(double full_score, double target_score, double alpha) {
  const double w = interpolation_weight(alpha);
  return (1.0 - w) * full_score + w * target_score;
}

double speaker_aware_score(const PersonaQuery& query, const std::string& conversation_id, double alpha,
                           const ConversationScorer& full_index, const ConversationScorer& target_index) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  return blend_scores(full_index.score(query, conversation_id), target_index.score(query, conversation_id), alpha);
}

PoolSample sample_pool(const RelevanceMap& relevance, std::size_t persona, std::size_t relevant_count,
                       std::size_t distractor_count, std::mt19937_64& rng) {
  if (persona >= relevance.entries.size()) throw DataError("persona index out of range");
  const auto pos = position_map(relevance.universe);
  const RelevanceEntry& entry = relevance.entries[persona];
  IndexPool pool = sample_index_pool(relevant_positions(entry, pos), relevance.universe.size(), relevant_count,
                                     distractor_count, rng);
  PoolSample out{entry.key, {}, {}};
  for (std::size_t i : pool.relevant) out.relevant_ids.push_back(relevance.universe[i]);
  for (std::size_t i : pool.distractors) out.distractor_ids.push_back(relevance.universe[i]);
  return out;
}

std::vector<std::string> rank_pool(std::span<const std::string> ids, std::span<const double> scores) {
  if (ids.size() != scores.size()) throw DataError("ids and scores differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
  });
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (std::size_t i : order) out.push_back(ids[i]);
  return out;
}

double reciprocal_rank(std::span<const std::string> ranking, const std::set<std::string>& relevant) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) return 1.0 / static_cast<double>(i + 1);
  }
  throw DataError("no relevant conversation in ranking");
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t pool_size, std::uint64_t repetition,
                             std::uint64_t persona) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ pool_size);
  h = splitmix64(h ^ repetition);
  return splitmix64(h ^ persona);
}

MrrCurve evaluate_curve(const Corpus& corpus, const RelevanceMap& relevance, const AdherenceConfig& config,
                        const ConversationScorer& full_index, const ConversationScorer& target_index) {
  config.check();
  const auto& universe = relevance.universe;
  const std::size_t n = universe.size();
  if (full_index.conversation_ids() != universe || target_index.conversation_ids() != universe) {
    throw DataError("scorer indices do not cover the corpus in order");
  }
  const std::size_t personas = relevance.entries.size();
  if (personas == 0) throw DataError("no personas to evaluate");

  const auto pos = position_map(universe);
  std::vector<std::vector<std::size_t>> relevant(personas);
  for (std::size_t p = 0; p < personas; ++p) {
    relevant[p] = relevant_positions(relevance.entries[p], pos);
    if (relevant[p].size() < config.relevant_per_pool) {
      throw DataError("persona " + to_string(relevance.entries[p].key) + " has fewer than R relevant conversations");
    }
    if (n - relevant[p].size() < config.pool_sizes.back()) {
      throw DataError("insufficient distractors for pool size " + std::to_string(config.pool_sizes.back()) + ": corpus '" +
                      corpus.name + "' has " + std::to_string(n) + " conversations");
    }
  }

  // Lexicographic position of each id, for the ascending-id tie rule.
  std::vector<std::size_t> id_rank(n);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return universe[a] < universe[b]; });
    for (std::size_t r = 0; r < n; ++r) id_rank[order[r]] = r;
  }

  const std::size_t sizes = config.pool_sizes.size();
  const std::size_t reps = config.repetitions;
  const std::size_t R = config.relevant_per_pool;
  // metrics[(size * reps + rep) * personas + persona]
  std::vector<ItemMetrics> metrics(sizes * reps * personas);

  double ideal_dcg = 0.0;
  for (std::size_t j = 1; j <= R; ++j) ideal_dcg += 1.0 / std::log2(static_cast<double>(j) + 1.0);

  parallel_for(personas, config.threads, [&](std::size_t p) {
    const PersonaQuery query = make_query(relevance.entries[p]);
    // An endpoint weight leaves one index unused; skip scoring it.
    const double w = interpolation_weight(config.alpha);
    std::vector<double> score;
    if (w == 0.0) {
      score = full_index.score_all(query);
    } else if (w == 1.0) {
      score = target_index.score_all(query);
    } else {
      const std::vector<double> full = full_index.score_all(query);
      const std::vector<double> target = target_index.score_all(query);
      score.resize(n);
      for (std::size_t i = 0; i < n; ++i) score[i] = blend_scores(full[i], target[i], config.alpha);
    }
    auto beats = [&](std::size_t a, std::size_t b) {
      return score[a] != score[b] ? score[a] > score[b] : id_rank[a] < id_rank[b];
    };

    for (std::size_t s = 0; s < sizes; ++s) {
      const std::size_t k = config.pool_sizes[s];
      for (std::size_t rep = 0; rep < reps; ++rep) {
        std::mt19937_64 rng(substream_seed(config.seed, k, rep, p));
        IndexPool pool = sample_index_pool(relevant[p], n, R, k, rng);
        std::vector<std::size_t> ranks;
        ranks.reserve(R);
        for (std::size_t r : pool.relevant) {
          std::size_t rank = 1;
          for (std::size_t other : pool.relevant) rank += (other != r && beats(other, r)) ? 1 : 0;
          for (std::size_t d : pool.distractors) rank += beats(d, r) ? 1 : 0;
          ranks.push_back(rank);
        }
        std::sort(ranks.begin(), ranks.end());
        ItemMetrics m;
        m.rr = 1.0 / static_cast<double>(ranks.front());
        double dcg = 0.0;
        for (std::size_t j = 0; j < ranks.size(); ++j) {
          m.ap += static_cast<double>(j + 1) / static_cast<double>(ranks[j]);
          dcg += 1.0 / std::log2(static_cast<double>(ranks[j]) + 1.0);
        }
        m.ap /= static_cast<double>(R);
        m.ndcg = dcg / ideal_dcg;
        metrics[(s * reps + rep) * personas + p] = m;
      }
    }
  });

  MrrCurve curve;
  curve.dataset = corpus.name;
  for (std::size_t s = 0; s < sizes; ++s) {
    std::vector<double> rep_mrr(reps), rep_map(reps), rep_ndcg(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      double rr = 0.0, ap = 0.0, nd = 0.0;
      for (std::size_t p = 0; p < personas; ++p) {
        const auto& m = metrics[(s * reps + rep) * personas + p];
        rr += m.rr;
        ap += m.ap;
        nd += m.ndcg;
      }
      rep_mrr[rep] = rr / static_cast<double>(personas);
      rep_map[rep] = ap / static_cast<double>(personas);
      rep_ndcg[rep] = nd / static_cast<double>(personas);
    }
    auto mean = [&](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    CurvePoint pt;
    pt.pool_size = config.pool_sizes[s];
    pt.repetitions = reps;
    pt.mrr_mean = mean(rep_mrr);
    double var = 0.0;
    for (double x : rep_mrr) var += (x - pt.mrr_mean) * (x - pt.mrr_mean);
    pt.mrr_std = std::sqrt(var / static_cast<double>(reps));
    pt.map_mean = mean(rep_map);
    pt.ndcg_mean = mean(rep_ndcg);
    curve.points.push_back(pt);
  }
  return curve;
}

std::vector<double> span_weights(std::span<const std::size_t> pool_sizes) {
  const std::size_t m = pool_sizes.size();
  if (m < 2) throw DataError("span weights need at least 2 pool sizes");
  for (std::size_t i = 1; i < m; ++i) {
    if (pool_sizes[i] <= pool_sizes[i - 1]) throw DataError("pool sizes must be strictly ascending");
  }
  auto p = [&](std::size_t i) { return static_cast<double>(pool_sizes[i]); };
  std::vector<double> w(m);
  w.front() = p(1) - p(0);
  w.back() = p(m - 1) - p(m - 2);
  for (std::size_t i = 1; i + 1 < m; ++i) w[i] = (p(i + 1) - p(i - 1)) / 2.0;
  return w;
}

double curve_similarity(const MrrCurve& reference, const MrrCurve& simulation) {
  if (reference.points.size() != simulation.points.size()) throw DataError("curve grid mismatch: different lengths");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < reference.points.size(); ++i) {
    if (reference.points[i].pool_size != simulation.points[i].pool_size) {
      throw DataError("curve grid mismatch at point " + std::to_string(i));
    }
    sizes.push_back(reference.points[i].pool_size);
  }
  const auto w = span_weights(sizes);
  double cross = 0.0, ref_sq = 0.0, sim_sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double a = reference.points[i].mrr_mean;
    const double b = simulation.points[i].mrr_mean;
    cross += w[i] * a * b;
    ref_sq += w[i] * a * a;
    sim_sq += w[i] * b * b;
  }
  const double denom = std::max(ref_sq, sim_sq);
  if (denom <= 0.0) throw DataError("curve similarity undefined for all-zero curves");
  return cross / denom;
}

double normalized_auc(const MrrCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw DataError("normalized AUC needs at least 2 points");
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dx = static_cast<double>(pts[i].pool_size) - static_cast<double>(pts[i - 1].pool_size);
    area += dx * (pts[i].mrr_mean + pts[i - 1].mrr_mean) / 2.0;
  }
  const double span = static_cast<double>(pts.back().pool_size) - static_cast<double>(pts.front().pool_size);
  if (span <= 0.0) throw DataError("normalized AUC needs a positive pool-size span");
  return area / span;
}

void write_curve_csv(const MrrCurve& curve, std::ostream& out, bool extra_columns) {
  out << "pool_size,mrr_mean,mrr_std,repetitions" << (extra_columns ? ",map_mean,ndcg_mean" : "") << '\n';
  const auto flags = out.flags();
  const auto precision = out.precision(17);
  for (const auto& pt : curve.points) {
    out << pt.pool_size << ',' << pt.mrr_mean << ',' << pt.mrr_std << ',' << pt.repetitions;
    if (extra_columns) out << ',' << pt.map_mean << ',' << pt.ndcg_mean;
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace e4s
