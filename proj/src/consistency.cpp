#include "e4s/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "e4s/error.hpp"
#include "e4s/parallel.hpp"
#include "e4s/text.hpp"

namespace e4s {
namespace {

using json = nlohmann::json;

struct Half {
  std::size_t owner;
  std::string text;
};

// Index-based shuffle so results do not depend on the standard library's
// std::shuffle implementation.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

std::vector<VerificationPair> different_pairs(const std::vector<Half>& halves, std::size_t wanted,
                                              std::mt19937_64& rng) {
  std::vector<VerificationPair> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::size_t> order(halves.size());
  // Each pass uses every half at most once. Later passes only top up what
  // earlier ones could not pair.
  for (int epoch = 0; epoch < 16 && out.size() < wanted; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, rng);
    std::vector<std::size_t> pending;
    for (std::size_t h : order) {
      if (out.size() == wanted) break;
      auto match = std::find_if(pending.begin(), pending.end(), [&](std::size_t q) {
        return halves[q].owner != halves[h].owner && !seen.contains({std::min(q, h), std::max(q, h)});
      });
      if (match == pending.end()) {
        pending.push_back(h);
        continue;
      }
      std::size_t q = *match;
      pending.erase(match);
      seen.insert({std::min(q, h), std::max(q, h)});
      out.push_back({halves[q].text, halves[h].text, PairTruth::Different});
    }
  }
  return out;
}

void split_class(std::vector<VerificationPair> pairs, double ratio, std::mt19937_64& rng, PairSplit& out) {
  shuffle_in_place(pairs, rng);
  const std::size_t n = pairs.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.train : out.test).push_back(std::move(pairs[i]));
  }
}

double pair_label(PairTruth t) { return t == PairTruth::Same ? 1.0 : 0.0; }

// Metrics for scores already sorted ascending.
PanMetrics sorted_pan_metrics(std::span<const double> s, std::span<const PairTruth> y) {
  const std::size_t n = s.size();
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, nu = 0, pos = 0;
  double sq = 0.0;
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < n && s[j] == s[i]) {
      group_pos += y[j] == PairTruth::Same;
      ++j;
    }
    // Ranks i+1..j share their average.
    pos_rank_sum += static_cast<double>(group_pos) * (static_cast<double>(i + 1 + j) / 2.0);
    pos += group_pos;
    for (std::size_t k = i; k < j; ++k) {
      const bool same = y[k] == PairTruth::Same;
      const double d = s[k] - pair_label(y[k]);
      sq += d * d;
      if (s[k] > 0.5) {
        same ? ++tp : ++fp;
      } else if (s[k] < 0.5) {
        same ? ++fn : ++tn;
      } else {
        ++nu;
      }
    }
    i = j;
  }

  PanMetrics m;
  const std::size_t neg = n - pos;
  if (tp + fp + tn + fn == 0) m.warnings.push_back("f1 undefined: no decided pairs");
  const std::size_t f1_den = 2 * tp + fp + fn;
  m.f1 = f1_den == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(f1_den);
  if (pos == 0 || neg == 0) {
    m.warnings.push_back("auc undefined: single-class truths");
    m.auc = 0.5;
  } else {
    const double p = static_cast<double>(pos);
    m.auc = (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
  }
  m.brier = 1.0 - sq / static_cast<double>(n);
  const std::size_t nc = tp + tn;
  m.c_at_1 = static_cast<double>(nc * n + nu * nc) / static_cast<double>(n * n);
  const double f05_den = 1.25 * static_cast<double>(tp) + 0.25 * static_cast<double>(fn + nu) + static_cast<double>(fp);
  m.f05u = f05_den == 0.0 ? 0.0 : 1.25 * static_cast<double>(tp) / f05_den;
  m.consistency = (m.f1 + m.auc + m.brier + m.c_at_1 + m.f05u) / 5.0;
  return m;
}

void check_input(std::span<const double> scores, std::span<const PairTruth> truths) {
  if (scores.empty()) throw DataError("pan metrics: empty input");
  if (scores.size() != truths.size()) throw DataError("pan metrics: scores and truths differ in length");
}

std::string_view truth_name(PairTruth t) { return t == PairTruth::Same ? "same" : "different"; }

}  // namespace

std::pair<std::string, std::string> split_halves(const std::vector<std::string>& sentences) {
  const std::size_t left = (sentences.size() + 1) / 2;
  std::vector<std::string> a(sentences.begin(), sentences.begin() + static_cast<std::ptrdiff_t>(left));
  std::vector<std::string> b(sentences.begin() + static_cast<std::ptrdiff_t>(left), sentences.end());
  return {text::join(a), text::join(b)};
}

PairSplit build_pairs(const Corpus& corpus, const PairOptions& options, std::mt19937_64& rng) {
  if (!(options.train_ratio > 0.0 && options.train_ratio < 1.0)) throw ConfigError("train ratio must be in (0, 1)");
  if (options.roles.empty()) throw ConfigError("no evaluated roles for consistency pairs");
  PairSplit out;
  std::vector<VerificationPair> same;
  std::vector<Half> halves;
  for (const auto& c : corpus.conversations) {
    for (SpeakerRole role : options.roles) {
      auto sentences = speaker_text(c, role, Granularity::PerSentence);
      if (sentences.size() < 2) {
        out.diagnostics.push_back(to_string(PersonaKey{c.id, role}) + ": skipped, " +
                                  std::to_string(sentences.size()) + " sentence(s)");
        continue;
      }
      auto [a, b] = split_halves(sentences);
      const std::size_t owner = same.size();
      halves.push_back({owner, a});
      halves.push_back({owner, b});
      same.push_back({std::move(a), std::move(b), PairTruth::Same});
    }
  }
  out.usable_personas = same.size();
  if (same.size() < 2) throw DataError("fewer than 2 usable personas for consistency pairs");

  auto diff = different_pairs(halves, same.size(), rng);
  if (diff.size() < same.size()) {
    out.diagnostics.push_back("dropped " + std::to_string(same.size() - diff.size()) +
                              " same-author pairs to balance classes");
    shuffle_in_place(same, rng);
    same.resize(diff.size());
  }
  split_class(std::move(same), options.train_ratio, rng, out);
  split_class(std::move(diff), options.train_ratio, rng, out);
  return out;
}

double calibrate_score(double s, const CalibrationParams& p) {
  s = std::clamp(s, 0.0, 1.0);
  double r;
  if (s < p.p1) {
    r = 0.49 * s / p.p1;
  } else if (s <= p.p2) {
    r = 0.5;
  } else {
    r = 0.51 + 0.49 * (s - p.p2) / (1.0 - p.p2);
  }
  return std::clamp(r, 0.0, 1.0);
}

PanMetrics pan_metrics(std::span<const double> scores, std::span<const PairTruth> truths) {
  check_input(scores, truths);
  if (std::is_sorted(scores.begin(), scores.end())) return sorted_pan_metrics(scores, truths);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> s;
  std::vector<PairTruth> y;
  s.reserve(order.size());
  y.reserve(order.size());
  for (std::size_t i : order) {
    s.push_back(scores[i]);
    y.push_back(truths[i]);
  }
  return sorted_pan_metrics(s, y);
}

ThresholdSearch select_thresholds(std::span<const double> cosines, std::span<const PairTruth> truths,
                                  const VerifierOptions& options) {
  check_input(cosines, truths);
  const long stride = std::lround(options.grid_step * 100.0);
  if (stride < 1 || std::abs(static_cast<double>(stride) - options.grid_step * 100.0) > 1e-9) {
    throw ConfigError("grid step must be a positive multiple of 0.01");
  }
  std::vector<double> grid;
  for (long i = 1; i <= 99; i += stride) grid.push_back(static_cast<double>(i) / 100.0);

  // Calibration is monotone, so scores stay sorted in cosine order.
  std::vector<std::size_t> order(cosines.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cosines[a] < cosines[b]; });
  std::vector<double> c;
  std::vector<PairTruth> y;
  for (std::size_t i : order) {
    c.push_back(std::clamp(cosines[i], 0.0, 1.0));
    y.push_back(truths[i]);
  }

  std::vector<ThresholdSearch> row_best(grid.size());
  parallel_for(grid.size(), options.threads, [&](std::size_t r) {
    std::vector<double> s(c.size());
    ThresholdSearch best{{grid[r], grid[r]}, -1.0};
    for (std::size_t q = r; q < grid.size(); ++q) {
      const CalibrationParams p{grid[r], grid[q]};
      for (std::size_t i = 0; i < c.size(); ++i) s[i] = calibrate_score(c[i], p);
      const double obj = sorted_pan_metrics(s, y).consistency;
      if (obj > best.objective) best = {p, obj};
    }
    row_best[r] = best;
  });
  ThresholdSearch best = row_best.front();
  for (const auto& r : row_best) {
    if (r.objective > best.objective) best = r;
  }
  return best;
}

double VerifierModel::cosine(const std::string& a, const std::string& b) const {
  return std::clamp(dot(vectorizer_.vectorize(a), vectorizer_.vectorize(b)), 0.0, 1.0);
}

VerifierModel train_verifier(std::span<const VerificationPair> train, const VerifierOptions& options) {
  if (options.ngram < 1) throw ConfigError("verifier n-gram size must be positive");
  if (options.vocab_size == 0) throw ConfigError("verifier vocabulary size must be positive");
  bool has_same = false, has_diff = false;
  for (const auto& p : train) (p.truth == PairTruth::Same ? has_same : has_diff) = true;
  if (!has_same || !has_diff) throw DataError("verifier training set needs both classes");

  std::vector<SparseDoc> docs;
  std::unordered_set<std::string> seen;
  for (const auto& p : train) {
    for (const std::string* t : {&p.text_a, &p.text_b}) {
      if (seen.insert(*t).second) docs.push_back({std::to_string(docs.size()), *t});
    }
  }
  SparseOptions sopt;
  sopt.char_ngram = options.ngram;
  sopt.max_features = options.vocab_size;
  SparseIndex vectorizer = SparseIndex::build(docs, SparseScheme::TfidfChar, sopt);

  std::vector<SparseVector> vecs(docs.size());
  parallel_for(docs.size(), options.threads, [&](std::size_t i) { vecs[i] = vectorizer.doc_vector(i); });
  std::unordered_map<std::string_view, std::size_t> slot;
  for (std::size_t i = 0; i < docs.size(); ++i) slot.emplace(docs[i].text, i);

  std::vector<double> cos(train.size());
  std::vector<PairTruth> truth(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    cos[i] = std::clamp(dot(vecs[slot.at(train[i].text_a)], vecs[slot.at(train[i].text_b)]), 0.0, 1.0);
    truth[i] = train[i].truth;
  }
  return VerifierModel(std::move(vectorizer), select_thresholds(cos, truth, options));
}

double consistency_similarity(double sim_score, double ref_score) {
  if (!(ref_score > 0.0)) throw DataError("similarity needs a positive reference score");
  return 1.0 - std::abs(sim_score - ref_score) / ref_score;
}

ConsistencyResult evaluate_consistency(const Corpus& corpus, const ConsistencyOptions& options) {
  std::mt19937_64 rng(options.seed);
  ConsistencyResult r;
  r.pairs = build_pairs(corpus, options.pairs, rng);
  if (r.pairs.test.empty()) throw DataError("consistency test split is empty");
  VerifierModel model = train_verifier(r.pairs.train, options.verifier);

  std::vector<double> scores(r.pairs.test.size());
  std::vector<PairTruth> truths(r.pairs.test.size());
  parallel_for(scores.size(), options.verifier.threads, [&](std::size_t i) {
    scores[i] = model.predict(r.pairs.test[i].text_a, r.pairs.test[i].text_b);
  });
  for (std::size_t i = 0; i < truths.size(); ++i) truths[i] = r.pairs.test[i].truth;

  r.metrics = pan_metrics(scores, truths);
  r.params = model.params();
  r.train_objective = model.train_objective();
  r.vocabulary_size = model.vocabulary_size();
  r.train_pairs = r.pairs.train.size();
  r.test_pairs = r.pairs.test.size();
  r.usable_personas = r.pairs.usable_personas;
  r.diagnostics = r.pairs.diagnostics;
  for (const auto& w : r.metrics.warnings) r.diagnostics.push_back(w);
  return r;
}

void write_pairs_jsonl(const PairSplit& pairs, std::ostream& out) {
  auto emit = [&](const std::vector<VerificationPair>& v, const char* split) {
    for (const auto& p : v) {
      json j{{"a", p.text_a}, {"b", p.text_b}, {"truth", truth_name(p.truth)}, {"split", split}};
      out << j.dump() << '\n';
    }
  };
  emit(pairs.train, "train");
  emit(pairs.test, "test");
}

PairSplit read_pairs_jsonl(std::istream& in) {
  PairSplit out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!text::has_content(line)) continue;
    const std::string where = "pairs line " + std::to_string(lineno) + ": ";
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError(where + "not a JSON object");
    try {
      VerificationPair p;
      p.text_a = j.at("a").get<std::string>();
      p.text_b = j.at("b").get<std::string>();
      const auto truth = j.at("truth").get<std::string>();
      const auto split = j.at("split").get<std::string>();
      if (truth == "same") {
        p.truth = PairTruth::Same;
      } else if (truth == "different") {
        p.truth = PairTruth::Different;
      } else {
        throw DataError(where + "unknown truth \"" + truth + "\"");
      }
      if (!text::has_content(p.text_a) || !text::has_content(p.text_b)) throw DataError(where + "empty text");
      if (split == "train") {
        out.train.push_back(std::move(p));
      } else if (split == "test") {
        out.test.push_back(std::move(p));
      } else {
        throw DataError(where + "unknown split \"" + split + "\"");
      }
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    }
  }
  return out;
}

}  // namespace e4s
