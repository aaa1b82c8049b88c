#include "e4s/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "e4s/error.hpp"
#include "e4s/text.hpp"

namespace e4s {
namespace {

// Counts terms into (id, count) pairs sorted by id.
SparseVector count_terms(const std::vector<std::string>& tokens,
                         const std::unordered_map<std::string, std::uint32_t>& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& t : tokens) {
    if (auto it = vocab.find(t); it != vocab.end()) counts[it->second] += 1.0;
  }
  return {counts.begin(), counts.end()};
}

void l2_normalize(SparseVector& v) {
  double sq = 0.0;
  for (const auto& [_, w] : v) sq += w * w;
  if (sq <= 0.0) return;
  const double norm = std::sqrt(sq);
  for (auto& [_, w] : v) w /= norm;
}

}  // namespace

std::string_view to_string(SparseScheme scheme) {
  switch (scheme) {
    case SparseScheme::TfidfWord:
      return "tfidf-word";
    case SparseScheme::TfidfChar:
      return "tfidf-char";
    case SparseScheme::Bm25:
      return "bm25";
  }
  return "unknown";
}

std::optional<SparseScheme> parse_sparse_scheme(std::string_view s) {
  if (s == "tfidf-word" || s == "tfidf") return SparseScheme::TfidfWord;
  if (s == "tfidf-char") return SparseScheme::TfidfChar;
  if (s == "bm25") return SparseScheme::Bm25;
  return std::nullopt;
}

double dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      sum += i->second * j->second;
      ++i;
      ++j;
    }
  }
  return sum;
}

std::vector<std::string> SparseIndex::analyze(std::string_view text) const {
  return scheme_ == SparseScheme::TfidfChar ? text::char_ngrams(text, options_.char_ngram) : text::word_tokens(text);
}

SparseIndex SparseIndex::build(std::span<const SparseDoc> docs, SparseScheme scheme, SparseOptions options) {
  if (docs.empty()) throw DataError("cannot build a sparse index over zero documents");
  SparseIndex index;
  index.scheme_ = scheme;
  index.options_ = options;

  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(docs.size());
  for (const auto& d : docs) {
    index.doc_ids_.push_back(d.id);
    tokenized.push_back(index.analyze(d.text));
  }

  // First-occurrence order and corpus frequencies.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> total;
  for (const auto& toks : tokenized) {
    for (const auto& t : toks) {
      auto [it, inserted] = total.try_emplace(t, 0);
      if (inserted) order.push_back(t);
      ++it->second;
    }
  }
  if (order.empty()) throw DataError("all documents are empty after analysis");

  if (options.max_features > 0 && order.size() > options.max_features) {
    std::vector<std::string> ranked = order;
    std::sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
      const auto ca = total.at(a);
      const auto cb = total.at(b);
      return ca != cb ? ca > cb : a < b;
    });
    ranked.resize(options.max_features);
    std::unordered_map<std::string, bool> keep;
    for (auto& t : ranked) keep.emplace(std::move(t), true);
    std::erase_if(order, [&](const std::string& t) { return !keep.count(t); });
  }
  for (auto& t : order) {
    index.vocab_.emplace(t, static_cast<std::uint32_t>(index.terms_.size()));
    index.terms_.push_back(std::move(t));
  }

  const std::size_t n_terms = index.terms_.size();
  index.df_.assign(n_terms, 0);
  std::vector<SparseVector> counts;
  counts.reserve(docs.size());
  std::size_t total_length = 0;
  for (const auto& toks : tokenized) {
    counts.push_back(count_terms(toks, index.vocab_));
    for (const auto& [term, _] : counts.back()) ++index.df_[term];
    index.doc_lengths_.push_back(toks.size());
    total_length += toks.size();
  }
  const double n_docs = static_cast<double>(docs.size());
  index.avg_length_ = static_cast<double>(total_length) / n_docs;

  index.idf_.resize(n_terms);
  for (std::size_t t = 0; t < n_terms; ++t) {
    const double df = index.df_[t];
    index.idf_[t] = scheme == SparseScheme::Bm25 ? std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
                                                 : std::log((1.0 + n_docs) / (1.0 + df)) + 1.0;
  }

  index.postings_.assign(n_terms, {});
  for (std::size_t d = 0; d < counts.size(); ++d) {
    SparseVector v = std::move(counts[d]);
    if (scheme != SparseScheme::Bm25) {
      for (auto& [term, w] : v) w *= index.idf_[term];
      l2_normalize(v);
    }
    for (const auto& [term, w] : v) index.postings_[term].emplace_back(static_cast<std::uint32_t>(d), w);
    index.doc_vectors_.push_back(std::move(v));
  }
  return index;
}

std::optional<std::uint32_t> SparseIndex::term_id(std::string_view term) const {
  auto it = vocab_.find(std::string(term));
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

SparseVector SparseIndex::vectorize(std::string_view text) const {
  SparseVector v = count_terms(analyze(text), vocab_);
  if (scheme_ != SparseScheme::Bm25) {
    for (auto& [term, w] : v) w *= idf_[term];
    l2_normalize(v);
  }
  return v;
}

std::vector<double> SparseIndex::score_all(std::string_view query) const {
  std::vector<double> scores(doc_ids_.size(), 0.0);
  const SparseVector q = vectorize(query);
  if (scheme_ == SparseScheme::Bm25) {
    const double k1 = options_.k1;
    const double b = options_.b;
    for (const auto& [term, _] : q) {
      const double idf = idf_[term];
      for (const auto& [doc, tf] : postings_[term]) {
        const double len_norm = avg_length_ > 0 ? static_cast<double>(doc_lengths_[doc]) / avg_length_ : 0.0;
        scores[doc] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_norm));
      }
    }
  } else {
    for (const auto& [term, qw] : q) {
      for (const auto& [doc, dw] : postings_[term]) scores[doc] += qw * dw;
    }
  }
  return scores;
}

std::vector<ScoredDoc> score_sparse(const SparseIndex& index, std::string_view query) {
  const auto scores = index.score_all(query);
  std::vector<ScoredDoc> ranked;
  ranked.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) ranked.push_back({index.doc_ids()[i], scores[i]});
  std::sort(ranked.begin(), ranked.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return ranked;
}

}  // namespace e4s
