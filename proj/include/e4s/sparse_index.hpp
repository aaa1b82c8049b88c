#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace e4s {

enum class SparseScheme { TfidfWord, TfidfChar, Bm25 };

std::string_view to_string(SparseScheme scheme);
std::optional<SparseScheme> parse_sparse_scheme(std::string_view s);

struct SparseOptions {
  int char_ngram = 4;            // n for TfidfChar
  std::size_t max_features = 0;  // 0 keeps every term
  double k1 = 1.2;
  double b = 0.75;
};

struct SparseDoc {
  std::string id;
  std::string text;
};

/// (term id, weight) pairs sorted by term id.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

double dot(const SparseVector& a, const SparseVector& b);

struct ScoredDoc {
  std::string id;
  double score = 0.0;
};

/// Immutable lexical index over a fixed document list.
///
/// TF-IDF schemes weight raw term counts by ln((1+N)/(1+df)) + 1 and
/// L2-normalise each document, so scores are cosines in [0, 1]. BM25 keeps raw
/// counts and document lengths and scores with idf ln(1 + (N-df+0.5)/(df+0.5)).
class SparseIndex {
 public:
  /// Throws DataError for an empty document list or when no document yields
  /// a single term.
  static SparseIndex build(std::span<const SparseDoc> docs, SparseScheme scheme, SparseOptions options = {});

  SparseScheme scheme() const { return scheme_; }
  const SparseOptions& options() const { return options_; }
  std::size_t size() const { return doc_ids_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  /// Terms in first-occurrence order; the position is the term id.
  const std::vector<std::string>& terms() const { return terms_; }
  std::optional<std::uint32_t> term_id(std::string_view term) const;
  double idf(std::uint32_t term) const { return idf_[term]; }
  std::uint32_t document_frequency(std::uint32_t term) const { return df_[term]; }

  /// TF-IDF: the normalised weight vector. BM25: raw term counts.
  const SparseVector& doc_vector(std::size_t doc) const { return doc_vectors_[doc]; }
  std::size_t doc_length(std::size_t doc) const { return doc_lengths_[doc]; }

  /// Analyzer output for a text under this index's scheme.
  std::vector<std::string> analyze(std::string_view text) const;

  /// Query-side vector: normalised TF-IDF weights, or raw counts for BM25.
  /// Out-of-vocabulary terms are dropped.
  SparseVector vectorize(std::string_view text) const;

  /// Score of `query` against every document, aligned with doc_ids().
  std::vector<double> score_all(std::string_view query) const;

 private:
  SparseScheme scheme_ = SparseScheme::TfidfWord;
  SparseOptions options_;
  std::vector<std::string> doc_ids_;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> vocab_;
  std::vector<double> idf_;
  std::vector<std::uint32_t> df_;
  std::vector<SparseVector> doc_vectors_;
  std::vector<std::size_t> doc_lengths_;
  double avg_length_ = 0.0;
  // term id -> (doc, weight or count)
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;
};

/// Complete ranking, descending score, ties by ascending document id.
std::vector<ScoredDoc> score_sparse(const SparseIndex& index, std::string_view query);

}  // namespace e4s
