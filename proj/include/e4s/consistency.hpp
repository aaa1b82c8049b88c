#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "e4s/corpus.hpp"
#include "e4s/sparse_index.hpp"

namespace e4s {

enum class PairTruth { Same, Different };

struct VerificationPair {
  std::string text_a;
  std::string text_b;
  PairTruth truth = PairTruth::Same;

  bool operator==(const VerificationPair&) const = default;
};

struct PairOptions {
  std::vector<SpeakerRole> roles{SpeakerRole::User1, SpeakerRole::User2};
  double train_ratio = 0.8;
};

struct PairSplit {
  std::vector<VerificationPair> train;
  std::vector<VerificationPair> test;
  std::size_t usable_personas = 0;
  std::vector<std::string> diagnostics;
};

/// Halves of a persona's sentence list: the first ceil(m/2) sentences and the
/// rest, each joined by single spaces.
std::pair<std::string, std::string> split_halves(const std::vector<std::string>& sentences);

/// Same-author pairs are the two halves of each persona's sentence-level text;
/// different-author pairs join halves of distinct personas, each half used at
/// most once per pairing pass. Classes are balanced exactly, then split
/// train/test per class. Personas with fewer than two sentences are skipped.
/// Throws DataError with fewer than two usable personas.
PairSplit build_pairs(const Corpus& corpus, const PairOptions& options, std::mt19937_64& rng);

struct CalibrationParams {
  double p1 = 0.5;
  double p2 = 0.5;

  bool operator==(const CalibrationParams&) const = default;
};

/// Piecewise-linear rescaling: [0, p1) -> [0, 0.49], [p1, p2] -> 0.5,
/// (p2, 1] -> (0.51, 1].
double calibrate_score(double cosine, const CalibrationParams& params);

struct PanMetrics {
  double f1 = 0.0;
  double auc = 0.0;
  double brier = 0.0;  // complement: 1 - mean squared error
  double c_at_1 = 0.0;
  double f05u = 0.0;
  double consistency = 0.0;  // mean of the five
  std::vector<std::string> warnings;
};

/// PAN verification metrics. Scores above 0.5 predict same-author, below 0.5
/// different-author, exactly 0.5 is a non-decision. Throws DataError on empty
/// or mismatched input.
PanMetrics pan_metrics(std::span<const double> scores, std::span<const PairTruth> truths);

struct VerifierOptions {
  int ngram = 4;
  std::size_t vocab_size = 4000;
  double grid_step = 0.01;  // thresholds range over [0.01, 0.99]
  std::size_t threads = 0;
};

struct ThresholdSearch {
  CalibrationParams params;
  double objective = 0.0;  // mean PAN metric on the searched data
};

/// Exhaustive search over p1 <= p2 on the grid, maximising the mean of the
/// five PAN metrics. Ties go to the smallest p1, then the smallest p2.
ThresholdSearch select_thresholds(std::span<const double> cosines, std::span<const PairTruth> truths,
                                  const VerifierOptions& options = {});

/// Character n-gram TF-IDF verifier with calibrated output.
class VerifierModel {
 public:
  VerifierModel(SparseIndex vectorizer, ThresholdSearch search)
      : vectorizer_(std::move(vectorizer)), search_(search) {}

  double cosine(const std::string& a, const std::string& b) const;
  double predict(const std::string& a, const std::string& b) const {
    return calibrate_score(cosine(a, b), search_.params);
  }

  const CalibrationParams& params() const { return search_.params; }
  double train_objective() const { return search_.objective; }
  std::size_t vocabulary_size() const { return vectorizer_.terms().size(); }
  const SparseIndex& vectorizer() const { return vectorizer_; }

 private:
  SparseIndex vectorizer_;
  ThresholdSearch search_;
};

/// Fits the vocabulary (top-k n-grams by corpus frequency over the distinct
/// training texts, ties lexicographic) and the thresholds. Throws DataError if
/// the training set lacks either class.
VerifierModel train_verifier(std::span<const VerificationPair> train, const VerifierOptions& options = {});

/// 1 - |sim - ref| / ref, unclamped. Throws DataError if ref <= 0.
double consistency_similarity(double sim_score, double ref_score);

struct ConsistencyOptions {
  PairOptions pairs;
  VerifierOptions verifier;
  std::uint64_t seed = 0;
};

struct ConsistencyResult {
  PanMetrics metrics;  // on the test split
  CalibrationParams params;
  double train_objective = 0.0;
  std::size_t vocabulary_size = 0;
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;
  std::size_t usable_personas = 0;
  std::vector<std::string> diagnostics;
  PairSplit pairs;
};

/// Pairs, verifier training and test-split metrics for one corpus.
ConsistencyResult evaluate_consistency(const Corpus& corpus, const ConsistencyOptions& options);

/// JSON-Lines {"a", "b", "truth": "same"|"different", "split": "train"|"test"}.
void write_pairs_jsonl(const PairSplit& pairs, std::ostream& out);
PairSplit read_pairs_jsonl(std::istream& in);

}  // namespace e4s
