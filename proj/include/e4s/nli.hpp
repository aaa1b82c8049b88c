#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace e4s {

enum class NliLabel { Entailment, Neutral, Contradiction };

std::string_view to_string(NliLabel label);
std::optional<NliLabel> parse_nli_label(std::string_view s);

struct ScoredLabel {
  NliLabel label = NliLabel::Neutral;
  double confidence = 0.0;  // in [0, 1]

  bool operator==(const ScoredLabel&) const = default;
};

struct NliPair {
  std::string premise;
  std::string hypothesis;
};

/// SHA-256 keys of the normalised premise and hypothesis texts.
struct PairKey {
  std::string premise_key;
  std::string hypothesis_key;

  auto operator<=>(const PairKey&) const = default;
};

PairKey pair_key(const NliPair& pair);
std::string to_string(const PairKey& key);

/// Labels premise/hypothesis pairs. Results come back in input order.
class NliProvider {
 public:
  virtual ~NliProvider() = default;
  virtual std::vector<ScoredLabel> classify(std::span<const NliPair> pairs) = 0;
  /// Short identity string recorded in reports.
  virtual std::string describe() const = 0;
};

/// Labels every pair from an in-memory store. A missing pair is a
/// ProviderError naming its key; there is no fallback label.
class PrecomputedNli final : public NliProvider {
 public:
  /// Throws DataError("conflicting records ...") if the key is already stored
  /// with a different label or confidence.
  void insert(const PairKey& key, ScoredLabel label);
  std::optional<ScoredLabel> lookup(const PairKey& key) const;
  std::size_t size() const { return records_.size(); }
  const std::map<PairKey, ScoredLabel>& records() const { return records_; }

  std::vector<ScoredLabel> classify(std::span<const NliPair> pairs) override;
  std::string describe() const override;

  struct Diagnostic {
    std::size_t line = 0;
    std::string message;
  };
  std::vector<Diagnostic> diagnostics;
  std::string source;

 private:
  std::map<PairKey, ScoredLabel> records_;
};

/// JSON-Lines records {"premise_key", "hypothesis_key", "label", "confidence"}.
/// Strict mode aborts on the first malformed line; lenient mode skips it.
PrecomputedNli read_precomputed_nli(std::istream& in, bool strict = true);
PrecomputedNli load_precomputed_nli(const std::string& path, bool strict = true);
void write_precomputed_record(std::ostream& out, const PairKey& key, const ScoredLabel& label);

/// Deterministic stand-in for a model. In fixed mode every pair gets the same
/// label; in hashed mode the label and confidence are derived from the pair key,
/// so different pairs get varied but reproducible labels.
class MockNli final : public NliProvider {
 public:
  static MockNli fixed(ScoredLabel label) { return MockNli(label); }
  static MockNli hashed() { return MockNli(std::nullopt); }

  std::vector<ScoredLabel> classify(std::span<const NliPair> pairs) override;
  std::string describe() const override;

  std::size_t calls() const { return calls_; }

 private:
  explicit MockNli(std::optional<ScoredLabel> fixed) : fixed_(fixed) {}
  std::optional<ScoredLabel> fixed_;
  std::size_t calls_ = 0;
};

/// Memoizes an inner provider by pair key. Safe for concurrent classify calls.
class CachedNli final : public NliProvider {
 public:
  explicit CachedNli(std::shared_ptr<NliProvider> inner) : inner_(std::move(inner)) {}

  std::vector<ScoredLabel> classify(std::span<const NliPair> pairs) override;
  std::string describe() const override { return inner_->describe(); }

  std::size_t cached() const;

 private:
  std::shared_ptr<NliProvider> inner_;
  mutable std::mutex mu_;
  std::map<PairKey, ScoredLabel> cache_;
};

inline std::vector<ScoredLabel> nli_classify(std::span<const NliPair> pairs, NliProvider& provider) {
  return provider.classify(pairs);
}

}  // namespace e4s
