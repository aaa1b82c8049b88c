#include "e4s/nli.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "e4s/error.hpp"
#include "e4s/text.hpp"

namespace e4s {

std::string_view to_string(NliLabel label) {
  switch (label) {
    case NliLabel::Entailment:
      return "entailment";
    case NliLabel::Neutral:
      return "neutral";
    case NliLabel::Contradiction:
      return "contradiction";
  }
  return "unknown";
}

std::optional<NliLabel> parse_nli_label(std::string_view s) {
  if (s == "entailment") return NliLabel::Entailment;
  if (s == "neutral") return NliLabel::Neutral;
  if (s == "contradiction") return NliLabel::Contradiction;
  return std::nullopt;
}

PairKey pair_key(const NliPair& pair) { return {text::text_key(pair.premise), text::text_key(pair.hypothesis)}; }

std::string to_string(const PairKey& key) { return key.premise_key + ":" + key.hypothesis_key; }

void PrecomputedNli::insert(const PairKey& key, ScoredLabel label) {
  auto [it, inserted] = records_.emplace(key, label);
  if (!inserted && !(it->second == label)) throw DataError("conflicting records for pair " + to_string(key));
}

std::optional<ScoredLabel> PrecomputedNli::lookup(const PairKey& key) const {
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<ScoredLabel> PrecomputedNli::classify(std::span<const NliPair> pairs) {
  std::vector<ScoredLabel> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const PairKey key = pair_key(p);
    auto hit = lookup(key);
    if (!hit) throw ProviderError("missing NLI record for pair " + to_string(key));
    out.push_back(*hit);
  }
  return out;
}

std::string PrecomputedNli::describe() const {
  return "precomputed:" + (source.empty() ? std::string("memory") : source) + " (" + std::to_string(size()) + " records)";
}

namespace {

// Parses one store line; returns an error message instead of throwing.
std::string parse_record(const std::string& line, PairKey& key, ScoredLabel& value) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) return "not valid JSON";
  if (!j.is_object()) return "record is not an object";
  for (const char* field : {"premise_key", "hypothesis_key", "label"}) {
    if (!j.contains(field) || !j[field].is_string()) return std::string("missing string field '") + field + "'";
  }
  if (!j.contains("confidence") || !j["confidence"].is_number()) return "missing numeric field 'confidence'";
  auto label = parse_nli_label(j["label"].get<std::string>());
  if (!label) return "unknown label '" + j["label"].get<std::string>() + "'";
  const double conf = j["confidence"].get<double>();
  if (!(conf >= 0.0 && conf <= 1.0)) return "confidence outside [0, 1]";
  key = {j["premise_key"].get<std::string>(), j["hypothesis_key"].get<std::string>()};
  value = {*label, conf};
  return {};
}

}  // namespace

PrecomputedNli read_precomputed_nli(std::istream& in, bool strict) {
  PrecomputedNli store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!text::has_content(line)) continue;
    PairKey key;
    ScoredLabel value;
    if (std::string err = parse_record(line, key, value); !err.empty()) {
      if (strict) throw DataError("line " + std::to_string(line_no) + ": " + err);
      store.diagnostics.push_back({line_no, err});
      continue;
    }
    // Conflicts are fatal in both modes: the store would be ambiguous.
    if (auto existing = store.lookup(key); existing && !(*existing == value)) {
      throw DataError("line " + std::to_string(line_no) + ": conflicting records for pair " + to_string(key));
    }
    store.insert(key, value);
  }
  return store;
}

PrecomputedNli load_precomputed_nli(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open NLI store '" + path + "'");
  PrecomputedNli store = read_precomputed_nli(in, strict);
  store.source = path;
  return store;
}

void write_precomputed_record(std::ostream& out, const PairKey& key, const ScoredLabel& label) {
  out << nlohmann::json{{"premise_key", key.premise_key},
                        {"hypothesis_key", key.hypothesis_key},
                        {"label", to_string(label.label)},
                        {"confidence", label.confidence}}
             .dump()
      << '\n';
}

std::vector<ScoredLabel> MockNli::classify(std::span<const NliPair> pairs) {
  ++calls_;
  std::vector<ScoredLabel> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (fixed_) {
      out.push_back(*fixed_);
      continue;
    }
    const std::string h = text::sha256_hex(to_string(pair_key(p)));
    const int b0 = std::stoi(h.substr(0, 2), nullptr, 16);
    const int b1 = std::stoi(h.substr(2, 2), nullptr, 16);
    NliLabel label = b0 < 40 ? NliLabel::Entailment : (b0 < 240 ? NliLabel::Neutral : NliLabel::Contradiction);
    out.push_back({label, 0.5 + 0.5 * b1 / 255.0});
  }
  return out;
}

std::string MockNli::describe() const {
  if (!fixed_) return "mock:hashed";
  return "mock:fixed:" + std::string(to_string(fixed_->label));
}

std::vector<ScoredLabel> CachedNli::classify(std::span<const NliPair> pairs) {
  std::vector<PairKey> keys;
  keys.reserve(pairs.size());
  for (const auto& p : pairs) keys.push_back(pair_key(p));

  std::vector<NliPair> missing;
  std::vector<const PairKey*> missing_keys;
  std::set<PairKey> queued;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!cache_.count(keys[i]) && queued.insert(keys[i]).second) {
        missing.push_back(pairs[i]);
        missing_keys.push_back(&keys[i]);
      }
    }
  }
  if (!missing.empty()) {
    auto fresh = inner_->classify(missing);
    if (fresh.size() != missing.size()) throw ProviderError("NLI provider returned a wrong number of results");
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < missing.size(); ++i) cache_.emplace(*missing_keys[i], fresh[i]);
  }
  std::vector<ScoredLabel> out;
  out.reserve(pairs.size());
  std::lock_guard lock(mu_);
  for (const auto& k : keys) out.push_back(cache_.at(k));
  return out;
}

std::size_t CachedNli::cached() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

}  // namespace e4s
