#include "e4s/naturalness.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "e4s/error.hpp"
#include "e4s/text.hpp"

namespace e4s {
namespace {

using json = nlohmann::json;

bool is_contradiction(const ScoredLabel& l, double threshold) {
  return l.label == NliLabel::Contradiction && l.confidence >= threshold;
}

const ScoredLabel& labelled(const NliPairRecord& r) {
  if (!r.result) {
    throw DataError("unlabelled NLI pair in " + r.conversation_id + " (" + std::string(to_string(r.kind)) + ")");
  }
  return *r.result;
}

}  // namespace

void NaturalnessConfig::check() const {
  if (!(contradiction_threshold > 0.0 && contradiction_threshold < 1.0)) {
    throw ConfigError("contradiction threshold must be in (0, 1)");
  }
  if (history_window < 1) throw ConfigError("history window must be at least 1");
  for (double w : {w_cs, w_pcr, w_scr}) {
    if (!(w >= 0.0)) throw ConfigError("naturalness weights must be non-negative");
  }
  if (std::abs(w_cs + w_pcr + w_scr - 1.0) > 1e-9) throw ConfigError("naturalness weights must sum to 1");
}

std::string_view to_string(PairKind kind) {
  switch (kind) {
    case PairKind::Turn: return "turn";
    case PairKind::Persona: return "persona";
    case PairKind::History: return "history";
  }
  return "turn";
}

std::optional<PairKind> parse_pair_kind(std::string_view s) {
  if (s == "turn") return PairKind::Turn;
  if (s == "persona") return PairKind::Persona;
  if (s == "history") return PairKind::History;
  return std::nullopt;
}

std::vector<NliPairRecord> enumerate_pairs(const Conversation& c, const NaturalnessConfig& config) {
  std::vector<NliPairRecord> out;
  const auto& turns = c.turns;
  for (std::size_t t = 1; t < turns.size(); ++t) {
    out.push_back({c.id, PairKind::Turn, turns[t].speaker, t - 1, t, {turns[t - 1].text, turns[t].text}, {}});
  }
  for (std::size_t t = 0; t < turns.size(); ++t) {
    const auto& persona = c.persona(turns[t].speaker);
    for (std::size_t i = 0; i < persona.size(); ++i) {
      out.push_back({c.id, PairKind::Persona, turns[t].speaker, i, t, {persona[i], turns[t].text}, {}});
    }
  }
  for (SpeakerRole role : kRoles) {
    std::vector<std::size_t> own;
    for (std::size_t t = 0; t < turns.size(); ++t) {
      if (turns[t].speaker != role) continue;
      const std::size_t from = own.size() > config.history_window ? own.size() - config.history_window : 0;
      for (std::size_t j = from; j < own.size(); ++j) {
        out.push_back({c.id, PairKind::History, role, own[j], t, {turns[own[j]].text, turns[t].text}, {}});
      }
      own.push_back(t);
    }
  }
  return out;
}

double coherence_score(std::span<const ScoredLabel> labels, const NaturalnessConfig& config) {
  if (labels.empty()) throw DataError("coherence score: no consecutive turn pairs");
  double sum = 0.0;
  for (const auto& l : labels) {
    switch (l.label) {
      case NliLabel::Entailment: sum += config.cs_entailment; break;
      case NliLabel::Neutral: sum += config.cs_neutral; break;
      case NliLabel::Contradiction: sum += config.cs_contradiction; break;
    }
  }
  return sum / static_cast<double>(labels.size());
}

double contradiction_rate(std::span<const ScoredLabel> labels, double threshold) {
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& l : labels) hits += is_contradiction(l, threshold);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

LabelDistribution label_distribution(std::span<const ScoredLabel> labels) {
  if (labels.empty()) throw DataError("label distribution: no consecutive turn pairs");
  std::size_t e = 0, n = 0, c = 0;
  for (const auto& l : labels) {
    switch (l.label) {
      case NliLabel::Entailment: ++e; break;
      case NliLabel::Neutral: ++n; break;
      case NliLabel::Contradiction: ++c; break;
    }
  }
  const double total = static_cast<double>(labels.size());
  return {static_cast<double>(e) / total, static_cast<double>(n) / total, static_cast<double>(c) / total};
}

double naturalness_score(double cs, double pcr, double scr, const NaturalnessConfig& config) {
  return config.w_cs * cs + config.w_pcr * (1.0 - pcr) + config.w_scr * (1.0 - scr);
}

double naturalness_similarity(double sim, double ref) {
  if (!(ref > 0.0)) throw DataError("similarity needs a positive reference score");
  return 1.0 - std::abs(sim - ref) / ref;
}

NaturalnessReport naturalness_from_records(std::span<const NliPairRecord> records, const NaturalnessConfig& config) {
  std::vector<ScoredLabel> turn, persona, history;
  for (const auto& r : records) {
    const ScoredLabel& l = labelled(r);
    switch (r.kind) {
      case PairKind::Turn: turn.push_back(l); break;
      case PairKind::Persona: persona.push_back(l); break;
      case PairKind::History: history.push_back(l); break;
    }
  }
  NaturalnessReport rep;
  rep.cs = coherence_score(turn, config);
  const auto dist = label_distribution(turn);
  rep.er = dist.er;
  rep.nr = dist.nr;
  rep.cr = dist.cr;
  rep.pcr = contradiction_rate(persona, config.contradiction_threshold);
  rep.scr = contradiction_rate(history, config.contradiction_threshold);
  rep.naturalness = naturalness_score(rep.cs, rep.pcr, rep.scr, config);
  rep.turn_pairs = turn.size();
  rep.persona_pairs = persona.size();
  rep.history_pairs = history.size();
  for (const auto& l : turn) {
    switch (l.label) {
      case NliLabel::Entailment: ++rep.entailments; break;
      case NliLabel::Neutral: ++rep.neutrals; break;
      case NliLabel::Contradiction: ++rep.contradictions; break;
    }
  }
  return rep;
}

NaturalnessResult evaluate_naturalness(const Corpus& corpus, NliProvider& provider, const NaturalnessConfig& config) {
  config.check();
  NaturalnessResult out;
  for (const auto& c : corpus.conversations) {
    auto pairs = enumerate_pairs(c, config);
    out.records.insert(out.records.end(), std::make_move_iterator(pairs.begin()),
                       std::make_move_iterator(pairs.end()));
  }
  std::vector<NliPair> pairs;
  pairs.reserve(out.records.size());
  for (const auto& r : out.records) pairs.push_back(r.texts);
  auto labels = provider.classify(pairs);
  if (labels.size() != pairs.size()) {
    throw ProviderError("NLI provider returned " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(pairs.size()) + " pairs");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) out.records[i].result = labels[i];
  out.report = naturalness_from_records(out.records, config);
  return out;
}

std::vector<NliPair> unique_nli_pairs(const Corpus& corpus, const NaturalnessConfig& config) {
  std::vector<NliPair> out;
  std::set<PairKey> seen;
  for (const auto& c : corpus.conversations) {
    for (auto& r : enumerate_pairs(c, config)) {
      if (seen.insert(pair_key(r.texts)).second) out.push_back(std::move(r.texts));
    }
  }
  return out;
}

void write_pair_labels(std::span<const NliPairRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    const ScoredLabel& l = labelled(r);
    const PairKey key = pair_key(r.texts);
    json j{{"conversation", r.conversation_id},
           {"kind", to_string(r.kind)},
           {"speaker", to_string(r.speaker)},
           {"premise_ref", r.premise_ref},
           {"hypothesis_ref", r.hypothesis_ref},
           {"premise_key", key.premise_key},
           {"hypothesis_key", key.hypothesis_key},
           {"label", to_string(l.label)},
           {"confidence", l.confidence}};
    out << j.dump() << '\n';
  }
}

std::vector<NliPairRecord> read_pair_labels(std::istream& in) {
  std::vector<NliPairRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!text::has_content(line)) continue;
    const std::string where = "pair labels line " + std::to_string(lineno) + ": ";
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError(where + "not a JSON object");
    try {
      NliPairRecord r;
      r.conversation_id = j.at("conversation").get<std::string>();
      auto kind = parse_pair_kind(j.at("kind").get<std::string>());
      auto speaker = parse_role(j.at("speaker").get<std::string>());
      auto label = parse_nli_label(j.at("label").get<std::string>());
      if (!kind || !speaker || !label) throw DataError(where + "bad kind, speaker or label");
      r.kind = *kind;
      r.speaker = *speaker;
      r.premise_ref = j.at("premise_ref").get<std::size_t>();
      r.hypothesis_ref = j.at("hypothesis_ref").get<std::size_t>();
      r.result = ScoredLabel{*label, j.at("confidence").get<double>()};
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    }
  }
  return out;
}

}  // namespace e4s
