#include "e4s/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "e4s/error.hpp"
#include "e4s/text.hpp"

namespace e4s {
namespace {

using nlohmann::json;

// Raised for a single malformed record; strict mode rethrows it as DataError.
struct RecordError {
  std::string message;
};

void check_conversation(const Conversation& c) {
  if (c.id.empty()) throw RecordError{"missing conversation id"};
  if (c.personas.size() != 2) throw RecordError{"expected exactly 2 personas"};
  for (const auto& [role, profile] : c.personas) {
    if (profile.sentences.empty()) throw RecordError{"empty persona for " + std::string(to_string(role))};
    for (const auto& s : profile.sentences) {
      if (!text::has_content(s)) throw RecordError{"blank persona sentence"};
    }
  }
  if (c.turns.empty()) throw RecordError{"empty turn list"};
  for (const auto& t : c.turns) {
    if (!text::has_content(t.text)) throw RecordError{"blank utterance at turn " + std::to_string(t.index)};
  }
}

Conversation conversation_from_json(const json& j) {
  if (!j.is_object()) throw RecordError{"record is not a JSON object"};
  Conversation c;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) throw RecordError{"missing conversation id"};
  c.id = id->get<std::string>();

  auto personas = j.find("personas");
  if (personas == j.end() || !personas->is_object()) throw RecordError{"missing personas object"};
  for (const auto& [key, value] : personas->items()) {
    auto role = parse_role(key);
    if (!role) throw RecordError{"unknown persona role '" + key + "'"};
    if (!value.is_array()) throw RecordError{"persona '" + key + "' is not a list"};
    PersonaProfile profile{*role, {}};
    for (const auto& s : value) {
      if (!s.is_string()) throw RecordError{"persona sentence is not a string"};
      profile.sentences.push_back(s.get<std::string>());
    }
    c.personas[*role] = std::move(profile);
  }

  auto turns = j.find("turns");
  if (turns == j.end() || !turns->is_array()) throw RecordError{"missing turns list"};
  for (const auto& t : *turns) {
    if (!t.is_object()) throw RecordError{"turn is not an object"};
    auto sp = t.find("speaker");
    auto tx = t.find("text");
    if (sp == t.end() || !sp->is_string() || tx == t.end() || !tx->is_string()) {
      throw RecordError{"turn needs string 'speaker' and 'text'"};
    }
    auto role = parse_role(sp->get<std::string>());
    if (!role) throw RecordError{"unknown speaker '" + sp->get<std::string>() + "'"};
    c.turns.push_back(Turn{c.turns.size(), *role, tx->get<std::string>()});
  }
  check_conversation(c);
  return c;
}

// Drops parenthesised icons and markup and keeps the alphanumeric words.
std::string clean_name(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char ch : raw) {
    if (ch == '*') continue;
    s += (ch == '(' || ch == ')') ? ' ' : ch;
  }
  std::istringstream words(s);
  std::vector<std::string> kept;
  for (std::string w; words >> w;) {
    if (text::has_alnum(w)) kept.push_back(w);
  }
  return text::join(kept);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Conversation conversation_from_block(const std::vector<std::string>& lines, std::size_t block_no) {
  static const std::regex header(R"(^(.*?)\bUser\s*([12])\s+persona\s*:\s*$)", std::regex::icase);
  Conversation c;
  c.id = "block-" + std::to_string(block_no);
  std::unordered_map<std::string, SpeakerRole> names;
  std::optional<SpeakerRole> open_persona;

  for (const auto& raw : lines) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = text::trim(line);
    if (trimmed.empty()) {
      open_persona.reset();
      continue;
    }
    if (trimmed.rfind("#", 0) == 0) {
      static const std::regex id_line(R"(^#\s*id\s*:\s*(.+)$)", std::regex::icase);
      std::smatch m;
      if (std::regex_match(trimmed, m, id_line)) c.id = text::trim(m[1].str());
      continue;
    }
    std::smatch m;
    if (std::regex_match(trimmed, m, header)) {
      SpeakerRole role = m[2].str() == "1" ? SpeakerRole::User1 : SpeakerRole::User2;
      if (c.personas.count(role)) throw RecordError{"duplicate persona header for " + std::string(to_string(role))};
      c.personas[role] = PersonaProfile{role, {}};
      std::string name = clean_name(m[1].str());
      if (!name.empty()) names[lower(name)] = role;
      open_persona = role;
      continue;
    }
    bool indented = !line.empty() && (line[0] == ' ' || line[0] == '\t');
    if (open_persona && indented) {
      c.personas[*open_persona].sentences.push_back(trimmed);
      continue;
    }
    open_persona.reset();
    auto colon = trimmed.find(':');
    if (colon == std::string::npos) throw RecordError{"unrecognised line: " + trimmed};
    std::string who = lower(clean_name(trimmed.substr(0, colon)));
    std::string utterance = text::trim(trimmed.substr(colon + 1));
    std::optional<SpeakerRole> role;
    if (auto it = names.find(who); it != names.end()) {
      role = it->second;
    } else {
      std::string compact;
      for (char ch : who) {
        if (ch != ' ') compact += ch;
      }
      role = parse_role(compact);
    }
    if (!role) throw RecordError{"utterance by unknown speaker '" + who + "'"};
    c.turns.push_back(Turn{c.turns.size(), *role, utterance});
  }
  check_conversation(c);
  return c;
}

void add_conversation(ParseResult& result, std::unordered_set<std::string>& seen, Conversation c,
                      std::size_t record, bool strict) {
  if (!seen.insert(c.id).second) {
    std::string msg = "duplicate id '" + c.id + "'";
    if (strict) throw DataError("record " + std::to_string(record) + ": " + msg);
    result.diagnostics.push_back({record, msg});
    return;
  }
  result.corpus.conversations.push_back(std::move(c));
}

void handle_record_error(ParseResult& result, const RecordError& e, std::size_t record, bool strict) {
  if (strict) throw DataError("record " + std::to_string(record) + ": " + e.message);
  result.diagnostics.push_back({record, e.message});
}

}  // namespace

std::string_view to_string(SpeakerRole role) { return role == SpeakerRole::User1 ? "user1" : "user2"; }

std::optional<SpeakerRole> parse_role(std::string_view s) {
  std::string l = lower(std::string(s));
  if (l == "user1" || l == "1") return SpeakerRole::User1;
  if (l == "user2" || l == "2") return SpeakerRole::User2;
  return std::nullopt;
}

std::string to_string(const PersonaKey& key) { return key.conversation_id + "/" + std::string(to_string(key.role)); }

const std::vector<std::string>& Conversation::persona(SpeakerRole role) const {
  static const std::vector<std::string> kEmpty;
  auto it = personas.find(role);
  return it == personas.end() ? kEmpty : it->second.sentences;
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  for (std::size_t i = 0; i < conversations.size(); ++i) {
    if (conversations[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<CorpusFormat> parse_format(std::string_view s) {
  if (s == "canonical-jsonl" || s == "jsonl") return CorpusFormat::CanonicalJsonl;
  if (s == "plain-text-blocks" || s == "text") return CorpusFormat::PlainTextBlocks;
  return std::nullopt;
}

CorpusFormat guess_format(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : lower(path.substr(dot));
  return (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? CorpusFormat::CanonicalJsonl
                                                                 : CorpusFormat::PlainTextBlocks;
}

ParseResult parse_corpus(std::istream& in, const ParseOptions& options) {
  if (!in) throw DataError("corpus stream is not readable");
  ParseResult result;
  result.corpus.name = options.name;
  std::unordered_set<std::string> seen;

  if (options.format == CorpusFormat::CanonicalJsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!text::has_content(line)) continue;
      try {
        json j;
        try {
          j = json::parse(line);
        } catch (const json::parse_error& e) {
          throw RecordError{std::string("invalid JSON: ") + e.what()};
        }
        add_conversation(result, seen, conversation_from_json(j), line_no, options.strict);
      } catch (const RecordError& e) {
        handle_record_error(result, e, line_no, options.strict);
      }
    }
    if (in.bad()) throw DataError("error while reading corpus stream");
  } else {
    std::vector<std::vector<std::string>> blocks(1);
    for (std::string line; std::getline(in, line);) {
      if (text::trim(line) == "---") {
        blocks.emplace_back();
      } else {
        blocks.back().push_back(line);
      }
    }
    if (in.bad()) throw DataError("error while reading corpus stream");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      bool blank = std::all_of(blocks[b].begin(), blocks[b].end(), [](const std::string& l) { return !text::has_content(l); });
      if (blank) continue;
      try {
        add_conversation(result, seen, conversation_from_block(blocks[b], b + 1), b + 1, options.strict);
      } catch (const RecordError& e) {
        handle_record_error(result, e, b + 1, options.strict);
      }
    }
  }

  if (result.corpus.conversations.empty()) throw DataError("zero valid conversations");
  return result;
}

ParseResult parse_corpus_file(const std::string& path, ParseOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  if (options.name.empty()) {
    auto slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.rfind('.');
    options.name = dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
  }
  return parse_corpus(in, options);
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& c : corpus.conversations) {
    json j;
    j["id"] = c.id;
    json personas = json::object();
    for (const auto& [role, profile] : c.personas) personas[std::string(to_string(role))] = profile.sentences;
    j["personas"] = std::move(personas);
    json turns = json::array();
    for (const auto& t : c.turns) turns.push_back({{"speaker", to_string(t.speaker)}, {"text", t.text}});
    j["turns"] = std::move(turns);
    out << j.dump() << '\n';
  }
}

ValidationReport validate(const Corpus& corpus) {
  ValidationReport report;
  report.conversations = corpus.conversations.size();
  if (corpus.conversations.empty()) report.errors.push_back("corpus has no conversations");
  std::unordered_set<std::string> ids;
  for (const auto& c : corpus.conversations) {
    const std::string where = "conversation '" + c.id + "': ";
    if (!ids.insert(c.id).second) report.errors.push_back(where + "duplicate id");
    try {
      check_conversation(c);
    } catch (const RecordError& e) {
      report.errors.push_back(where + e.message);
    }
    report.turns += c.turns.size();
    for (const auto& [role, profile] : c.personas) {
      report.persona_sentences += profile.sentences.size();
      if (profile.speaker_role != role) report.errors.push_back(where + "persona role mismatch");
    }
    std::array<std::size_t, 2> spoken{0, 0};
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
      const Turn& t = c.turns[i];
      if (t.index != i) report.errors.push_back(where + "turn index " + std::to_string(t.index) + " at position " + std::to_string(i));
      if (!c.personas.count(t.speaker)) report.errors.push_back(where + "speaker without persona at turn " + std::to_string(i));
      ++spoken[static_cast<std::size_t>(t.speaker)];
    }
    for (SpeakerRole role : kRoles) {
      if (spoken[static_cast<std::size_t>(role)] == 0 && c.personas.count(role)) {
        report.warnings.push_back(where + std::string(to_string(role)) + " speaker has no utterances");
      }
    }
  }
  return report;
}

std::vector<std::string> speaker_text(const Conversation& conversation, SpeakerRole role, Granularity granularity) {
  std::vector<std::string> units;
  for (const auto& t : conversation.turns) {
    if (t.speaker != role) continue;
    if (granularity == Granularity::PerSentence) {
      auto sentences = text::split_sentences(t.text);
      units.insert(units.end(), std::make_move_iterator(sentences.begin()), std::make_move_iterator(sentences.end()));
    } else {
      units.push_back(t.text);
    }
  }
  if (granularity == Granularity::Concatenated) {
    if (units.empty()) return {};
    return {text::join(units)};
  }
  return units;
}

RelevanceMap build_relevance(const Corpus& corpus, SpeakerRole evaluated_role, bool merge_identical) {
  RelevanceMap map;
  std::map<std::vector<std::string>, std::size_t> by_profile;
  for (const auto& c : corpus.conversations) {
    map.universe.push_back(c.id);
    const auto& sentences = c.persona(evaluated_role);
    if (merge_identical) {
      auto [it, inserted] = by_profile.try_emplace(sentences, map.entries.size());
      if (!inserted) {
        map.entries[it->second].relevant.insert(c.id);
        continue;
      }
    }
    map.entries.push_back(RelevanceEntry{PersonaKey{c.id, evaluated_role}, sentences, {c.id}});
  }
  return map;
}

}  // namespace e4s
