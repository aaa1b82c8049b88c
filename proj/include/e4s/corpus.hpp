#pragma once

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace e4s {

enum class SpeakerRole { User1 = 0, User2 = 1 };

inline constexpr std::array<SpeakerRole, 2> kRoles{SpeakerRole::User1, SpeakerRole::User2};

/// "user1" / "user2"; the spelling used by every file format.
std::string_view to_string(SpeakerRole role);
std::optional<SpeakerRole> parse_role(std::string_view s);

struct PersonaProfile {
  SpeakerRole speaker_role = SpeakerRole::User1;
  std::vector<std::string> sentences;

  bool operator==(const PersonaProfile&) const = default;
};

struct Turn {
  std::size_t index = 0;
  SpeakerRole speaker = SpeakerRole::User1;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string id;
  std::map<SpeakerRole, PersonaProfile> personas;
  std::vector<Turn> turns;

  bool operator==(const Conversation&) const = default;

  /// Persona sentences for `role`; empty if the role has no profile.
  const std::vector<std::string>& persona(SpeakerRole role) const;
};

/// A parsed corpus. The struct itself does not enforce its invariants so that
/// hand-built values can be checked with validate(); parse_corpus() only ever
/// returns corpora that satisfy them.
struct Corpus {
  std::string name;
  std::vector<Conversation> conversations;

  bool operator==(const Corpus&) const = default;

  /// Position of the conversation with `id`, if present.
  std::optional<std::size_t> find(std::string_view id) const;
};

enum class CorpusFormat { CanonicalJsonl, PlainTextBlocks };

std::optional<CorpusFormat> parse_format(std::string_view s);

struct Diagnostic {
  std::size_t record = 0;  // 1-based line (jsonl) or block (text) number
  std::string message;
};

struct ParseOptions {
  CorpusFormat format = CorpusFormat::CanonicalJsonl;
  bool strict = true;
  std::string name;
};

struct ParseResult {
  Corpus corpus;
  std::vector<Diagnostic> diagnostics;
};

/// Parses a corpus. Strict mode throws DataError on the first malformed record;
/// lenient mode skips it and records a diagnostic. Zero valid conversations is
/// always an error.
ParseResult parse_corpus(std::istream& in, const ParseOptions& options);
ParseResult parse_corpus_file(const std::string& path, ParseOptions options);

/// Picks the format from the extension: .jsonl/.json are canonical, anything
/// else is plain-text blocks.
CorpusFormat guess_format(const std::string& path);

/// Canonical JSON-Lines, one conversation per line.
void write_jsonl(const Corpus& corpus, std::ostream& out);

struct ValidationReport {
  std::size_t conversations = 0;
  std::size_t turns = 0;
  std::size_t persona_sentences = 0;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

ValidationReport validate(const Corpus& corpus);

enum class Granularity { Concatenated, PerUtterance, PerSentence };

/// Text spoken by `role` in turn order, at the requested granularity.
std::vector<std::string> speaker_text(const Conversation& conversation, SpeakerRole role,
                                      Granularity granularity);

/// Identifies a persona by the conversation it comes from and the speaker role.
struct PersonaKey {
  std::string conversation_id;
  SpeakerRole role = SpeakerRole::User1;

  auto operator<=>(const PersonaKey&) const = default;
};

std::string to_string(const PersonaKey& key);

struct RelevanceEntry {
  PersonaKey key;                       // representative persona (first occurrence)
  std::vector<std::string> sentences;   // the persona profile used as query
  std::set<std::string> relevant;       // conversation ids
};

/// Persona -> relevant conversations, in corpus order of first occurrence.
struct RelevanceMap {
  std::vector<RelevanceEntry> entries;
  std::vector<std::string> universe;  // every conversation id, corpus order
};

/// One entry per (conversation, evaluated role). With `merge_identical`,
/// byte-identical profiles across conversations collapse into one entry whose
/// relevant set is the union.
RelevanceMap build_relevance(const Corpus& corpus, SpeakerRole evaluated_role,
                             bool merge_identical = false);

}  // namespace e4s
