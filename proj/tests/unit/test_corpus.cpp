#include <doctest.h>

#include <sstream>

#include "e4s/corpus.hpp"
#include "e4s/error.hpp"
#include "synthetic.hpp"

using namespace e4s;

namespace {

ParseResult parse(const std::string& s, CorpusFormat f = CorpusFormat::CanonicalJsonl, bool strict = true) {
  std::istringstream in(s);
  return parse_corpus(in, {f, strict, "t"});
}

const char* kLine =
    R"({"id":"c1","personas":{"user1":["I ski."],"user2":["I read."]},"turns":[{"speaker":"user1","text":"Hi."},{"speaker":"user2","text":"Hello."}]})";

}  // namespace

TEST_CASE("display example parses into four turns and two personas") {
  const auto r = parse(testing::kDisplayExample, CorpusFormat::PlainTextBlocks);
  REQUIRE(r.corpus.conversations.size() == 1);
  const auto& c = r.corpus.conversations[0];
  CHECK(c.turns.size() == 4);
  CHECK(c.persona(SpeakerRole::User1).size() == 2);
  CHECK(c.persona(SpeakerRole::User2).size() == 2);
  CHECK(c.turns[1].speaker == SpeakerRole::User2);
  CHECK(c.turns[3].text == "I enjoy meeting people and playing frisbee.");

  CHECK(speaker_text(c, SpeakerRole::User2, Granularity::PerUtterance) ==
        std::vector<std::string>{"Hi, I'm Emma. Nice to meet you.", "I enjoy meeting people and playing frisbee."});
  CHECK(speaker_text(c, SpeakerRole::User2, Granularity::Concatenated) ==
        std::vector<std::string>{"Hi, I'm Emma. Nice to meet you. I enjoy meeting people and playing frisbee."});
  CHECK(speaker_text(c, SpeakerRole::User2, Granularity::PerSentence).front() == "Hi, I'm Emma.");
}

TEST_CASE("text blocks split on --- and accept id lines") {
  std::string two = std::string("# id: first\n") + testing::kDisplayExample + "---\n" + testing::kDisplayExample;
  const auto r = parse(two, CorpusFormat::PlainTextBlocks);
  REQUIRE(r.corpus.conversations.size() == 2);
  CHECK(r.corpus.conversations[0].id == "first");
  CHECK(r.corpus.conversations[1].id == "block-2");
}

TEST_CASE("parse errors") {
  CHECK_THROWS_WITH_AS(parse(""), "zero valid conversations", DataError);
  const std::string empty_turns =
      R"({"id":"x","personas":{"user1":["a"],"user2":["b"]},"turns":[]})";
  CHECK_THROWS_AS(parse(empty_turns), DataError);
  const auto lenient = parse(empty_turns + "\n" + kLine, CorpusFormat::CanonicalJsonl, false);
  CHECK(lenient.corpus.conversations.size() == 1);
  REQUIRE(lenient.diagnostics.size() == 1);
  CHECK(lenient.diagnostics[0].record == 1);
  CHECK(lenient.diagnostics[0].message == "empty turn list");

  const std::string one_persona = R"({"id":"y","personas":{"user1":["a"]},"turns":[{"speaker":"user1","text":"x"}]})";
  CHECK_THROWS_AS(parse(one_persona), DataError);
  CHECK_THROWS_AS(parse(std::string(kLine) + "\n" + kLine), DataError);
  CHECK(parse(std::string(kLine) + "\n" + kLine, CorpusFormat::CanonicalJsonl, false).diagnostics.size() == 1);
  CHECK_THROWS_AS(parse("{not json"), DataError);
}

TEST_CASE("canonical round trip is identity") {
  const auto corpus = testing::synthetic_corpus({.conversations = 5});
  std::ostringstream out;
  write_jsonl(corpus, out);
  auto back = parse(out.str()).corpus;
  back.name = corpus.name;
  CHECK(back == corpus);
  for (const auto& c : corpus.conversations) {
    CHECK(speaker_text(c, SpeakerRole::User1, Granularity::PerUtterance).size() +
              speaker_text(c, SpeakerRole::User2, Granularity::PerUtterance).size() ==
          c.turns.size());
  }
}

TEST_CASE("validate reports counts, warnings and duplicates") {
  auto corpus = parse(kLine).corpus;
  auto rep = validate(corpus);
  CHECK(rep.ok());
  CHECK(rep.warnings.empty());
  CHECK(rep.conversations == 1);
  CHECK(rep.turns == 2);
  CHECK(rep.persona_sentences == 2);

  auto silent = corpus;
  silent.conversations[0].turns.pop_back();
  rep = validate(silent);
  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].find("speaker has no utterances") != std::string::npos);
  CHECK(speaker_text(silent.conversations[0], SpeakerRole::User2, Granularity::Concatenated).empty());

  auto dup = corpus;
  dup.conversations.push_back(dup.conversations[0]);
  rep = validate(dup);
  REQUIRE(rep.errors.size() == 1);
  CHECK(rep.errors[0].find("duplicate id") != std::string::npos);
}

TEST_CASE("relevance map with and without merging") {
  const auto three = testing::synthetic_corpus({.conversations = 3});
  const auto rel = build_relevance(three, SpeakerRole::User2);
  CHECK(rel.entries.size() == 3);
  for (const auto& e : rel.entries) CHECK(e.relevant.size() == 1);

  auto twin = testing::synthetic_corpus({.conversations = 2});
  twin.conversations[1].personas[SpeakerRole::User2] = twin.conversations[0].personas[SpeakerRole::User2];
  CHECK(build_relevance(twin, SpeakerRole::User2, false).entries.size() == 2);
  const auto merged = build_relevance(twin, SpeakerRole::User2, true);
  REQUIRE(merged.entries.size() == 1);
  CHECK(merged.entries[0].relevant.size() == 2);
}
