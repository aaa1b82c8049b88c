#include "synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

namespace e4s::testing {
namespace {

const std::vector<std::string> kFiller{"well", "the", "you", "know", "really", "today", "that", "is", "so", "nice",
                                       "maybe", "we", "could", "talk", "more", "about", "it", "yes", "sure", "okay"};

std::string token(std::size_t conv, SpeakerRole role, std::size_t k) {
  static const char* syll[] = {"ka", "lo", "mi", "ru", "te", "zo", "pa", "ni", "qu", "ve"};
  std::string s;
  for (std::size_t x = conv * 2 + static_cast<std::size_t>(role) + 1; x > 0; x /= 10) s += syll[x % 10];
  return s + "x" + std::to_string(k);
}

std::vector<std::string> persona(std::size_t conv, SpeakerRole role, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back("I like " + token(conv, role, 2 * i) + " and " + token(conv, role, 2 * i + 1) + ".");
  }
  return out;
}

std::string filler(std::mt19937_64& rng, std::size_t words) {
  std::uniform_int_distribution<std::size_t> pick(0, kFiller.size() - 1);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) s += (i ? " " : "") + kFiller[pick(rng)];
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s + ".";
}

}  // namespace

const char* const kDisplayExample =
    "(**Alex** (male)) User 1 persona:\n"
    "    I like to dance at the club.\n"
    "    I run a dog obedience school.\n"
    "(**Emma** (female)) User 2 persona:\n"
    "    I love to meet new people.\n"
    "    I have a turtle named Timothy.\n"
    "\n"
    "**Alex** (male) : Hi, I'm Alex. What's your name?\n"
    "**Emma** (female) : Hi, I'm Emma. Nice to meet you.\n"
    "**Alex** (male) : What are you interested in?\n"
    "**Emma** (female): I enjoy meeting people and playing frisbee.\n";

Corpus synthetic_corpus(const SyntheticOptions& o) {
  std::mt19937_64 rng(o.seed);
  std::vector<std::size_t> owner(o.conversations);
  std::iota(owner.begin(), owner.end(), 0);
  if (o.shuffle_personas) {
    // A derangement by rotation keeps every persona away from its own text.
    std::rotate(owner.begin(), owner.begin() + 1, owner.end());
  }
  Corpus c;
  c.name = o.shuffle_personas ? "synthetic-shuffled" : "synthetic";
  for (std::size_t i = 0; i < o.conversations; ++i) {
    Conversation conv;
    conv.id = "conv-" + std::to_string(1000 + i);
    for (SpeakerRole r : kRoles) {
      conv.personas[r] = {r, persona(owner[i], r, o.persona_sentences)};
    }
    for (std::size_t t = 0; t < o.turns; ++t) {
      const SpeakerRole r = t % 2 == 0 ? SpeakerRole::User1 : SpeakerRole::User2;
      const auto own = persona(i, r, o.persona_sentences);
      std::string text = filler(rng, 4) + " " + own[(t / 2) % own.size()] + " " + filler(rng, 3);
      conv.turns.push_back({t, r, text});
    }
    c.conversations.push_back(std::move(conv));
  }
  return c;
}

std::string write_temp(const std::string& name, const std::string& contents) {
  const auto dir = std::filesystem::temp_directory_path() / "e4s-tests";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p, std::ios::binary) << contents;
  return p.string();
}

}  // namespace e4s::testing
