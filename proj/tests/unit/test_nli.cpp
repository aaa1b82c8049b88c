#include <doctest.h>

#include <set>

#include <sstream>

#include "e4s/error.hpp"
#include "e4s/nli.hpp"
#include "e4s/text.hpp"

using namespace e4s;

namespace {

std::string record(const NliPair& p, const char* label, double conf) {
  std::ostringstream out;
  write_precomputed_record(out, pair_key(p), {*parse_nli_label(label), conf});
  return out.str();
}

}  // namespace

TEST_CASE("precomputed store echoes stored records") {
  const NliPair p{"I have a dog.", "My dog is called Rex."};
  std::istringstream in(record(p, "neutral", 0.88));
  auto store = read_precomputed_nli(in);
  CHECK(store.size() == 1);
  const auto out = store.classify(std::vector<NliPair>{p});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == ScoredLabel{NliLabel::Neutral, 0.88});
  // Keys are over normalized text.
  CHECK(store.lookup(pair_key({"I  have a dog. ", "My dog is called Rex."})).has_value());
}

TEST_CASE("missing pair names its key") {
  PrecomputedNli store;
  const NliPair p{"a", "b"};
  try {
    store.classify(std::vector<NliPair>{p});
    FAIL("expected a provider error");
  } catch (const ProviderError& e) {
    CHECK(std::string(e.what()).find(to_string(pair_key(p))) != std::string::npos);
  }
  CHECK(store.classify(std::vector<NliPair>{}).empty());
}

TEST_CASE("store loading rules") {
  std::string many;
  for (int i = 0; i < 100; ++i) many += record({"p" + std::to_string(i), "h"}, "entailment", 0.9);
  std::istringstream in(many);
  CHECK(read_precomputed_nli(in).size() == 100);

  std::istringstream empty("");
  CHECK(read_precomputed_nli(empty).size() == 0);

  const NliPair p{"x", "y"};
  std::istringstream conflict(record(p, "neutral", 0.5) + record(p, "contradiction", 0.5));
  CHECK_THROWS_WITH_AS(read_precomputed_nli(conflict), doctest::Contains("conflicting records"), DataError);
  std::istringstream dup(record(p, "neutral", 0.5) + record(p, "neutral", 0.5));
  CHECK(read_precomputed_nli(dup).size() == 1);

  const std::string bad = "{\"premise_key\":\"a\"}\n" + record(p, "neutral", 0.5);
  std::istringstream strict(bad);
  CHECK_THROWS_AS(read_precomputed_nli(strict), DataError);
  std::istringstream lenient(bad);
  const auto s = read_precomputed_nli(lenient, false);
  CHECK(s.size() == 1);
  CHECK(s.diagnostics.size() == 1);

  std::istringstream range("{\"premise_key\":\"a\",\"hypothesis_key\":\"b\",\"label\":\"neutral\",\"confidence\":1.5}\n");
  CHECK_THROWS_AS(read_precomputed_nli(range), DataError);
}

TEST_CASE("batch order and caching are transparent") {
  const std::vector<NliPair> pairs{{"a", "b"}, {"c", "d"}, {"e", "f"}, {"a", "b"}};
  auto plain = MockNli::hashed();
  const auto direct = plain.classify(pairs);
  CHECK(direct.size() == 4);
  CHECK(direct[0] == direct[3]);

  auto inner = std::make_shared<MockNli>(MockNli::hashed());
  CachedNli cached(inner);
  CHECK(cached.classify(pairs) == direct);
  CHECK(cached.classify(pairs) == direct);
  CHECK(cached.cached() == 3);
  CHECK(inner->calls() == 1);

  auto fixed = MockNli::fixed({NliLabel::Neutral, 1.0});
  for (const auto& l : fixed.classify(pairs)) CHECK(l == ScoredLabel{NliLabel::Neutral, 1.0});
}

TEST_CASE("hashed mock varies labels and stays in range") {
  auto mock = MockNli::hashed();
  std::vector<NliPair> pairs;
  for (int i = 0; i < 300; ++i) pairs.push_back({"premise " + std::to_string(i), "hypothesis"});
  std::set<NliLabel> seen;
  for (const auto& l : mock.classify(pairs)) {
    seen.insert(l.label);
    CHECK(l.confidence >= 0.5);
    CHECK(l.confidence <= 1.0);
  }
  CHECK(seen.size() == 3);
}
