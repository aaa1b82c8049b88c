#include <doctest.h>

#include <cmath>
#include <sstream>

#include "e4s/error.hpp"
#include "e4s/late_interaction.hpp"

using namespace e4s;

namespace {

TokenEmbeddingMatrix unit(std::string id, std::vector<std::vector<float>> rows) {
  std::vector<float> data;
  const std::size_t dim = rows.front().size();
  for (auto& r : rows) {
    double n = 0;
    for (float x : r) n += static_cast<double>(x) * x;
    for (float x : r) data.push_back(static_cast<float>(x / std::sqrt(n)));
  }
  return TokenEmbeddingMatrix(std::move(id), dim, std::move(data));
}

}  // namespace

TEST_CASE("maxsim examples") {
  const auto q = unit("q", {{1, 0, 0}, {0, 1, 0}});
  CHECK(late_interaction_score(q, q) == doctest::Approx(2.0));
  CHECK(late_interaction_score(unit("a", {{1, 0}}), unit("b", {{0, 1}})) == 0.0);

  // Query token e1; doc tokens with dot products 0.2 and 0.9 against it.
  const auto one = unit("q", {{1, 0}});
  const auto doc = unit("d", {{0.2f, std::sqrt(1 - 0.04f)}, {0.9f, std::sqrt(1 - 0.81f)}});
  CHECK(late_interaction_score(one, doc) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(late_interaction_score(one, doc) <= 1.0 + 1e-6);

  const auto exact = unit("e", {{0, 1}, {1, 0}});
  const TokenEmbeddingMatrix* chunks[] = {&doc, &exact};
  CHECK(late_interaction_score(one, std::span<const TokenEmbeddingMatrix* const>(chunks)) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(late_interaction_score(one, std::span<const TokenEmbeddingMatrix* const>()) == 0.0);
  CHECK_THROWS_AS(late_interaction_score(one, q), DataError);
}

TEST_CASE("matrix invariants") {
  CHECK_THROWS_AS(TokenEmbeddingMatrix("x", 2, {1.0f, 1.0f}), DataError);
  CHECK_THROWS_AS(TokenEmbeddingMatrix("x", 2, {}), DataError);
}

TEST_CASE("embedding files round-trip in both layouts") {
  EmbeddingStore store;
  store.insert(unit("q:c1:user2", {{1, 2, 3}}));
  store.insert(unit("c:c1:0", {{1, 0, 0}, {0, 0, 1}}));
  for (bool binary : {false, true}) {
    std::stringstream buf;
    binary ? write_embeddings_binary(store, buf) : write_embeddings_text(store, buf);
    const auto back = read_embeddings(buf);
    REQUIRE(back.size() == 2);
    CHECK(back.dim() == 3);
    CHECK(back.at("c:c1:0").rows() == 2);
    CHECK(back.at("q:c1:user2") == store.at("q:c1:user2"));
  }
  CHECK_THROWS_AS(store.at("missing"), DataError);
  CHECK_THROWS_AS(store.insert(unit("c:c1:0", {{0, 1, 0}})), DataError);
  CHECK_THROWS_AS(store.insert(unit("other", {{1, 0}})), DataError);
}

TEST_CASE("lenient embedding load skips malformed units") {
  std::istringstream in(
      "{\"unit_id\":\"a\",\"dim\":2,\"rows\":1}\n1 0\n"
      "{\"unit_id\":\"b\",\"dim\":2,\"rows\":1}\n3 4\n"
      "{\"unit_id\":\"c\",\"dim\":2,\"rows\":1}\n0 1\n");
  CHECK_THROWS_AS(read_embeddings(in), DataError);
  in.clear();
  in.seekg(0);
  const auto s = read_embeddings(in, false);
  CHECK(s.size() == 2);
  CHECK(s.diagnostics.size() == 1);
}

TEST_CASE("unit ids") {
  CHECK(query_unit_id({"c7", SpeakerRole::User2}) == "q:c7:user2");
  CHECK(chunk_unit_id("c7", 3) == "c:c7:3");
}
