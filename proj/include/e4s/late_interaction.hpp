#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "e4s/corpus.hpp"

namespace e4s {

/// Token-level embeddings for one unit (a query or a document chunk). Rows are
/// stored contiguously, one unit-norm vector per token.
class TokenEmbeddingMatrix {
 public:
  static constexpr double kNormTolerance = 1e-6;

  TokenEmbeddingMatrix() = default;
  /// Throws DataError unless rows >= 1, data.size() == rows * dim and every row
  /// has L2 norm 1 within kNormTolerance.
  TokenEmbeddingMatrix(std::string unit_id, std::size_t dim, std::vector<float> data);

  const std::string& unit_id() const { return unit_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const TokenEmbeddingMatrix&) const = default;

 private:
  std::string unit_id_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// MaxSim: sum over query tokens of the best dot product against any doc token.
double late_interaction_score(const TokenEmbeddingMatrix& query, const TokenEmbeddingMatrix& doc);

/// Multi-chunk documents score as the best chunk.
double late_interaction_score(const TokenEmbeddingMatrix& query, std::span<const TokenEmbeddingMatrix* const> chunks);

struct LoadDiagnostic {
  std::size_t record = 0;
  std::string message;
};

/// Embeddings keyed by unit id, all with a shared dimension.
class EmbeddingStore {
 public:
  /// Throws DataError on a dimension mismatch or a conflicting duplicate id.
  void insert(TokenEmbeddingMatrix m);

  const TokenEmbeddingMatrix* find(const std::string& unit_id) const;
  /// Throws DataError naming the unit when absent.
  const TokenEmbeddingMatrix& at(const std::string& unit_id) const;

  std::size_t size() const { return units_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& unit_ids() const { return order_; }

  std::vector<LoadDiagnostic> diagnostics;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, TokenEmbeddingMatrix> units_;
  std::vector<std::string> order_;
};

/// Reads either the JSON-Lines text layout or the binary "E4SE" layout,
/// detected from the first four bytes. Lenient mode skips malformed units.
EmbeddingStore load_embeddings(const std::string& path, bool strict = true);
EmbeddingStore read_embeddings(std::istream& in, bool strict = true);

void write_embeddings_text(const EmbeddingStore& store, std::ostream& out);
void write_embeddings_binary(const EmbeddingStore& store, std::ostream& out);

/// Unit ids used for corpus-derived embeddings. The query unit of a persona is
/// "q:<conversation id>:<role>"; each turn is the chunk "c:<conversation id>:<turn index>".
std::string query_unit_id(const PersonaKey& key);
std::string chunk_unit_id(const std::string& conversation_id, std::size_t turn_index);

}  // namespace e4s
