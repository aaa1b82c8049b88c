#include "e4s/late_interaction.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "e4s/error.hpp"

namespace e4s {
namespace {

constexpr char kMagic[4] = {'E', '4', 'S', 'E'};

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated embedding file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }

EmbeddingStore read_binary(std::istream& in, bool strict) {
  EmbeddingStore store;
  const std::uint32_t dim = read_u32(in);
  if (dim == 0) throw DataError("embedding file declares dim 0");
  std::size_t record = 0;
  while (in.peek() != std::char_traits<char>::eof()) {
    ++record;
    const std::uint32_t id_len = read_u32(in);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) throw DataError("truncated embedding unit id");
    const std::uint32_t rows = read_u32(in);
    std::vector<float> data(static_cast<std::size_t>(rows) * dim);
    for (auto& x : data) x = read_f32(in);
    try {
      store.insert(TokenEmbeddingMatrix(std::move(id), dim, std::move(data)));
    } catch (const DataError& e) {
      if (strict) throw;
      store.diagnostics.push_back({record, e.what()});
    }
  }
  return store;
}

EmbeddingStore read_text(std::istream& in, bool strict) {
  EmbeddingStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t header_line = line_no;
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError("embedding header at line " + std::to_string(line_no) + " is not JSON");
    }
    if (!header.is_object() || !header.contains("unit_id") || !header.contains("dim") || !header.contains("rows")) {
      throw DataError("embedding header at line " + std::to_string(line_no) + " needs unit_id, dim, rows");
    }
    const auto id = header["unit_id"].get<std::string>();
    const auto dim = header["dim"].get<std::size_t>();
    const auto rows = header["rows"].get<std::size_t>();
    std::vector<float> data;
    data.reserve(rows * dim);
    std::string row_error;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw DataError("unit '" + id + "' is truncated");
      ++line_no;
      std::istringstream ss(line);
      std::size_t count = 0;
      for (double x; ss >> x; ++count) data.push_back(static_cast<float>(x));
      if (!ss.eof() || count != dim) row_error = "row " + std::to_string(r) + " of unit '" + id + "' does not hold " + std::to_string(dim) + " floats";
    }
    try {
      if (!row_error.empty()) throw DataError(row_error);
      store.insert(TokenEmbeddingMatrix(id, dim, std::move(data)));
    } catch (const DataError& e) {
      if (strict) throw DataError("line " + std::to_string(header_line) + ": " + e.what());
      store.diagnostics.push_back({header_line, e.what()});
    }
  }
  return store;
}

}  // namespace

TokenEmbeddingMatrix::TokenEmbeddingMatrix(std::string unit_id, std::size_t dim, std::vector<float> data)
    : unit_id_(std::move(unit_id)), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.empty()) throw DataError("unit '" + unit_id_ + "' has no token rows");
  if (data_.size() % dim_ != 0) throw DataError("unit '" + unit_id_ + "' data is not a multiple of dim");
  for (std::size_t r = 0; r < rows(); ++r) {
    double sq = 0.0;
    for (float x : row(r)) sq += static_cast<double>(x) * x;
    if (std::abs(std::sqrt(sq) - 1.0) > kNormTolerance) {
      throw DataError("unit '" + unit_id_ + "' row " + std::to_string(r) + " is not unit-normalized");
    }
  }
}

double late_interaction_score(const TokenEmbeddingMatrix& query, const TokenEmbeddingMatrix& doc) {
  if (query.dim() != doc.dim()) {
    throw DataError("embedding dim mismatch: query " + std::to_string(query.dim()) + " vs doc " + std::to_string(doc.dim()));
  }
  const std::size_t dim = query.dim();
  double total = 0.0;
  for (std::size_t q = 0; q < query.rows(); ++q) {
    const float* qp = query.row(q).data();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < doc.rows(); ++d) {
      const float* dp = doc.row(d).data();
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += static_cast<double>(qp[k]) * dp[k];
      best = std::max(best, s);
    }
    total += best;
  }
  return total;
}

double late_interaction_score(const TokenEmbeddingMatrix& query, std::span<const TokenEmbeddingMatrix* const> chunks) {
  if (chunks.empty()) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto* chunk : chunks) best = std::max(best, late_interaction_score(query, *chunk));
  return best;
}

void EmbeddingStore::insert(TokenEmbeddingMatrix m) {
  if (dim_ == 0) dim_ = m.dim();
  if (m.dim() != dim_) {
    throw DataError("unit '" + m.unit_id() + "' has dim " + std::to_string(m.dim()) + ", store has " + std::to_string(dim_));
  }
  auto it = units_.find(m.unit_id());
  if (it != units_.end()) {
    if (it->second == m) return;
    throw DataError("conflicting records for unit '" + m.unit_id() + "'");
  }
  order_.push_back(m.unit_id());
  units_.emplace(m.unit_id(), std::move(m));
}

const TokenEmbeddingMatrix* EmbeddingStore::find(const std::string& unit_id) const {
  auto it = units_.find(unit_id);
  return it == units_.end() ? nullptr : &it->second;
}

const TokenEmbeddingMatrix& EmbeddingStore::at(const std::string& unit_id) const {
  if (const auto* m = find(unit_id)) return *m;
  throw DataError("embedding store has no unit '" + unit_id + "'");
}

EmbeddingStore read_embeddings(std::istream& in, bool strict) {
  char head[4] = {};
  in.read(head, 4);
  if (in.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0) return read_binary(in, strict);
  in.clear();
  in.seekg(0);
  return read_text(in, strict);
}

EmbeddingStore load_embeddings(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file '" + path + "'");
  return read_embeddings(in, strict);
}

void write_embeddings_text(const EmbeddingStore& store, std::ostream& out) {
  out.precision(9);
  for (const auto& id : store.unit_ids()) {
    const auto& m = store.at(id);
    out << nlohmann::json{{"unit_id", id}, {"dim", m.dim()}, {"rows", m.rows()}}.dump() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k];
      out << '\n';
    }
  }
}

void write_embeddings_binary(const EmbeddingStore& store, std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(store.dim()));
  for (const auto& id : store.unit_ids()) {
    const auto& m = store.at(id);
    write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    for (float x : m.data()) write_u32(out, std::bit_cast<std::uint32_t>(x));
  }
}

std::string query_unit_id(const PersonaKey& key) {
  return "q:" + key.conversation_id + ":" + std::string(to_string(key.role));
}

std::string chunk_unit_id(const std::string& conversation_id, std::size_t turn_index) {
  return "c:" + conversation_id + ":" + std::to_string(turn_index);
}

}  // namespace e4s
