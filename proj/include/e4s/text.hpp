#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace e4s::text {

/// NFC, outer trim, and internal whitespace runs collapsed to a single space.
/// This is the canonical form used for hashing and cache keys.
std::string normalize(std::string_view s);

/// Trims ASCII and Unicode whitespace from both ends.
std::string trim(std::string_view s);

/// True if the string holds at least one non-whitespace character.
bool has_content(std::string_view s);

/// True if any code point is a letter or digit.
bool has_alnum(std::string_view s);

/// Splits on `.`, `!` or `?` followed by whitespace or end of string. The
/// delimiter stays with the left fragment; empty fragments are dropped.
std::vector<std::string> split_sentences(std::string_view s);

/// Joins with single spaces.
std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

/// Lowercased runs of letters and digits.
std::vector<std::string> word_tokens(std::string_view s);

/// Character n-grams (over code points) of the lowercased, whitespace-collapsed
/// text. Spaces and punctuation are kept. Texts shorter than n yield nothing.
std::vector<std::string> char_ngrams(std::string_view s, int n);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of the normalized text; the key used by precomputed stores.
inline std::string text_key(std::string_view s) { return sha256_hex(normalize(s)); }

}  // namespace e4s::text
