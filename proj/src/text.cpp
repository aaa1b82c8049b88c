#include "e4s/text.hpp"

#include <openssl/evp.h>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include <array>
#include <cstdio>

#include "e4s/error.hpp"

namespace e4s::text {
namespace {

std::string to_utf8(const icu::UnicodeString& u) {
  std::string out;
  u.toUTF8String(out);
  return out;
}

icu::UnicodeString nfc(std::string_view s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorKind::Data, "ICU NFC normalizer unavailable");
  icu::UnicodeString out = norm->normalize(u, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  return out;
}

// Collapses whitespace runs and trims, working on code points.
std::vector<UChar32> collapsed_code_points(const icu::UnicodeString& u) {
  std::vector<UChar32> cps;
  cps.reserve(static_cast<size_t>(u.length()));
  bool pending_space = false;
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    UChar32 c = u.char32At(i);
    if (u_isUWhiteSpace(c)) {
      pending_space = !cps.empty();
      continue;
    }
    if (pending_space) cps.push_back(U' ');
    pending_space = false;
    cps.push_back(c);
  }
  return cps;
}

std::string encode(const UChar32* begin, const UChar32* end) {
  icu::UnicodeString u;
  for (const UChar32* p = begin; p != end; ++p) u.append(*p);
  return to_utf8(u);
}

bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize(std::string_view s) {
  auto cps = collapsed_code_points(nfc(s));
  return encode(cps.data(), cps.data() + cps.size());
}

std::string trim(std::string_view s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  int32_t begin = 0;
  int32_t end = u.length();
  while (begin < end && u_isUWhiteSpace(u.char32At(begin))) begin = u.moveIndex32(begin, 1);
  while (end > begin) {
    int32_t prev = u.moveIndex32(end, -1);
    if (!u_isUWhiteSpace(u.char32At(prev))) break;
    end = prev;
  }
  return to_utf8(u.tempSubStringBetween(begin, end));
}

bool has_content(std::string_view s) { return !trim(s).empty(); }

bool has_alnum(std::string_view s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    if (u_isalnum(u.char32At(i))) return true;
  }
  return false;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  size_t start = 0;
  auto emit = [&](size_t end) {
    std::string frag = trim(s.substr(start, end - start));
    if (!frag.empty()) out.push_back(std::move(frag));
    start = end;
  };
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 == s.size() || ascii_space(s[i + 1])) emit(i + 1);
  }
  if (start < s.size()) emit(s.size());
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
  icu::UnicodeString u = nfc(s);
  u.toLower(icu::Locale::getRoot());
  std::vector<std::string> tokens;
  icu::UnicodeString cur;
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    UChar32 c = u.char32At(i);
    if (u_isalnum(c)) {
      cur.append(c);
    } else if (!cur.isEmpty()) {
      tokens.push_back(to_utf8(cur));
      cur.remove();
    }
  }
  if (!cur.isEmpty()) tokens.push_back(to_utf8(cur));
  return tokens;
}

std::vector<std::string> char_ngrams(std::string_view s, int n) {
  if (n <= 0) throw ConfigError("n-gram order must be positive");
  icu::UnicodeString u = nfc(s);
  u.toLower(icu::Locale::getRoot());
  auto cps = collapsed_code_points(u);
  std::vector<std::string> grams;
  const auto order = static_cast<size_t>(n);
  if (cps.size() < order) return grams;
  grams.reserve(cps.size() - order + 1);
  for (size_t i = 0; i + order <= cps.size(); ++i) grams.push_back(encode(cps.data() + i, cps.data() + i + order));
  return grams;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Data, "SHA-256 digest failed");
  }
  std::string hex(len * 2, '0');
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    hex[2 * i] = kHex[digest[i] >> 4];
    hex[2 * i + 1] = kHex[digest[i] & 0xF];
  }
  return hex;
}

}  // namespace e4s::text
