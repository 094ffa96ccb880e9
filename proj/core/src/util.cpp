#include "parrot/util.hpp"

#include <array>
#include <stdexcept>

namespace parrot {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

// Attempts a tolerant match of needle at haystack[pos]; returns end offset or
// npos on mismatch.
std::size_t try_match(std::string_view hay, std::string_view needle, std::size_t pos) {
  std::size_t i = pos, j = 0;
  while (j < needle.size()) {
    if (is_space(needle[j])) {
      while (j < needle.size() && is_space(needle[j])) ++j;
      if (i >= hay.size() || !is_space(hay[i])) return std::string_view::npos;
      while (i < hay.size() && is_space(hay[i])) ++i;
    } else {
      if (i >= hay.size() || lower(hay[i]) != lower(needle[j])) return std::string_view::npos;
      ++i;
      ++j;
    }
  }
  return i;
}

}  // namespace

std::size_t find_tolerant(std::string_view haystack, std::string_view needle, std::size_t from) {
  if (needle.empty()) return from;
  for (std::size_t pos = from; pos < haystack.size(); ++pos) {
    if (try_match(haystack, needle, pos) != std::string_view::npos) return pos;
  }
  return std::string_view::npos;
}

std::size_t tolerant_match_end(std::string_view haystack, std::string_view needle, std::size_t pos) {
  const std::size_t end = try_match(haystack, needle, pos);
  if (end == std::string_view::npos) {
    throw std::logic_error("tolerant_match_end: no match at given position");
  }
  return end;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  if (from.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string_view::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

static constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
    i += 3;
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::array<int, 256> rev;
  rev.fill(-1);
  for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kB64Alphabet[i])] = i;
  std::string out;
  int acc = 0, bits = 0;
  for (char c : text) {
    if (c == '=' || is_space(c)) continue;
    const int v = rev[static_cast<unsigned char>(c)];
    if (v < 0) throw std::invalid_argument("base64_decode: invalid character");
    acc = (acc << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace parrot
