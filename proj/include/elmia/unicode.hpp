#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "elmia/error.hpp"

// Character indices throughout the toolkit are Unicode scalar-value indices
// into UTF-8 encoded text, never byte offsets.

namespace elmia {

inline bool is_utf8_continuation(unsigned char b) { return (b & 0xC0) == 0x80; }

// Number of code points in a UTF-8 string.
inline std::size_t char_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char b : s)
    if (!is_utf8_continuation(b)) ++n;
  return n;
}

// Byte offset of the code point with index `char_idx`; `char_idx` may equal
// char_length(s), in which case s.size() is returned.
inline std::size_t char_to_byte(std::string_view s, std::size_t char_idx) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_utf8_continuation(static_cast<unsigned char>(s[i]))) continue;
    if (chars == char_idx) return i;
    ++chars;
  }
  if (chars == char_idx) return s.size();
  throw Error(Errc::span_out_of_bounds,
              "character index " + std::to_string(char_idx) + " beyond text length " +
                  std::to_string(chars));
}

// Whether `byte_idx` is the start of a code point (or end of string).
inline bool is_char_boundary(std::string_view s, std::size_t byte_idx) {
  if (byte_idx >= s.size()) return byte_idx == s.size();
  return !is_utf8_continuation(static_cast<unsigned char>(s[byte_idx]));
}

// Character index of the code point starting at byte `byte_idx`.
inline std::size_t byte_to_char(std::string_view s, std::size_t byte_idx) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < byte_idx && i < s.size(); ++i)
    if (!is_utf8_continuation(static_cast<unsigned char>(s[i]))) ++chars;
  return chars;
}

// s[char_start..char_end) as a byte string.
inline std::string char_slice(std::string_view s, std::size_t char_start, std::size_t char_end) {
  std::size_t b0 = char_to_byte(s, char_start);
  std::size_t b1 = char_to_byte(s, char_end);
  return std::string(s.substr(b0, b1 - b0));
}

// Replace s[char_start..char_end) with `replacement`.
inline std::string splice_chars(std::string_view s, std::size_t char_start, std::size_t char_end,
                                std::string_view replacement) {
  std::size_t b0 = char_to_byte(s, char_start);
  std::size_t b1 = char_to_byte(s, char_end);
  std::string out;
  out.reserve(s.size() - (b1 - b0) + replacement.size());
  out.append(s.substr(0, b0));
  out.append(replacement);
  out.append(s.substr(b1));
  return out;
}

}  // namespace elmia
