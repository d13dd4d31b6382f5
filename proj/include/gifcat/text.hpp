#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gifcat::text {

// Appends cp to out as UTF-8.
void append_utf8(std::string& out, char32_t cp);

std::string to_utf8(char32_t cp);

// Decodes the UTF-8 sequence starting at s[i] and advances i past it.
// Ill-formed bytes decode one byte at a time as U+FFFD so the scan always
// makes progress.
char32_t next_codepoint(std::string_view s, std::size_t& i);

std::vector<char32_t> codepoints(std::string_view s);

std::string from_codepoints(const std::vector<char32_t>& cps);

// Unicode whitespace (ASCII space/tab/newline family plus the common
// non-ASCII space codepoints).
bool is_space(char32_t cp);

// Word characters for whole-word table matching: ASCII letters, digits and
// the straight apostrophe, so contractions count as one word.
bool is_word_char(char32_t cp);

// ASCII-only lowercase copy.
std::string ascii_lower(std::string_view s);

// Collapses every whitespace run to a single ' ' and trims both ends.
std::string squeeze_spaces(std::string_view s);

// Splits on Unicode whitespace; punctuation stays attached to its word.
std::vector<std::string> split_words(std::string_view s);

// Number of lines up to and including byte offset (1-based), for pointing
// parse errors at a line.
std::size_t line_of_offset(std::string_view data, std::size_t byte_offset);

} // namespace gifcat::text
