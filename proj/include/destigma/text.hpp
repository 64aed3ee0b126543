#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small UTF-8 aware string helpers shared by the corpus, style and stigma
// modules. Case folding is ASCII-only; non-ASCII bytes pass through unchanged.
namespace destigma::text {

// Decodes the code point at `pos`; `len` receives its byte length. Invalid
// sequences decode as U+FFFD with length 1.
char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) noexcept;

// Length in bytes of a Unicode whitespace code point starting at `pos`,
// or 0 if the code point there is not whitespace.
std::size_t whitespace_len(std::string_view s, std::size_t pos) noexcept;

// Split on runs of Unicode whitespace. Punctuation stays attached.
std::vector<std::string> split_whitespace(std::string_view s);

std::size_t count_words(std::string_view s);

// Collapse every whitespace run to a single ASCII space and trim both ends.
std::string collapse_whitespace(std::string_view s);

std::string to_lower_ascii(std::string_view s);

std::string trim(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace destigma::text
