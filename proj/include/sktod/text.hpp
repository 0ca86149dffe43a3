#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by every module. All functions treat text as
// UTF-8 bytes; only ASCII characters are case-folded or classified.
namespace sktod::text {

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);
std::string to_lower(std::string_view s);

// Collapses every run of whitespace to a single space and trims the ends.
std::string normalize_whitespace(std::string_view s);

// Sentence splitter used everywhere a sentence count or a trailing question
// is needed: a sentence ends at a run of [.?!] followed by whitespace or the
// end of the string, and keeps its terminator. Text after the last
// terminator forms a final sentence. Returned sentences are trimmed and
// never empty.
std::vector<std::string> split_sentences(std::string_view s);

// Number of Unicode code points (invalid bytes count as one each).
std::size_t utf8_length(std::string_view s);

bool is_decimal_id(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);

// Replaces typographic apostrophes (U+2018/U+2019) with '\''.
std::string fold_apostrophes(std::string_view s);

}  // namespace sktod::text
