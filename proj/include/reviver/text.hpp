#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

// Locale-light text utilities shared by the dialogue rules and the metrics.
namespace reviver::text {

// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view s);

// Longest prefix of `s` holding at most `max_chars` code points.
std::string utf8_prefix(std::string_view s, std::size_t max_chars);

bool is_cjk_locale(std::string_view locale);

// Case-folded word tokens. ASCII letters/digits form words; CJK ideographs
// and kana become one token per character; other non-ASCII code points are
// kept inside words. Everything else separates tokens.
std::vector<std::string> tokenize(std::string_view s);

std::set<std::string> content_tokens(std::string_view s);
bool is_stopword(std::string_view token);

// Word count for narrative metrics: whitespace tokens for space-delimited
// locales, one per non-space, non-punctuation character for CJK locales.
std::size_t word_count(std::string_view s, std::string_view locale);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
// Trims whitespace and trailing sentence punctuation ("." "!" "?" ",").
std::string trim_punctuation(std::string_view s);

// Fraction of `candidate`'s content tokens that also occur in `haystack`.
// Returns 0 when `candidate` has no content tokens.
double content_overlap(std::string_view candidate, std::string_view haystack);

}  // namespace reviver::text
