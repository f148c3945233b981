#include "reviver/text.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>

namespace reviver::text {

namespace {

// Decodes one code point starting at s[i]; advances i. Malformed bytes decode
// as themselves.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    const auto lead = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = lead;
    if (lead >= 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else if (lead >= 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if (lead >= 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    }
    ++i;
    for (int k = 0; k < extra && i < s.size(); ++k, ++i) {
        const auto b = static_cast<unsigned char>(s[i]);
        if ((b & 0xC0) != 0x80) {
            return lead;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    return cp;
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0x3040 && cp <= 0x30FF) || (cp >= 0xAC00 && cp <= 0xD7AF) ||
           (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2A6DF);
}

// CJK and full-width punctuation blocks.
bool is_wide_punctuation(char32_t cp) {
    return (cp >= 0x3000 && cp <= 0x303F) || (cp >= 0xFF00 && cp <= 0xFF0F) ||
           (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0x2010 && cp <= 0x206F);
}

constexpr std::string_view kStopwords[] = {
    "a",     "an",    "the",  "and",   "or",    "but",  "of",   "in",    "on",   "at",  "to",
    "for",   "with",  "by",   "from",  "is",    "are",  "was",  "were",  "be",   "been", "it",
    "its",   "this",  "that", "these", "those", "there", "here", "i",    "you",  "we",  "they",
    "he",    "she",   "my",   "your",  "our",   "their", "his", "her",   "me",   "us",  "them",
    "as",    "s",     "t",    "do",    "did",   "does", "has",  "have",  "had",  "some", "very",
    "about", "let",   "so",    "not",  "no",   "can",   "into",
};

}  // namespace

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size();) {
        next_code_point(s, i);
        ++n;
    }
    return n;
}

std::string utf8_prefix(std::string_view s, std::size_t max_chars) {
    std::size_t i = 0;
    for (std::size_t n = 0; n < max_chars && i < s.size(); ++n) {
        next_code_point(s, i);
    }
    return std::string(s.substr(0, i));
}

bool is_cjk_locale(std::string_view locale) {
    const auto lower = to_lower_ascii(locale);
    return lower.starts_with("zh") || lower.starts_with("ja") || lower.starts_with("ko");
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(std::move(word));
            word.clear();
        }
    };
    for (std::size_t i = 0; i < s.size();) {
        const std::size_t start = i;
        const char32_t cp = next_code_point(s, i);
        if (cp < 0x80) {
            const auto c = static_cast<unsigned char>(cp);
            if (std::isalnum(c)) {
                word.push_back(static_cast<char>(std::tolower(c)));
            } else {
                flush();
            }
        } else if (is_cjk(cp)) {
            flush();
            out.emplace_back(s.substr(start, i - start));
        } else if (is_wide_punctuation(cp)) {
            flush();
        } else {
            word.append(s.substr(start, i - start));
        }
    }
    flush();
    return out;
}

bool is_stopword(std::string_view token) {
    return std::find(std::begin(kStopwords), std::end(kStopwords), token) != std::end(kStopwords);
}

std::set<std::string> content_tokens(std::string_view s) {
    std::set<std::string> out;
    for (auto& t : tokenize(s)) {
        if (!is_stopword(t)) {
            out.insert(std::move(t));
        }
    }
    return out;
}

std::size_t word_count(std::string_view s, std::string_view locale) {
    std::size_t n = 0;
    if (is_cjk_locale(locale)) {
        for (std::size_t i = 0; i < s.size();) {
            const char32_t cp = next_code_point(s, i);
            if (cp < 0x80) {
                if (std::isalnum(static_cast<unsigned char>(cp))) {
                    ++n;
                }
            } else if (!is_wide_punctuation(cp)) {
                ++n;
            }
        }
        return n;
    }
    bool in_word = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) {
            ++n;
        }
        in_word = !space;
    }
    return n;
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string trim_punctuation(std::string_view s) {
    std::string out = trim(s);
    while (!out.empty() && std::string_view(".!?,;:").find(out.back()) != std::string_view::npos) {
        out.pop_back();
    }
    return trim(out);
}

double content_overlap(std::string_view candidate, std::string_view haystack) {
    const auto wanted = content_tokens(candidate);
    if (wanted.empty()) {
        return 0.0;
    }
    const auto have = content_tokens(haystack);
    const auto hits = std::count_if(wanted.begin(), wanted.end(), [&](const std::string& t) { return have.contains(t); });
    return static_cast<double>(hits) / static_cast<double>(wanted.size());
}

}  // namespace reviver::text
