#pragma once

/** \file analyzer.hpp
 *  \brief Text analysis shared by documents and retrieval units.
 *
 * Tokens are maximal runs of Unicode letters and digits (combining marks
 * attach to the run they follow). Each token then passes, in order, through
 * lowercasing, ASCII folding, stopword removal and stemming, each step
 * switchable in AnalyzerConfig. Analysis is a pure function of (text, config).
 */

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace unitrank {

enum class Stemmer : std::uint8_t { none = 0, porter = 1 };

struct AnalyzerConfig {
    bool lowercase{true};
    bool fold_ascii{false};
    std::set<std::string> stopwords;
    Stemmer stemmer{Stemmer::porter};

    /// Lowercase, Porter, bundled English stopword list.
    static AnalyzerConfig english();
    /// Tokenize and lowercase only.
    static AnalyzerConfig plain();

    bool operator==(const AnalyzerConfig&) const = default;
};

/// Analyzed text: the token sequence plus per-token counts.
struct TokenSeq {
    std::vector<std::string> tokens;
    std::map<std::string, std::uint32_t, std::less<>> tf;

    bool empty() const noexcept { return tokens.empty(); }
    std::size_t size() const noexcept { return tokens.size(); }
};

TokenSeq analyze(std::string_view text, const AnalyzerConfig& config);

/// The stopword list shipped in data/stopwords_en.txt.
const std::set<std::string>& english_stopwords();

/// One term per line, UTF-8; blank lines and surrounding whitespace ignored.
std::set<std::string> load_stopwords(const std::string& path);
std::set<std::string> parse_stopwords(std::string_view text);

std::string_view to_string(Stemmer s);
Stemmer stemmer_from_string(std::string_view name);

}  // namespace unitrank
