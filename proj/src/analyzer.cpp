#include "unitrank/analyzer.hpp"

#include "unitrank/embedded_assets.hpp"
#include "unitrank/errors.hpp"
#include "unitrank/porter_stemmer.hpp"

#include <unicode/uchar.h>
#include <unicode/unorm2.h>
#include <unicode/utf16.h>
#include <unicode/utf8.h>

#include <fstream>
#include <sstream>

namespace unitrank {

namespace {

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    std::int32_t len = 0;
    UBool error = false;
    U8_APPEND(buf, len, U8_MAX_LENGTH, c, error);
    if (!error) out.append(buf, static_cast<std::size_t>(len));
}

bool is_mark(UChar32 c) {
    return (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0;
}

// Letters whose ASCII form is not reachable by canonical decomposition.
const char* special_fold(UChar32 c) {
    switch (c) {
        case 0x00DF: return "ss";
        case 0x00C6: return "AE";
        case 0x00E6: return "ae";
        case 0x00D8: return "O";
        case 0x00F8: return "o";
        case 0x00D0: return "D";
        case 0x00F0: return "d";
        case 0x00DE: return "TH";
        case 0x00FE: return "th";
        case 0x0110: return "D";
        case 0x0111: return "d";
        case 0x0126: return "H";
        case 0x0127: return "h";
        case 0x0131: return "i";
        case 0x0141: return "L";
        case 0x0142: return "l";
        case 0x0152: return "OE";
        case 0x0153: return "oe";
        case 0x0166: return "T";
        case 0x0167: return "t";
        default: return nullptr;
    }
}

const UNormalizer2* nfd() {
    static const UNormalizer2* instance = [] {
        UErrorCode status = U_ZERO_ERROR;
        const UNormalizer2* n = unorm2_getNFDInstance(&status);
        return U_SUCCESS(status) ? n : nullptr;
    }();
    return instance;
}

// Appends the ASCII form of c if it has one, otherwise c itself.
void fold_code_point(std::string& out, UChar32 c) {
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
        return;
    }
    if (const char* s = special_fold(c)) {
        out.append(s);
        return;
    }
    if (const UNormalizer2* n = nfd()) {
        UChar buf[32];
        UErrorCode status = U_ZERO_ERROR;
        const std::int32_t len = unorm2_getDecomposition(n, c, buf, 32, &status);
        if (U_SUCCESS(status) && len > 0) {
            std::string base;
            bool ascii = true;
            for (std::int32_t i = 0; i < len;) {
                UChar32 d;
                U16_NEXT(buf, i, len, d);
                if (is_mark(d)) continue;
                if (d >= 0x80) {
                    ascii = false;
                    break;
                }
                base.push_back(static_cast<char>(d));
            }
            if (ascii && !base.empty()) {
                out += base;
                return;
            }
        }
    }
    if (!is_mark(c)) append_utf8(out, c);
}

std::string normalize_token(const std::vector<UChar32>& cps, const AnalyzerConfig& config) {
    std::string out;
    out.reserve(cps.size());
    for (UChar32 c : cps) {
        if (config.lowercase) c = u_tolower(c);
        if (config.fold_ascii) {
            fold_code_point(out, c);
        } else {
            append_utf8(out, c);
        }
    }
    return out;
}

bool is_ascii(std::string_view s) {
    for (unsigned char ch : s) {
        if (ch >= 0x80) return false;
    }
    return true;
}

}  // namespace

AnalyzerConfig AnalyzerConfig::english() {
    AnalyzerConfig c;
    c.lowercase = true;
    c.fold_ascii = false;
    c.stopwords = english_stopwords();
    c.stemmer = Stemmer::porter;
    return c;
}

AnalyzerConfig AnalyzerConfig::plain() {
    AnalyzerConfig c;
    c.stemmer = Stemmer::none;
    return c;
}

TokenSeq analyze(std::string_view text, const AnalyzerConfig& config) {
    TokenSeq out;
    std::vector<UChar32> run;
    auto flush = [&] {
        if (run.empty()) return;
        std::string token = normalize_token(run, config);
        run.clear();
        if (token.empty() || config.stopwords.contains(token)) return;
        if (config.stemmer == Stemmer::porter && is_ascii(token)) token = porter_stem(token);
        ++out.tf[token];
        out.tokens.push_back(std::move(token));
    };

    const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
    const auto length = static_cast<std::int32_t>(text.size());
    for (std::int32_t i = 0; i < length;) {
        UChar32 c;
        U8_NEXT(s, i, length, c);
        if (c >= 0 && u_isalnum(c)) {
            run.push_back(c);
        } else if (c >= 0 && !run.empty() && is_mark(c)) {
            run.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::set<std::string> parse_stopwords(std::string_view text) {
    std::set<std::string> words;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        words.insert(line.substr(first, last - first + 1));
    }
    return words;
}

const std::set<std::string>& english_stopwords() {
    static const std::set<std::string> words = parse_stopwords(assets::stopwords_en);
    return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open stopword list: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_stopwords(buf.str());
}

std::string_view to_string(Stemmer s) {
    return s == Stemmer::porter ? "porter" : "none";
}

Stemmer stemmer_from_string(std::string_view name) {
    if (name == "porter") return Stemmer::porter;
    if (name == "none") return Stemmer::none;
    throw InputError("unknown stemmer '" + std::string(name) + "' (expected porter or none)");
}

}  // namespace unitrank
