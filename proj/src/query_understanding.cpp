#include "unitrank/query_understanding.hpp"

#include "unitrank/embedded_assets.hpp"
#include "unitrank/errors.hpp"
#include "unitrank/http_reasoner.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace unitrank {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Above this many sub-queries a flexible decomposition is unusual enough to flag.
constexpr std::size_t kUnitWarningThreshold = 15;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string_view strip_reasoning(std::string_view raw) {
    std::size_t cut = 0;
    for (std::string_view tag : {"</think>", "</thinking>", "</reasoning>"}) {
        const auto pos = raw.rfind(tag);
        if (pos != std::string_view::npos) cut = std::max(cut, pos + tag.size());
    }
    return raw.substr(cut);
}

std::vector<std::string_view> fenced_blocks(std::string_view text) {
    std::vector<std::string_view> blocks;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("```", pos);
        if (open == std::string_view::npos) break;
        auto start = open + 3;
        while (start < text.size() && std::isalnum(static_cast<unsigned char>(text[start]))) ++start;
        const auto close = text.find("```", start);
        if (close == std::string_view::npos) break;
        blocks.push_back(text.substr(start, close - start));
        pos = close + 3;
    }
    return blocks;
}

// Index one past the bracket matching text[open], or npos.
std::size_t matching_bracket(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::optional<std::vector<ParsedUnit>> as_units(const json& value) {
    if (!value.is_array()) return std::nullopt;
    std::vector<ParsedUnit> units;
    for (const auto& item : value) {
        if (!item.is_object()) return std::nullopt;
        auto sq = item.find("sub_query");
        if (sq == item.end() || !sq->is_string()) return std::nullopt;
        ParsedUnit u;
        u.sub_query = trim(sq->get<std::string>());
        if (auto it = item.find("interpretation"); it != item.end() && !it->is_null()) {
            if (!it->is_string()) return std::nullopt;
            u.interpretation = trim(it->get<std::string>());
        }
        if (!u.sub_query.empty()) units.push_back(std::move(u));
    }
    return units;
}

// First parseable unit array in text; sets saw_empty if only empty ones turn up.
std::optional<std::vector<ParsedUnit>> find_unit_array(std::string_view text, bool& saw_empty) {
    for (std::size_t pos = text.find('['); pos != std::string_view::npos; pos = text.find('[', pos + 1)) {
        const auto end = matching_bracket(text, pos);
        if (end == std::string_view::npos) continue;
        const json parsed = json::parse(text.substr(pos, end - pos), nullptr, false);
        if (parsed.is_discarded()) continue;
        auto units = as_units(parsed);
        if (!units) continue;
        if (units->empty()) {
            saw_empty = true;
            continue;
        }
        return units;
    }
    return std::nullopt;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

UnitSet unit_set_from_json(const json& obj, const std::string& path, std::size_t line_no) {
    auto str = [&](const char* key) {
        auto it = obj.find(key);
        if (it == obj.end() || !it->is_string()) {
            throw InputError(at_line(path, line_no, std::string("missing string field \"") + key + "\""));
        }
        return it->get<std::string>();
    };
    UnitSet set;
    set.query_id = str("query_id");
    set.original_query = str("original_query");
    try {
        set.mode = mode_from_string(str("mode"));
    } catch (const InputError& e) {
        throw InputError(at_line(path, line_no, e.what()));
    }
    auto units = obj.find("units");
    if (units == obj.end() || !units->is_array()) throw InputError(at_line(path, line_no, "\"units\" must be an array"));
    for (const auto& u : *units) {
        if (!u.is_object() || !u.contains("sub_query") || !u["sub_query"].is_string() ||
            (u.contains("interpretation") && !u["interpretation"].is_string())) {
            throw InputError(at_line(path, line_no, "unit entries need string \"sub_query\" and \"interpretation\""));
        }
        RetrievalUnit unit;
        unit.unit_id = unit_id_for(set.query_id, set.units.size());
        unit.sub_query = u["sub_query"].get<std::string>();
        unit.interpretation = u.value("interpretation", std::string{});
        set.units.push_back(std::move(unit));
    }
    try {
        set.validate();
    } catch (const InputError& e) {
        throw InputError(at_line(path, line_no, e.what()));
    }
    return set;
}

}  // namespace

std::string_view to_string(Mode m) {
    return m == Mode::sparse ? "sparse" : "dense";
}

Mode mode_from_string(std::string_view name) {
    if (name == "sparse") return Mode::sparse;
    if (name == "dense") return Mode::dense;
    throw InputError("unknown mode '" + std::string(name) + "' (expected sparse or dense)");
}

void UnitSet::validate() const {
    if (query_id.empty()) throw InputError("unit set has an empty query_id");
    if (units.empty()) throw InputError("unit set for query \"" + query_id + "\" has no units");
    std::set<std::string_view> ids;
    for (const auto& u : units) {
        if (trim(u.sub_query).empty()) throw InputError("empty sub_query in unit set for query \"" + query_id + "\"");
        if (!ids.insert(u.unit_id).second) throw InputError("duplicate unit id \"" + u.unit_id + "\"");
    }
}

std::string unit_id_for(std::string_view query_id, std::size_t index) {
    return "q" + std::string(query_id) + "#u" + std::to_string(index);
}

PromptTemplates PromptTemplates::defaults() {
    return {std::string(assets::prompt_decompose), std::string(assets::prompt_interpret_sparse),
            std::string(assets::prompt_interpret_dense)};
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
    PromptTemplates t = defaults();
    if (dir.empty()) return t;
    if (!std::filesystem::is_directory(dir)) throw InputError("prompt directory not found: " + dir);
    auto maybe = [&](const char* name, std::string& slot) {
        const auto path = std::filesystem::path(dir) / name;
        if (std::filesystem::exists(path)) slot = read_file(path.string());
    };
    maybe("decompose.v1.txt", t.decompose);
    maybe("interpret_sparse.v1.txt", t.interpret_sparse);
    maybe("interpret_dense.v1.txt", t.interpret_dense);
    return t;
}

std::string render_prompt(std::string_view tmpl, std::string_view query, std::string_view sub_query) {
    std::string out;
    out.reserve(tmpl.size() + query.size() + sub_query.size());
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl.substr(i).starts_with("{query}")) {
            out += query;
            i += 7;
        } else if (tmpl.substr(i).starts_with("{sub_query}")) {
            out += sub_query;
            i += 11;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

void ReasonerConfig::validate() const {
    if (backend == ReasonerBackend::cache) {
        if (cache_path.empty()) throw InputError("cache backend requires a cache path");
    } else {
        if (endpoint.empty()) throw InputError("http backend requires an endpoint");
        if (model_name.empty()) throw InputError("http backend requires a model name");
    }
    if (retries < 1) throw InputError("retries must be >= 1");
    if (!text_path.starts_with('/')) throw InputError("text_path must be a JSON pointer starting with '/'");
    if (max_units && *max_units == 0) throw InputError("max_units must be >= 1");
}

std::vector<ParsedUnit> parse_reasoner_output(std::string_view raw) {
    const std::string_view text = strip_reasoning(raw);
    bool saw_empty = false;
    for (auto block : fenced_blocks(text)) {
        if (auto units = find_unit_array(block, saw_empty)) return *units;
    }
    if (auto units = find_unit_array(text, saw_empty)) return *units;
    if (saw_empty) throw BackendError("reasoner returned an empty unit list");
    throw BackendError("no JSON array of sub-queries found in reasoner output");
}

UnitCache UnitCache::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open unit cache: " + path);
    UnitCache cache;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw InputError(at_line(path, line_no, "malformed JSON object"));
        UnitSet set = unit_set_from_json(obj, path, line_no);
        if (cache.contains(set.query_id, set.mode)) {
            throw InputError(at_line(path, line_no,
                                     "duplicate entry for query \"" + set.query_id + "\" mode " +
                                         std::string(to_string(set.mode))));
        }
        cache.insert(std::move(set));
    }
    return cache;
}

void UnitCache::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InputError("cannot write unit cache: " + path);
    for (const auto& set : entries_) {
        ordered_json obj;
        obj["query_id"] = set.query_id;
        obj["mode"] = to_string(set.mode);
        obj["original_query"] = set.original_query;
        obj["units"] = ordered_json::array();
        for (const auto& u : set.units) {
            ordered_json unit;
            unit["sub_query"] = u.sub_query;
            unit["interpretation"] = u.interpretation;
            obj["units"].push_back(std::move(unit));
        }
        out << obj.dump() << '\n';
    }
    if (!out) throw Error("failed writing unit cache: " + path);
}

void UnitCache::insert(UnitSet set) {
    set.validate();
    auto key = std::make_pair(set.query_id, set.mode);
    if (index_.contains(key)) {
        throw InputError("duplicate unit set for query \"" + set.query_id + "\" mode " +
                         std::string(to_string(set.mode)));
    }
    index_.emplace(std::move(key), entries_.size());
    entries_.push_back(std::move(set));
}

const UnitSet* UnitCache::find(std::string_view query_id, Mode mode) const {
    auto it = index_.find(std::make_pair(std::string(query_id), mode));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const UnitSet& CacheReasoner::lookup(const Query& query, Mode mode) const {
    if (const auto* set = cache_.find(query.query_id, mode)) return *set;
    const Mode other = mode == Mode::sparse ? Mode::dense : Mode::sparse;
    if (cache_.contains(query.query_id, other)) {
        throw InputError("query \"" + query.query_id + "\" is cached only for " + std::string(to_string(other)) +
                         " mode, not " + std::string(to_string(mode)));
    }
    throw InputError("query \"" + query.query_id + "\" is not in the unit cache");
}

std::vector<std::string> CacheReasoner::decompose(const Query& query, Mode mode) {
    std::vector<std::string> subs;
    for (const auto& u : lookup(query, mode).units) subs.push_back(u.sub_query);
    return subs;
}

std::string CacheReasoner::interpret(const Query& query, std::string_view sub_query, Mode mode) {
    for (const auto& u : lookup(query, mode).units) {
        if (u.sub_query == sub_query) return u.interpretation;
    }
    throw InputError("sub-query \"" + std::string(sub_query) + "\" not cached for query \"" + query.query_id + "\"");
}

std::unique_ptr<Reasoner> make_reasoner(const ReasonerConfig& config) {
    config.validate();
    if (config.backend == ReasonerBackend::cache) {
        return std::make_unique<CacheReasoner>(UnitCache::load(config.cache_path));
    }
    return std::make_unique<HttpReasoner>(config);
}

std::vector<std::string> decompose(Reasoner& reasoner, const Query& query, Mode mode, const ReasonerConfig& config) {
    if (trim(query.text).empty()) throw InputError("query \"" + query.query_id + "\" is empty");
    auto subs = reasoner.decompose(query, mode);
    if (subs.empty()) throw BackendError("no sub-queries for query \"" + query.query_id + "\"");
    if (config.max_units) {
        if (subs.size() > *config.max_units) subs.resize(*config.max_units);
    } else if (subs.size() > kUnitWarningThreshold) {
        spdlog::warn("query {} decomposed into {} sub-queries", query.query_id, subs.size());
    }
    return subs;
}

std::string interpret(Reasoner& reasoner, const Query& query, std::string_view sub_query, Mode mode) {
    if (trim(sub_query).empty()) throw InputError("empty sub-query for query \"" + query.query_id + "\"");
    std::string text = reasoner.interpret(query, sub_query, mode);
    if (trim(text).empty()) {
        throw BackendError("empty interpretation for sub-query \"" + std::string(sub_query) + "\" of query \"" +
                           query.query_id + "\"");
    }
    return text;
}

UnitSet build_unit_set(const Query& query, Mode mode, Reasoner& reasoner, const ReasonerConfig& config) {
    UnitSet set;
    set.query_id = query.query_id;
    set.original_query = query.text;
    set.mode = mode;
    const auto subs = decompose(reasoner, query, mode, config);
    for (std::size_t i = 0; i < subs.size(); ++i) {
        RetrievalUnit unit;
        unit.unit_id = unit_id_for(query.query_id, i);
        unit.sub_query = subs[i];
        if (config.interpret) unit.interpretation = interpret(reasoner, query, subs[i], mode);
        set.units.push_back(std::move(unit));
    }
    set.validate();
    return set;
}

UnitSet build_unit_set(const Query& query, Mode mode, const ReasonerConfig& config) {
    auto reasoner = make_reasoner(config);
    return build_unit_set(query, mode, *reasoner, config);
}

std::vector<UnitSet> unit_sets_from_expansions(const std::vector<Query>& queries,
                                               const std::map<std::string, std::string>& expansions, Mode mode) {
    std::vector<UnitSet> sets;
    sets.reserve(queries.size());
    for (const auto& q : queries) {
        auto it = expansions.find(q.query_id);
        if (it == expansions.end()) throw InputError("no expansion for query \"" + q.query_id + "\"");
        UnitSet set;
        set.query_id = q.query_id;
        set.original_query = q.text;
        set.mode = mode;
        set.units.push_back({unit_id_for(q.query_id, 0), q.text, it->second});
        set.validate();
        sets.push_back(std::move(set));
    }
    return sets;
}

std::map<std::string, std::string> load_expansions(const std::string& path) {
    const json doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw InputError(path + ": expected a JSON object mapping query_id to expansion text");
    }
    std::map<std::string, std::string> out;
    for (const auto& [qid, text] : doc.items()) {
        if (!text.is_string()) throw InputError(path + ": expansion for \"" + qid + "\" is not a string");
        out.emplace(qid, text.get<std::string>());
    }
    return out;
}

}  // namespace unitrank
