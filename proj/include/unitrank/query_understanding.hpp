#pragma once

/** \file query_understanding.hpp
 *  \brief Turning a query into retrieval units.
 *
 * A reasoner first splits the query into independent sub-queries, then writes
 * an interpretation for each one: lexical expansions for sparse retrieval,
 * paraphrase-style elaborations for dense retrieval. Two backends exist: a
 * cache of previously produced unit sets (deterministic, no network) and an
 * HTTP chat-completion endpoint (see http_reasoner.hpp).
 *
 * Cache file: JSON lines of
 *   {"query_id", "mode", "original_query", "units": [{"sub_query", "interpretation"}]}
 * keyed by (query_id, mode).
 */

#include "unitrank/corpus.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace unitrank {

enum class Mode : std::uint8_t { sparse, dense };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view name);

struct RetrievalUnit {
    std::string unit_id;
    std::string sub_query;
    std::string interpretation;

    bool operator==(const RetrievalUnit&) const = default;
};

struct UnitSet {
    std::string query_id;
    std::string original_query;
    std::vector<RetrievalUnit> units;
    Mode mode{Mode::sparse};

    /// Throws InputError if there are no units, a sub-query is empty or a
    /// unit id repeats.
    void validate() const;

    bool operator==(const UnitSet&) const = default;
};

/// "q<query_id>#u<index>", index counting from 0 in emission order.
std::string unit_id_for(std::string_view query_id, std::size_t index);

enum class ReasonerBackend { cache, http };

struct PromptTemplates {
    std::string decompose;
    std::string interpret_sparse;
    std::string interpret_dense;

    /// The versioned templates shipped in data/prompts.
    static PromptTemplates defaults();
    /// Defaults, overridden by decompose.v1.txt, interpret_sparse.v1.txt and
    /// interpret_dense.v1.txt where present in `dir`.
    static PromptTemplates load(const std::string& dir);
};

/// Replaces {query} and {sub_query} placeholders.
std::string render_prompt(std::string_view tmpl, std::string_view query, std::string_view sub_query = {});

struct ReasonerConfig {
    ReasonerBackend backend{ReasonerBackend::cache};
    std::string cache_path;

    std::string endpoint;
    std::string model_name;
    double temperature{0.6};
    std::chrono::milliseconds timeout{std::chrono::seconds(120)};
    int retries{3};  ///< total attempts per call
    std::chrono::milliseconds backoff{std::chrono::milliseconds(500)};
    std::string token_env{"UNITRANK_API_KEY"};
    /// JSON pointer to the generated text in the response body.
    std::string text_path{"/choices/0/message/content"};
    std::string prompt_dir;

    /// Fixed-granularity mode when set: keep at most this many sub-queries.
    std::optional<std::size_t> max_units;
    /// false reproduces decomposition-only units (empty interpretations).
    bool interpret{true};

    void validate() const;
};

/// One element of a reasoner's JSON answer.
struct ParsedUnit {
    std::string sub_query;
    std::string interpretation;

    bool operator==(const ParsedUnit&) const = default;
};

/// Extracts the JSON array of {"sub_query", "interpretation"} objects from raw
/// model output. Text up to the last closing reasoning tag (</think>,
/// </thinking>, </reasoning>) is dropped; fenced code blocks are tried before
/// bare arrays; surrounding prose is ignored. Throws BackendError when no
/// usable array is found or it is empty.
std::vector<ParsedUnit> parse_reasoner_output(std::string_view raw);

class Reasoner {
public:
    virtual ~Reasoner() = default;
    virtual std::vector<std::string> decompose(const Query& query, Mode mode) = 0;
    virtual std::string interpret(const Query& query, std::string_view sub_query, Mode mode) = 0;
};

/// Previously produced unit sets keyed by (query_id, mode), in insertion order.
class UnitCache {
public:
    static UnitCache load(const std::string& path);
    void save(const std::string& path) const;

    /// InputError on a duplicate key or an invalid set.
    void insert(UnitSet set);
    const UnitSet* find(std::string_view query_id, Mode mode) const;
    bool contains(std::string_view query_id, Mode mode) const { return find(query_id, mode) != nullptr; }

    const std::vector<UnitSet>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<UnitSet> entries_;
    std::map<std::pair<std::string, Mode>, std::size_t, std::less<>> index_;
};

class CacheReasoner final : public Reasoner {
public:
    explicit CacheReasoner(UnitCache cache) : cache_(std::move(cache)) {}

    std::vector<std::string> decompose(const Query& query, Mode mode) override;
    std::string interpret(const Query& query, std::string_view sub_query, Mode mode) override;

private:
    const UnitSet& lookup(const Query& query, Mode mode) const;
    UnitCache cache_;
};

std::unique_ptr<Reasoner> make_reasoner(const ReasonerConfig& config);

/// Sub-queries for `query`, truncated to config.max_units when set.
std::vector<std::string> decompose(Reasoner& reasoner, const Query& query, Mode mode, const ReasonerConfig& config);
std::string interpret(Reasoner& reasoner, const Query& query, std::string_view sub_query, Mode mode);

/// Decomposes, then interprets each sub-query (unless config.interpret is off).
UnitSet build_unit_set(const Query& query, Mode mode, Reasoner& reasoner, const ReasonerConfig& config);
UnitSet build_unit_set(const Query& query, Mode mode, const ReasonerConfig& config);

/// Single-unit sets pairing each query with a precomputed expansion text, the
/// shape of whole-query expansion baselines. Queries without an expansion are
/// an error.
std::vector<UnitSet> unit_sets_from_expansions(const std::vector<Query>& queries,
                                               const std::map<std::string, std::string>& expansions, Mode mode);

/// Reads a JSON object mapping query_id to expansion text.
std::map<std::string, std::string> load_expansions(const std::string& path);

}  // namespace unitrank
