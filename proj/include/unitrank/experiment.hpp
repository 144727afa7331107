#pragma once

/** \file experiment.hpp
 *  \brief Experiment configuration, the benchmark runner and parameter sweeps.
 *
 * A config file is one flat JSON object of setting -> value. The same keys are
 * accepted by --set overrides and sweep grids; see README.md for the list.
 */

#include "unitrank/analyzer.hpp"
#include "unitrank/dense_index.hpp"
#include "unitrank/eval.hpp"
#include "unitrank/fusion.hpp"
#include "unitrank/query_understanding.hpp"
#include "unitrank/sparse_index.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace unitrank {

enum class UnitSource { cache, http, none };

std::string_view to_string(UnitSource s);
UnitSource unit_source_from_string(std::string_view name);

struct ExperimentConfig {
    std::string corpus;
    std::string queries;
    std::string qrels;
    std::string index;       ///< prebuilt sparse index; replaces corpus when set
    std::string exclusions;  ///< optional "query_id doc_id" lines
    Mode mode{Mode::sparse};

    UnitSource unit_source{UnitSource::cache};
    ReasonerConfig reasoner;  ///< cache_path, interpret and max_units live here
    bool include_original{false};
    bool skip_failed{false};

    FusionConfig fusion;
    SparseParams sparse;
    DenseParams dense;
    std::size_t top_k{1000};

    std::string doc_embeddings;
    std::string query_embeddings;

    AnalyzerConfig analyzer{AnalyzerConfig::english()};
    std::string stopwords{"default"};  ///< "default", "none" or a file path

    std::string output_dir;
    std::size_t jobs{0};  ///< 0: all cores
    std::string tag{"unitrank"};
    std::vector<std::string> metrics{"ndcg@10", "recall@1"};
    EvalOptions eval;

    /// Reads a flat JSON object; relative paths resolve against the file's directory.
    static ExperimentConfig load(const std::string& path);

    /// Sets one key. Paths are resolved against base_dir when relative.
    void apply_setting(const std::string& key, const nlohmann::json& value, const std::string& base_dir = {});
    /// "key=value"; the value is parsed as JSON, falling back to a plain string.
    /// Relative paths resolve against the working directory.
    void apply_override(std::string_view assignment);

    /// Checks parameters and that every referenced path exists.
    void validate(bool need_qrels) const;

    std::size_t effective_jobs() const;

    /// Every setting, in the key order accepted by apply_setting.
    nlohmann::ordered_json to_json() const;
};

/// Parses a setting value from its command-line text.
nlohmann::json parse_setting_value(std::string_view text);

/// query_id -> excluded doc_ids.
using Exclusions = std::map<std::string, std::set<std::string>, std::less<>>;
Exclusions load_exclusions(const std::string& path);

/// Loaded inputs shared between runs that reference the same files.
class BenchmarkContext {
public:
    std::shared_ptr<const SparseIndex> sparse_index(const ExperimentConfig& config);
    std::shared_ptr<const DenseIndex> dense_index(const ExperimentConfig& config);
    std::shared_ptr<const EmbeddingFile> query_embeddings(const ExperimentConfig& config);
    std::shared_ptr<const std::vector<Query>> queries(const ExperimentConfig& config);
    std::shared_ptr<const Qrels> qrels(const ExperimentConfig& config);
    std::shared_ptr<const UnitCache> unit_cache(const ExperimentConfig& config);
    std::shared_ptr<const Exclusions> exclusions(const ExperimentConfig& config);

private:
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const void>> items_;

    template <typename T, typename Load>
    std::shared_ptr<const T> get(const std::string& key, Load&& load);
};

/// Builds the unit set of every query from the configured source, in query order.
/// Queries that fail are dropped when skip_failed is set.
std::vector<UnitSet> resolve_units(const ExperimentConfig& config, BenchmarkContext& ctx);

/// Retrieves and fuses every unit set into the final per-query ranking.
RunFile retrieve_run(const ExperimentConfig& config, const std::vector<UnitSet>& units, BenchmarkContext& ctx);

struct BenchmarkResult {
    RunFile run;
    std::vector<MetricReport> reports;  ///< empty when no qrels are configured
};

/// Full pipeline: units, retrieval, fusion, exclusions, metrics.
BenchmarkResult run_benchmark(const ExperimentConfig& config, BenchmarkContext& ctx);
BenchmarkResult run_benchmark(const ExperimentConfig& config);

/// Writes run.trec, metrics.json (when evaluated) and config.resolved.json into output_dir.
void write_outputs(const ExperimentConfig& config, const BenchmarkResult& result);

std::vector<MetricReport> evaluate_run(const RunFile& run, const Qrels& qrels, const std::vector<std::string>& metrics,
                                       const EvalOptions& options);

using SweepGrid = std::vector<std::pair<std::string, std::vector<nlohmann::json>>>;

/// "key=v1,v2,v3".
std::pair<std::string, std::vector<nlohmann::json>> parse_grid_axis(std::string_view text);

struct SweepRow {
    std::vector<nlohmann::json> values;
    std::vector<MetricReport> reports;
    std::string error;  ///< empty on success
};

/// Runs the Cartesian product of the grid; the first axis varies slowest.
std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepGrid& grid, BenchmarkContext& ctx);
std::string sweep_csv(const SweepGrid& grid, const std::vector<std::string>& metrics, const std::vector<SweepRow>& rows);

}  // namespace unitrank
