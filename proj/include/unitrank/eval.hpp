#pragma once

/** \file eval.hpp
 *  \brief TREC run/qrels files and rank-based metrics.
 *
 * qrels: "query_id 0 doc_id grade" per line (a three-column
 *        "query_id doc_id grade" variant with an optional header, as found in
 *        BEIR dumps, is accepted too). Grades are integers >= 0.
 * run:   "query_id Q0 doc_id rank score tag" per line.
 *
 * Metrics only look at ranks. nDCG uses gain 2^grade - 1 and log2(rank + 1)
 * discounts; recall counts documents with grade > 0 as relevant. A query with
 * no relevant documents scores 0 unless excluded.
 */

#include "unitrank/scored_list.hpp"

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace unitrank {

class Qrels {
public:
    static Qrels read(const std::string& path);

    /// InputError on a negative grade or a conflicting duplicate judgment.
    void add(const std::string& query_id, const std::string& doc_id, int grade);

    /// Judgments for one query, or nullptr.
    const std::map<std::string, int>* judgments(std::string_view query_id) const;
    std::size_t num_queries() const noexcept { return by_query_.size(); }
    std::size_t num_judgments() const noexcept { return num_judgments_; }
    const std::map<std::string, std::map<std::string, int>, std::less<>>& queries() const noexcept { return by_query_; }

private:
    std::map<std::string, std::map<std::string, int>, std::less<>> by_query_;
    std::size_t num_judgments_{0};
};

std::size_t relevant_count(const std::map<std::string, int>& judgments);

struct RunEntry {
    std::string doc_id;
    double score{0.0};
    std::size_t rank{0};

    bool operator==(const RunEntry&) const = default;
};

/// Ranked results per query; queries keep insertion order.
class RunFile {
public:
    static RunFile read(const std::string& path);

    /// Assigns ranks 1..n from the list order.
    void add(const std::string& query_id, const ScoredList& ranked);
    void add(const std::string& query_id, std::vector<RunEntry> entries);

    const std::vector<RunEntry>* entries(std::string_view query_id) const;
    const std::vector<std::pair<std::string, std::vector<RunEntry>>>& queries() const noexcept { return queries_; }

    /// Throws InputError unless ranks are 1..n, scores non-increasing and
    /// doc_ids unique within every query.
    void validate() const;

    void write(std::ostream& out, std::string_view tag) const;
    void write(const std::string& path, std::string_view tag) const;

    bool operator==(const RunFile&) const = default;

private:
    std::vector<std::pair<std::string, std::vector<RunEntry>>> queries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct MetricReport {
    std::string metric;  ///< "ndcg" or "recall"
    std::size_t k{0};
    double mean{0.0};
    std::vector<std::pair<std::string, double>> per_query;  ///< sorted by query_id

    std::string name() const { return metric + "@" + std::to_string(k); }
    nlohmann::ordered_json to_json() const;
};

struct EvalOptions {
    /// Error on a run query with no judgments instead of skipping it.
    bool strict_qrels{false};
    /// Drop queries without relevant documents instead of scoring them 0.
    bool exclude_zero_relevant{false};
    /// Score judged queries missing from the run as 0 instead of skipping them.
    bool complete{false};
};

/// nDCG@k of a single ranking.
double ndcg(const std::vector<RunEntry>& ranked, const std::map<std::string, int>& judgments, std::size_t k);
/// |relevant in top k| / |relevant|.
double recall(const std::vector<RunEntry>& ranked, const std::map<std::string, int>& judgments, std::size_t k);

MetricReport ndcg_at_k(const RunFile& run, const Qrels& qrels, std::size_t k, const EvalOptions& options = {});
MetricReport recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k, const EvalOptions& options = {});

struct MetricSpec {
    std::string metric;
    std::size_t k{0};
};

/// Parses "ndcg@10" or "recall@1".
MetricSpec parse_metric(std::string_view text);
MetricReport evaluate(const RunFile& run, const Qrels& qrels, const MetricSpec& spec, const EvalOptions& options = {});

/// JSON array of report objects {metric, k, mean, per_query}.
std::string reports_to_json(const std::vector<MetricReport>& reports);
/// Human-readable table: one row per query, then the mean.
void print_reports(std::ostream& out, const std::vector<MetricReport>& reports);

/// One dataset in a multi-dataset evaluation.
struct ManifestEntry {
    std::string name;
    std::string group;
    std::string run_path;
    std::string qrels_path;
};

/// JSON array of {"name", "group", "run", "qrels"}; relative paths resolve
/// against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);

struct GroupSummary {
    std::string group;  ///< "all" for the overall row
    std::string metric;
    double macro_mean{0.0};  ///< unweighted mean over the group's datasets
    std::size_t datasets{0};
};

/// Per-group and overall macro averages of per-dataset means.
std::vector<GroupSummary> summarize_groups(const std::vector<ManifestEntry>& entries,
                                           const std::vector<std::vector<MetricReport>>& reports);

}  // namespace unitrank
