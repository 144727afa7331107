#include "unitrank/eval.hpp"

#include "unitrank/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace unitrank {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    return ec == std::errc{} && ptr == end;
}

bool parse_double(std::string_view s, double& value) {
    // from_chars for double is missing from older libstdc++.
    std::string copy(s);
    char* end = nullptr;
    value = std::strtod(copy.c_str(), &end);
    return !copy.empty() && end == copy.c_str() + copy.size() && std::isfinite(value);
}

std::string format_score(double score) {
    return fmt::format("{}", score);
}

std::vector<std::string> sorted_ids(const RunFile& run, const Qrels& qrels, const EvalOptions& options) {
    std::set<std::string> ids;
    for (const auto& [qid, entries] : run.queries()) {
        if (qrels.judgments(qid) == nullptr) {
            if (options.strict_qrels) throw InputError("run query \"" + qid + "\" has no judgments in qrels");
            continue;
        }
        ids.insert(qid);
    }
    if (options.complete) {
        for (const auto& [qid, judged] : qrels.queries()) ids.insert(qid);
    }
    return {ids.begin(), ids.end()};
}

template <typename PerQuery>
MetricReport evaluate_with(const RunFile& run, const Qrels& qrels, std::string metric, std::size_t k,
                           const EvalOptions& options, PerQuery&& per_query) {
    if (k == 0) throw InputError("metric cutoff k must be >= 1");
    MetricReport report;
    report.metric = std::move(metric);
    report.k = k;
    static const std::vector<RunEntry> kEmpty;
    for (const auto& qid : sorted_ids(run, qrels, options)) {
        const auto& judged = *qrels.judgments(qid);
        if (options.exclude_zero_relevant && relevant_count(judged) == 0) continue;
        const auto* entries = run.entries(qid);
        report.per_query.emplace_back(qid, per_query(entries ? *entries : kEmpty, judged, k));
    }
    double sum = 0.0;
    for (const auto& [qid, value] : report.per_query) sum += value;
    report.mean = report.per_query.empty() ? 0.0 : sum / static_cast<double>(report.per_query.size());
    return report;
}

}  // namespace

void Qrels::add(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) throw InputError("negative relevance grade for (" + query_id + ", " + doc_id + ")");
    auto& judged = by_query_[query_id];
    auto [it, inserted] = judged.emplace(doc_id, grade);
    if (inserted) {
        ++num_judgments_;
    } else if (it->second != grade) {
        throw InputError("conflicting grades for (" + query_id + ", " + doc_id + ")");
    }
}

const std::map<std::string, int>* Qrels::judgments(std::string_view query_id) const {
    auto it = by_query_.find(query_id);
    return it == by_query_.end() ? nullptr : &it->second;
}

Qrels Qrels::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open qrels file: " + path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        std::string_view qid, doc, grade_text;
        if (fields.size() == 4) {
            qid = fields[0];
            doc = fields[2];
            grade_text = fields[3];
        } else if (fields.size() == 3) {
            qid = fields[0];
            doc = fields[1];
            grade_text = fields[2];
        } else {
            throw InputError(at_line(path, line_no, "expected \"query_id 0 doc_id grade\""));
        }
        int grade = 0;
        if (!parse_number(grade_text, grade)) {
            if (line_no == 1 && fields.size() == 3) continue;  // "query-id corpus-id score" header
            throw InputError(at_line(path, line_no, "grade is not an integer: " + std::string(grade_text)));
        }
        try {
            qrels.add(std::string(qid), std::string(doc), grade);
        } catch (const InputError& e) {
            throw InputError(at_line(path, line_no, e.what()));
        }
    }
    if (qrels.num_judgments() == 0) throw InputError("qrels file has no judgments: " + path);
    return qrels;
}

std::size_t relevant_count(const std::map<std::string, int>& judgments) {
    return static_cast<std::size_t>(
        std::count_if(judgments.begin(), judgments.end(), [](const auto& e) { return e.second > 0; }));
}

void RunFile::add(const std::string& query_id, const ScoredList& ranked) {
    std::vector<RunEntry> entries;
    entries.reserve(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) entries.push_back({ranked[i].doc_id, ranked[i].score, i + 1});
    add(query_id, std::move(entries));
}

void RunFile::add(const std::string& query_id, std::vector<RunEntry> entries) {
    if (index_.contains(query_id)) throw InputError("query \"" + query_id + "\" already present in run");
    index_.emplace(query_id, queries_.size());
    queries_.emplace_back(query_id, std::move(entries));
}

const std::vector<RunEntry>* RunFile::entries(std::string_view query_id) const {
    auto it = index_.find(query_id);
    return it == index_.end() ? nullptr : &queries_[it->second].second;
}

void RunFile::validate() const {
    for (const auto& [qid, entries] : queries_) {
        std::set<std::string_view> seen;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            if (e.rank != i + 1) {
                throw InputError(fmt::format("query {}: rank {} at position {} (ranks must be 1..n)", qid, e.rank, i + 1));
            }
            if (i > 0 && e.score > entries[i - 1].score) {
                throw InputError(fmt::format("query {}: score increases at rank {}", qid, e.rank));
            }
            if (!seen.insert(e.doc_id).second) {
                throw InputError(fmt::format("query {}: duplicate doc \"{}\"", qid, e.doc_id));
            }
        }
    }
}

RunFile RunFile::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open run file: " + path);
    RunFile run;
    std::vector<std::pair<std::string, std::vector<RunEntry>>> pending;
    std::map<std::string, std::size_t, std::less<>> where;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 6) {
            throw InputError(at_line(path, line_no, "expected \"query_id Q0 doc_id rank score tag\""));
        }
        RunEntry e;
        e.doc_id = std::string(fields[2]);
        if (!parse_number(fields[3], e.rank) || e.rank == 0) {
            throw InputError(at_line(path, line_no, "bad rank: " + std::string(fields[3])));
        }
        if (!parse_double(fields[4], e.score)) {
            throw InputError(at_line(path, line_no, "bad score: " + std::string(fields[4])));
        }
        const std::string qid(fields[0]);
        auto it = where.find(qid);
        if (it == where.end()) {
            it = where.emplace(qid, pending.size()).first;
            pending.emplace_back(qid, std::vector<RunEntry>{});
        }
        pending[it->second].second.push_back(std::move(e));
    }
    for (auto& [qid, entries] : pending) run.add(qid, std::move(entries));
    try {
        run.validate();
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
    return run;
}

void RunFile::write(std::ostream& out, std::string_view tag) const {
    for (const auto& [qid, entries] : queries_) {
        for (const auto& e : entries) {
            out << qid << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_score(e.score) << ' ' << tag << '\n';
        }
    }
}

void RunFile::write(const std::string& path, std::string_view tag) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write run file: " + path);
    write(out, tag);
    if (!out) throw Error("failed writing run file: " + path);
}

nlohmann::ordered_json MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["metric"] = metric;
    j["k"] = k;
    j["mean"] = mean;
    j["per_query"] = nlohmann::ordered_json::object();
    for (const auto& [qid, value] : per_query) j["per_query"][qid] = value;
    return j;
}

double ndcg(const std::vector<RunEntry>& ranked, const std::map<std::string, int>& judgments, std::size_t k) {
    std::vector<int> grades;
    for (const auto& [doc, grade] : judgments) {
        if (grade > 0) grades.push_back(grade);
    }
    if (grades.empty()) return 0.0;
    std::sort(grades.begin(), grades.end(), std::greater<>());
    auto gain = [](int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; };
    auto discount = [](std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); };

    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        auto it = judgments.find(ranked[i].doc_id);
        if (it != judgments.end() && it->second > 0) dcg += gain(it->second) / discount(i + 1);
    }
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) idcg += gain(grades[i]) / discount(i + 1);
    return dcg / idcg;
}

double recall(const std::vector<RunEntry>& ranked, const std::map<std::string, int>& judgments, std::size_t k) {
    const std::size_t relevant = relevant_count(judgments);
    if (relevant == 0) return 0.0;
    std::size_t found = 0;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        auto it = judgments.find(ranked[i].doc_id);
        if (it != judgments.end() && it->second > 0) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(relevant);
}

MetricReport ndcg_at_k(const RunFile& run, const Qrels& qrels, std::size_t k, const EvalOptions& options) {
    return evaluate_with(run, qrels, "ndcg", k, options, ndcg);
}

MetricReport recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k, const EvalOptions& options) {
    return evaluate_with(run, qrels, "recall", k, options, recall);
}

MetricSpec parse_metric(std::string_view text) {
    const auto at = text.find('@');
    MetricSpec spec;
    if (at != std::string_view::npos) {
        spec.metric = std::string(text.substr(0, at));
        std::transform(spec.metric.begin(), spec.metric.end(), spec.metric.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if ((spec.metric == "ndcg" || spec.metric == "recall") && parse_number(text.substr(at + 1), spec.k) &&
            spec.k > 0) {
            return spec;
        }
    }
    throw InputError("bad metric '" + std::string(text) + "' (expected ndcg@K or recall@K)");
}

MetricReport evaluate(const RunFile& run, const Qrels& qrels, const MetricSpec& spec, const EvalOptions& options) {
    if (spec.metric == "ndcg") return ndcg_at_k(run, qrels, spec.k, options);
    if (spec.metric == "recall") return recall_at_k(run, qrels, spec.k, options);
    throw InputError("unknown metric '" + spec.metric + "'");
}

std::string reports_to_json(const std::vector<MetricReport>& reports) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    return arr.dump(2) + "\n";
}

void print_reports(std::ostream& out, const std::vector<MetricReport>& reports) {
    std::set<std::string> ids;
    for (const auto& r : reports) {
        for (const auto& [qid, v] : r.per_query) ids.insert(qid);
    }
    std::size_t width = 5;
    for (const auto& id : ids) width = std::max(width, id.size());

    out << fmt::format("{:<{}}", "query", width);
    for (const auto& r : reports) out << fmt::format("  {:>10}", r.name());
    out << '\n';
    for (const auto& id : ids) {
        out << fmt::format("{:<{}}", id, width);
        for (const auto& r : reports) {
            auto it = std::find_if(r.per_query.begin(), r.per_query.end(), [&](const auto& e) { return e.first == id; });
            if (it == r.per_query.end()) {
                out << fmt::format("  {:>10}", "-");
            } else {
                out << fmt::format("  {:>10.4f}", it->second);
            }
        }
        out << '\n';
    }
    out << fmt::format("{:<{}}", "mean", width);
    for (const auto& r : reports) out << fmt::format("  {:>10.4f}", r.mean);
    out << '\n';
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path + ": malformed JSON: " + e.what());
    }
    if (!doc.is_array()) throw InputError(path + ": manifest must be a JSON array");
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
    };
    std::vector<ManifestEntry> out;
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& e = doc[i];
        auto field = [&](const char* key, bool required) -> std::string {
            if (!e.is_object() || !e.contains(key)) {
                if (required) throw InputError(fmt::format("{}: entry {} lacks \"{}\"", path, i, key));
                return {};
            }
            if (!e[key].is_string()) throw InputError(fmt::format("{}: entry {} \"{}\" must be a string", path, i, key));
            return e[key].get<std::string>();
        };
        ManifestEntry m;
        m.name = field("name", true);
        m.group = field("group", false);
        m.run_path = resolve(field("run", true));
        m.qrels_path = resolve(field("qrels", true));
        if (!names.insert(m.name).second) throw InputError(path + ": duplicate dataset name \"" + m.name + "\"");
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<GroupSummary> summarize_groups(const std::vector<ManifestEntry>& entries,
                                           const std::vector<std::vector<MetricReport>>& reports) {
    if (entries.size() != reports.size()) throw InputError("manifest and report counts differ");
    // group -> metric -> dataset means, groups in first-appearance order
    std::vector<std::string> group_order;
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    std::vector<std::string> metric_order;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        for (const auto& r : reports[i]) {
            if (std::find(metric_order.begin(), metric_order.end(), r.name()) == metric_order.end()) {
                metric_order.push_back(r.name());
            }
            for (const std::string& g : {entries[i].group, std::string("all")}) {
                if (g.empty()) continue;
                if (!values.contains(g)) group_order.push_back(g);
                values[g][r.name()].push_back(r.mean);
            }
        }
    }
    // Overall row last.
    std::stable_partition(group_order.begin(), group_order.end(), [](const auto& g) { return g != "all"; });
    std::vector<GroupSummary> out;
    for (const auto& g : group_order) {
        for (const auto& m : metric_order) {
            auto it = values[g].find(m);
            if (it == values[g].end()) continue;
            double sum = 0.0;
            for (double v : it->second) sum += v;
            out.push_back({g, m, sum / static_cast<double>(it->second.size()), it->second.size()});
        }
    }
    return out;
}

}  // namespace unitrank
