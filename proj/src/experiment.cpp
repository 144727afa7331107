#include "unitrank/experiment.hpp"

#include "unitrank/errors.hpp"
#include "unitrank/http_reasoner.hpp"
#include "unitrank/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace unitrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string as_string(const std::string& key, const json& v) {
    if (!v.is_string()) throw InputError("setting " + key + " expects a string");
    return v.get<std::string>();
}

double as_double(const std::string& key, const json& v) {
    if (!v.is_number()) throw InputError("setting " + key + " expects a number");
    return v.get<double>();
}

std::size_t as_size(const std::string& key, const json& v) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
    throw InputError("setting " + key + " expects a non-negative integer");
}

bool as_bool(const std::string& key, const json& v) {
    if (!v.is_boolean()) throw InputError("setting " + key + " expects true or false");
    return v.get<bool>();
}

std::string resolve_path(const std::string& key, const json& v, const std::string& base_dir) {
    const std::string p = as_string(key, v);
    if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

void require_file(const std::string& what, const std::string& path) {
    if (path.empty()) throw InputError(what + " is not configured");
    if (!fs::exists(path)) throw InputError(what + " not found: " + path);
}

// Re-raises an error with the pipeline stage prepended, keeping its category.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const InputError& e) {
        throw InputError(std::string("[") + stage + "] " + e.what());
    } catch (const BackendError& e) {
        throw BackendError(std::string("[") + stage + "] " + e.what());
    } catch (const Error& e) {
        throw Error(std::string("[") + stage + "] " + e.what());
    }
}

std::string analyzer_key(const AnalyzerConfig& a) {
    std::string key = fmt::format("{}{}{}", a.lowercase ? 'L' : 'l', a.fold_ascii ? 'F' : 'f', to_string(a.stemmer));
    for (const auto& w : a.stopwords) key += "|" + w;
    return key;
}

RetrievalUnit original_unit(const Query& q) {
    return {"q" + q.query_id + "#orig", q.text, ""};
}

}  // namespace

std::string_view to_string(UnitSource s) {
    switch (s) {
        case UnitSource::cache: return "cache";
        case UnitSource::http: return "http";
        case UnitSource::none: return "none";
    }
    return "cache";
}

UnitSource unit_source_from_string(std::string_view name) {
    if (name == "cache") return UnitSource::cache;
    if (name == "http") return UnitSource::http;
    if (name == "none") return UnitSource::none;
    throw InputError("unknown unit_source '" + std::string(name) + "' (expected cache, http or none)");
}

json parse_setting_value(std::string_view text) {
    auto value = json::parse(text, nullptr, false);
    if (value.is_discarded()) return json(std::string(text));
    return value;
}

void ExperimentConfig::apply_setting(const std::string& key, const json& v, const std::string& base_dir) {
    if (key == "corpus") corpus = resolve_path(key, v, base_dir);
    else if (key == "queries") queries = resolve_path(key, v, base_dir);
    else if (key == "qrels") qrels = resolve_path(key, v, base_dir);
    else if (key == "index") index = resolve_path(key, v, base_dir);
    else if (key == "exclusions") exclusions = resolve_path(key, v, base_dir);
    else if (key == "mode") mode = mode_from_string(as_string(key, v));
    else if (key == "unit_source") unit_source = unit_source_from_string(as_string(key, v));
    else if (key == "unit_cache") reasoner.cache_path = resolve_path(key, v, base_dir);
    else if (key == "interpret") reasoner.interpret = as_bool(key, v);
    else if (key == "include_original") include_original = as_bool(key, v);
    else if (key == "max_units") {
        if (v.is_null() || (v.is_string() && v.get<std::string>() == "none")) {
            reasoner.max_units.reset();
        } else {
            reasoner.max_units = as_size(key, v);
        }
    }
    else if (key == "skip_failed") skip_failed = as_bool(key, v);
    else if (key == "fusion") fusion.method = fusion_method_from_string(as_string(key, v));
    else if (key == "rrf_k") fusion.rrf_k = as_double(key, v);
    else if (key == "final_depth") fusion.final_depth = as_size(key, v);
    else if (key == "k1") sparse.k1 = as_double(key, v);
    else if (key == "b") sparse.b = as_double(key, v);
    else if (key == "k3") sparse.k3 = as_double(key, v);
    else if (key == "lambda") dense.lambda = as_double(key, v);
    else if (key == "normalize") dense.normalize = as_bool(key, v);
    else if (key == "top_k") top_k = as_size(key, v);
    else if (key == "doc_embeddings") doc_embeddings = resolve_path(key, v, base_dir);
    else if (key == "query_embeddings") query_embeddings = resolve_path(key, v, base_dir);
    else if (key == "lowercase") analyzer.lowercase = as_bool(key, v);
    else if (key == "fold_ascii") analyzer.fold_ascii = as_bool(key, v);
    else if (key == "stemmer") analyzer.stemmer = stemmer_from_string(as_string(key, v));
    else if (key == "stopwords") {
        const std::string s = as_string(key, v);
        if (s == "default") {
            analyzer.stopwords = english_stopwords();
            stopwords = s;
        } else if (s == "none") {
            analyzer.stopwords.clear();
            stopwords = s;
        } else {
            stopwords = resolve_path(key, v, base_dir);
            analyzer.stopwords = load_stopwords(stopwords);
        }
    }
    else if (key == "output_dir") output_dir = resolve_path(key, v, base_dir);
    else if (key == "jobs") jobs = as_size(key, v);
    else if (key == "tag") {
        tag = as_string(key, v);
        if (tag.empty() || tag.find_first_of(" \t\r\n") != std::string::npos) {
            throw InputError("tag must be non-empty and contain no whitespace");
        }
    }
    else if (key == "metrics") {
        std::vector<std::string> list;
        if (v.is_string()) {
            std::stringstream in(v.get<std::string>());
            for (std::string item; std::getline(in, item, ',');) {
                if (!item.empty()) list.push_back(item);
            }
        } else if (v.is_array()) {
            for (const auto& item : v) list.push_back(as_string(key, item));
        } else {
            throw InputError("setting metrics expects a list of names");
        }
        for (const auto& m : list) parse_metric(m);
        if (list.empty()) throw InputError("metrics must name at least one metric");
        metrics = std::move(list);
    }
    else if (key == "exclude_zero_relevant") eval.exclude_zero_relevant = as_bool(key, v);
    else if (key == "strict_qrels") eval.strict_qrels = as_bool(key, v);
    else if (key == "reasoner_endpoint") reasoner.endpoint = as_string(key, v);
    else if (key == "reasoner_model") reasoner.model_name = as_string(key, v);
    else if (key == "reasoner_temperature") reasoner.temperature = as_double(key, v);
    else if (key == "reasoner_timeout_ms") reasoner.timeout = std::chrono::milliseconds(as_size(key, v));
    else if (key == "reasoner_retries") reasoner.retries = static_cast<int>(as_size(key, v));
    else if (key == "reasoner_backoff_ms") reasoner.backoff = std::chrono::milliseconds(as_size(key, v));
    else if (key == "reasoner_token_env") reasoner.token_env = as_string(key, v);
    else if (key == "reasoner_text_path") reasoner.text_path = as_string(key, v);
    else if (key == "prompt_dir") reasoner.prompt_dir = resolve_path(key, v, base_dir);
    else throw InputError("unknown setting '" + key + "'");
}

void ExperimentConfig::apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw InputError("expected key=value, got '" + std::string(assignment) + "'");
    }
    apply_setting(std::string(assignment.substr(0, eq)), parse_setting_value(assignment.substr(eq + 1)),
                  fs::current_path().string());
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object()) throw InputError(path + ": config must be a JSON object");
    ExperimentConfig config;
    const std::string base = fs::absolute(path).parent_path().string();
    for (const auto& [key, value] : doc.items()) {
        try {
            config.apply_setting(key, value, base);
        } catch (const InputError& e) {
            throw InputError(path + ": " + e.what());
        }
    }
    return config;
}

void ExperimentConfig::validate(bool need_qrels) const {
    sparse.validate();
    dense.validate();
    fusion.validate();
    if (top_k == 0) throw InputError("top_k must be >= 1");
    check_depths(top_k, fusion.final_depth);

    require_file("queries file", queries);
    if (need_qrels) require_file("qrels file", qrels);
    if (!qrels.empty()) require_file("qrels file", qrels);
    if (!exclusions.empty()) require_file("exclusions file", exclusions);
    if (mode == Mode::sparse) {
        if (!index.empty()) {
            require_file("index file", index);
        } else {
            require_file("corpus file", corpus);
        }
    } else {
        require_file("document embeddings", doc_embeddings);
        require_file("query embeddings", query_embeddings);
    }
    switch (unit_source) {
        case UnitSource::cache:
            require_file("unit cache", reasoner.cache_path);
            break;
        case UnitSource::http: {
            auto r = reasoner;
            r.backend = ReasonerBackend::http;
            r.validate();
            if (!r.prompt_dir.empty()) require_file("prompt directory", r.prompt_dir);
            break;
        }
        case UnitSource::none:
            break;
    }
    if (reasoner.max_units && *reasoner.max_units == 0) throw InputError("max_units must be >= 1");
}

std::size_t ExperimentConfig::effective_jobs() const {
    return jobs == 0 ? default_jobs() : jobs;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus;
    j["queries"] = queries;
    j["qrels"] = qrels;
    j["index"] = index;
    j["exclusions"] = exclusions;
    j["mode"] = to_string(mode);
    j["unit_source"] = to_string(unit_source);
    j["unit_cache"] = reasoner.cache_path;
    j["interpret"] = reasoner.interpret;
    j["include_original"] = include_original;
    if (reasoner.max_units) {
        j["max_units"] = *reasoner.max_units;
    } else {
        j["max_units"] = nullptr;
    }
    j["skip_failed"] = skip_failed;
    j["fusion"] = to_string(fusion.method);
    j["rrf_k"] = fusion.rrf_k;
    j["final_depth"] = fusion.final_depth;
    j["k1"] = sparse.k1;
    j["b"] = sparse.b;
    j["k3"] = sparse.k3;
    j["lambda"] = dense.lambda;
    j["normalize"] = dense.normalize;
    j["top_k"] = top_k;
    j["doc_embeddings"] = doc_embeddings;
    j["query_embeddings"] = query_embeddings;
    j["lowercase"] = analyzer.lowercase;
    j["fold_ascii"] = analyzer.fold_ascii;
    j["stopwords"] = stopwords;
    j["stemmer"] = to_string(analyzer.stemmer);
    j["output_dir"] = output_dir;
    j["jobs"] = jobs;
    j["tag"] = tag;
    j["metrics"] = metrics;
    j["exclude_zero_relevant"] = eval.exclude_zero_relevant;
    j["strict_qrels"] = eval.strict_qrels;
    j["reasoner_endpoint"] = reasoner.endpoint;
    j["reasoner_model"] = reasoner.model_name;
    j["reasoner_temperature"] = reasoner.temperature;
    j["reasoner_timeout_ms"] = reasoner.timeout.count();
    j["reasoner_retries"] = reasoner.retries;
    j["reasoner_backoff_ms"] = reasoner.backoff.count();
    j["reasoner_token_env"] = reasoner.token_env;
    j["reasoner_text_path"] = reasoner.text_path;
    j["prompt_dir"] = reasoner.prompt_dir;
    return j;
}

Exclusions load_exclusions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open exclusions file: " + path);
    Exclusions out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string qid, doc, extra;
        if (!(fields >> qid)) continue;
        if (!(fields >> doc) || (fields >> extra)) {
            throw InputError(at_line(path, line_no, "expected \"query_id doc_id\""));
        }
        out[qid].insert(doc);
    }
    return out;
}

template <typename T, typename Load>
std::shared_ptr<const T> BenchmarkContext::get(const std::string& key, Load&& load) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = items_.find(key); it != items_.end()) return std::static_pointer_cast<const T>(it->second);
    }
    auto value = std::make_shared<const T>(load());
    std::lock_guard lock(mutex_);
    items_.emplace(key, value);
    return value;
}

std::shared_ptr<const SparseIndex> BenchmarkContext::sparse_index(const ExperimentConfig& c) {
    if (!c.index.empty()) {
        return get<SparseIndex>("index:" + c.index, [&] {
            auto index = SparseIndex::load(c.index);
            if (!(index.analyzer() == c.analyzer)) {
                spdlog::warn("index {} was built with a different analyzer; using the index's settings", c.index);
            }
            return index;
        });
    }
    return get<SparseIndex>("corpus:" + c.corpus + "#" + analyzer_key(c.analyzer),
                            [&] { return SparseIndex::build(ingest_corpus(c.corpus, c.analyzer)); });
}

std::shared_ptr<const DenseIndex> BenchmarkContext::dense_index(const ExperimentConfig& c) {
    return get<DenseIndex>(fmt::format("docemb:{}#{}", c.doc_embeddings, c.dense.normalize),
                           [&] { return DenseIndex::build(load_embeddings(c.doc_embeddings), c.dense.normalize); });
}

std::shared_ptr<const EmbeddingFile> BenchmarkContext::query_embeddings(const ExperimentConfig& c) {
    return get<EmbeddingFile>("qemb:" + c.query_embeddings, [&] { return load_embeddings(c.query_embeddings); });
}

std::shared_ptr<const std::vector<Query>> BenchmarkContext::queries(const ExperimentConfig& c) {
    return get<std::vector<Query>>("queries:" + c.queries, [&] { return load_queries(c.queries); });
}

std::shared_ptr<const Qrels> BenchmarkContext::qrels(const ExperimentConfig& c) {
    return get<Qrels>("qrels:" + c.qrels, [&] { return Qrels::read(c.qrels); });
}

std::shared_ptr<const UnitCache> BenchmarkContext::unit_cache(const ExperimentConfig& c) {
    return get<UnitCache>("cache:" + c.reasoner.cache_path, [&] { return UnitCache::load(c.reasoner.cache_path); });
}

std::shared_ptr<const Exclusions> BenchmarkContext::exclusions(const ExperimentConfig& c) {
    if (c.exclusions.empty()) return std::make_shared<const Exclusions>();
    return get<Exclusions>("excl:" + c.exclusions, [&] { return load_exclusions(c.exclusions); });
}

std::vector<UnitSet> resolve_units(const ExperimentConfig& config, BenchmarkContext& ctx) {
    const auto queries = in_stage("queries", [&] { return ctx.queries(config); });
    std::unique_ptr<Reasoner> reasoner;
    ReasonerConfig rc = config.reasoner;
    if (config.unit_source == UnitSource::cache) {
        rc.backend = ReasonerBackend::cache;
        reasoner = std::make_unique<CacheReasoner>(*in_stage("units", [&] { return ctx.unit_cache(config); }));
    } else if (config.unit_source == UnitSource::http) {
        rc.backend = ReasonerBackend::http;
        reasoner = std::make_unique<HttpReasoner>(rc);
    }

    std::vector<std::optional<UnitSet>> sets(queries->size());
    auto build_one = [&](std::size_t i) {
        const Query& q = (*queries)[i];
        try {
            UnitSet set;
            if (reasoner) {
                set = build_unit_set(q, config.mode, *reasoner, rc);
            } else {
                set = {q.query_id, q.text, {original_unit(q)}, config.mode};
            }
            if (config.include_original && reasoner) set.units.push_back(original_unit(q));
            sets[i] = std::move(set);
        } catch (const Error& e) {
            if (!config.skip_failed) throw;
            spdlog::warn("skipping query {}: {}", q.query_id, e.what());
        }
    };
    in_stage("units", [&] { parallel_for(queries->size(), config.effective_jobs(), build_one); });
    std::vector<UnitSet> out;
    for (auto& s : sets) {
        if (s) out.push_back(std::move(*s));
    }
    return out;
}

RunFile retrieve_run(const ExperimentConfig& config, const std::vector<UnitSet>& units, BenchmarkContext& ctx) {
    config.fusion.validate();
    check_depths(config.top_k, config.fusion.final_depth);
    std::shared_ptr<const SparseIndex> sparse;
    std::shared_ptr<const DenseIndex> dense;
    std::shared_ptr<const EmbeddingFile> query_embs;
    if (config.mode == Mode::sparse) {
        config.sparse.validate();
        sparse = in_stage("index", [&] { return ctx.sparse_index(config); });
    } else {
        config.dense.validate();
        dense = in_stage("embeddings", [&] { return ctx.dense_index(config); });
        query_embs = in_stage("embeddings", [&] { return ctx.query_embeddings(config); });
    }
    const auto excluded = in_stage("exclusions", [&] { return ctx.exclusions(config); });

    auto retrieve_unit = [&](const RetrievalUnit& unit) {
        if (sparse) return sparse_retrieve_topk(unit, *sparse, config.sparse, config.top_k);
        std::optional<std::string_view> interp_id;
        const std::string interp = interp_embedding_id(unit.unit_id);
        if (!unit.interpretation.empty()) interp_id = interp;
        return dense_retrieve_topk(subq_embedding_id(unit.unit_id), interp_id, *query_embs, *dense, config.dense,
                                   config.top_k);
    };

    std::vector<ScoredList> results(units.size());
    in_stage("retrieve", [&] {
        parallel_for(units.size(), config.effective_jobs(), [&](std::size_t i) {
            const UnitSet& set = units[i];
            std::vector<ScoredList> lists;
            if (config.fusion.method == FusionMethod::concat) {
                lists.push_back(retrieve_unit(concat_units(set)));
            } else {
                for (const auto& unit : set.units) lists.push_back(retrieve_unit(unit));
            }
            const std::set<std::string>* drop = nullptr;
            if (auto it = excluded->find(set.query_id); it != excluded->end()) drop = &it->second;
            const std::size_t depth = config.fusion.final_depth + (drop ? drop->size() : 0);
            ScoredList fused = fuse(lists, config.fusion, depth);
            if (drop) {
                std::erase_if(fused, [&](const ScoredDoc& d) { return drop->contains(d.doc_id); });
            }
            if (fused.size() > config.fusion.final_depth) fused.resize(config.fusion.final_depth);
            results[i] = std::move(fused);
        });
    });

    RunFile run;
    for (std::size_t i = 0; i < units.size(); ++i) run.add(units[i].query_id, results[i]);
    return run;
}

std::vector<MetricReport> evaluate_run(const RunFile& run, const Qrels& qrels, const std::vector<std::string>& metrics,
                                       const EvalOptions& options) {
    std::vector<MetricReport> out;
    for (const auto& m : metrics) out.push_back(evaluate(run, qrels, parse_metric(m), options));
    return out;
}

BenchmarkResult run_benchmark(const ExperimentConfig& config, BenchmarkContext& ctx) {
    in_stage("config", [&] { config.validate(false); });
    BenchmarkResult result;
    const auto units = resolve_units(config, ctx);
    result.run = retrieve_run(config, units, ctx);
    if (!config.qrels.empty()) {
        const auto qrels = in_stage("qrels", [&] { return ctx.qrels(config); });
        result.reports = in_stage("eval", [&] { return evaluate_run(result.run, *qrels, config.metrics, config.eval); });
    }
    return result;
}

BenchmarkResult run_benchmark(const ExperimentConfig& config) {
    BenchmarkContext ctx;
    return run_benchmark(config, ctx);
}

void write_outputs(const ExperimentConfig& config, const BenchmarkResult& result) {
    if (config.output_dir.empty()) throw InputError("output_dir is not configured");
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw InputError("cannot create output directory " + config.output_dir + ": " + ec.message());
    const fs::path dir(config.output_dir);
    result.run.write((dir / "run.trec").string(), config.tag);
    if (!result.reports.empty()) {
        std::ofstream out(dir / "metrics.json", std::ios::binary | std::ios::trunc);
        out << reports_to_json(result.reports);
        if (!out) throw Error("failed writing " + (dir / "metrics.json").string());
    }
    std::ofstream snap(dir / "config.resolved.json", std::ios::binary | std::ios::trunc);
    snap << config.to_json().dump(2) << '\n';
    if (!snap) throw Error("failed writing " + (dir / "config.resolved.json").string());
}

std::pair<std::string, std::vector<json>> parse_grid_axis(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size()) {
        throw InputError("expected key=v1,v2,..., got '" + std::string(text) + "'");
    }
    std::pair<std::string, std::vector<json>> axis{std::string(text.substr(0, eq)), {}};
    std::string_view rest = text.substr(eq + 1);
    while (true) {
        const auto comma = rest.find(',');
        axis.second.push_back(parse_setting_value(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    return axis;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepGrid& grid, BenchmarkContext& ctx) {
    std::size_t cells = 1;
    for (const auto& [key, values] : grid) {
        if (values.empty()) throw InputError("grid axis " + key + " has no values");
        cells *= values.size();
    }
    std::vector<SweepRow> rows;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        SweepRow row;
        ExperimentConfig config = base;
        std::size_t rem = cell;
        row.values.resize(grid.size());
        for (std::size_t a = grid.size(); a-- > 0;) {
            const auto& values = grid[a].second;
            row.values[a] = values[rem % values.size()];
            rem /= values.size();
        }
        try {
            for (std::size_t a = 0; a < grid.size(); ++a) config.apply_setting(grid[a].first, row.values[a]);
            config.validate(true);
            row.reports = run_benchmark(config, ctx).reports;
        } catch (const std::exception& e) {
            row.error = e.what();
            spdlog::warn("sweep cell {} failed: {}", cell + 1, row.error);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(const SweepGrid& grid, const std::vector<std::string>& metrics, const std::vector<SweepRow>& rows) {
    auto field = [](std::string s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string quoted = "\"";
        for (char c : s) {
            if (c == '"') quoted += '"';
            quoted += c;
        }
        return quoted + "\"";
    };
    std::string out;
    for (const auto& [key, values] : grid) out += field(key) + ",";
    for (const auto& m : metrics) out += field(m) + ",";
    out += "status\n";
    for (const auto& row : rows) {
        for (const auto& v : row.values) out += field(v.is_string() ? v.get<std::string>() : v.dump()) + ",";
        for (std::size_t i = 0; i < metrics.size(); ++i) {
            out += (row.error.empty() && i < row.reports.size() ? fmt::format("{}", row.reports[i].mean) : "") + ",";
        }
        out += row.error.empty() ? std::string("ok") : field("failed: " + row.error);
        out += '\n';
    }
    return out;
}

}  // namespace unitrank
