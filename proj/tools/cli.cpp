#include "cli.hpp"

#include "unitrank/corpus.hpp"
#include "unitrank/errors.hpp"
#include "unitrank/eval.hpp"
#include "unitrank/experiment.hpp"
#include "unitrank/http_reasoner.hpp"
#include "unitrank/parallel.hpp"
#include "unitrank/sparse_index.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace unitrank::cli {

namespace {

namespace fs = std::filesystem;

struct AnalyzerFlags {
    bool no_lowercase{false};
    bool fold_ascii{false};
    std::string stopwords{"default"};
    std::string stemmer{"porter"};

    void add_to(CLI::App& cmd) {
        cmd.add_flag("--no-lowercase", no_lowercase, "Keep case");
        cmd.add_flag("--fold-ascii", fold_ascii, "Fold accented letters to ASCII");
        cmd.add_option("--stopwords", stopwords, "default, none or a word-list file")->capture_default_str();
        cmd.add_option("--stemmer", stemmer, "porter or none")->capture_default_str();
    }

    void apply(ExperimentConfig& config) const {
        config.apply_setting("lowercase", !no_lowercase);
        config.apply_setting("fold_ascii", fold_ascii);
        config.apply_setting("stopwords", stopwords);
        config.apply_setting("stemmer", stemmer);
    }
};

struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> overrides;

    void add_to(CLI::App& cmd) {
        cmd.add_option("-c,--config", config_path, "Experiment config (flat JSON object)");
        cmd.add_option("--set", overrides, "Override a setting: key=value (repeatable)");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
        for (const auto& o : overrides) config.apply_override(o);
        return config;
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path);
    out << text;
    if (!out) throw Error("failed writing " + path);
}

int cmd_ingest(const std::string& corpus, const std::string& out_path, const AnalyzerFlags& flags,
               std::ostream& out) {
    ExperimentConfig config;
    flags.apply(config);
    const auto store = ingest_corpus(corpus, config.analyzer);
    const auto index = SparseIndex::build(store);
    index.save(out_path);
    const auto stats = corpus_stats(store);
    out << "docs\t" << stats.num_docs << '\n'
        << "avgdl\t" << fmt::format("{}", stats.avgdl) << '\n'
        << "vocabulary\t" << index.vocabulary_size() << '\n';
    return 0;
}

struct UnderstandOptions {
    std::string queries;
    std::string cache;
    std::string mode{"sparse"};
    std::string expansions;
    std::size_t jobs{0};
    bool skip_failed{false};
    bool no_interpret{false};
    std::optional<std::size_t> max_units;
    ReasonerConfig reasoner;
    int timeout_ms{120000};
    int backoff_ms{500};
};

int cmd_understand(UnderstandOptions opt, std::ostream& err) {
    const Mode mode = mode_from_string(opt.mode);
    const auto queries = load_queries(opt.queries);
    UnitCache cache;
    if (fs::exists(opt.cache)) cache = UnitCache::load(opt.cache);

    std::vector<Query> missing;
    for (const auto& q : queries) {
        if (!cache.contains(q.query_id, mode)) missing.push_back(q);
    }
    if (missing.empty()) {
        err << fmt::format("all {} queries already cached for {} mode\n", queries.size(), to_string(mode));
        return 0;
    }

    std::vector<std::optional<UnitSet>> fetched(missing.size());
    if (!opt.expansions.empty()) {
        const auto expansions = load_expansions(opt.expansions);
        const auto sets = unit_sets_from_expansions(missing, expansions, mode);
        for (std::size_t i = 0; i < sets.size(); ++i) fetched[i] = sets[i];
    } else {
        if (opt.reasoner.endpoint.empty()) {
            throw InputError(fmt::format("{} queries are not cached (first: {}) and no --endpoint was given",
                                         missing.size(), missing.front().query_id));
        }
        ReasonerConfig rc = opt.reasoner;
        rc.backend = ReasonerBackend::http;
        rc.interpret = !opt.no_interpret;
        rc.max_units = opt.max_units;
        rc.timeout = std::chrono::milliseconds(opt.timeout_ms);
        rc.backoff = std::chrono::milliseconds(opt.backoff_ms);
        HttpReasoner reasoner(rc);
        const std::size_t jobs = opt.jobs == 0 ? default_jobs() : opt.jobs;
        parallel_for(missing.size(), jobs, [&](std::size_t i) {
            try {
                fetched[i] = build_unit_set(missing[i], mode, reasoner, rc);
            } catch (const Error& e) {
                if (!opt.skip_failed) throw;
                spdlog::warn("skipping query {}: {}", missing[i].query_id, e.what());
            }
        });
        err << fmt::format("{} reasoner requests sent\n", reasoner.requests_sent());
    }

    std::size_t added = 0;
    for (auto& set : fetched) {
        if (!set) continue;
        cache.insert(std::move(*set));
        ++added;
    }
    if (added > 0) cache.save(opt.cache);
    err << fmt::format("{} queries added to {}, {} already cached\n", added, opt.cache,
                       queries.size() - missing.size());
    return 0;
}

int cmd_retrieve(const ConfigFlags& flags, std::ostream& out, std::ostream& err) {
    ExperimentConfig config = flags.resolve();
    config.qrels.clear();
    config.validate(false);
    const auto result = run_benchmark(config);
    if (config.output_dir.empty()) {
        result.run.write(out, config.tag);
    } else {
        write_outputs(config, result);
        err << "wrote " << (fs::path(config.output_dir) / "run.trec").string() << '\n';
    }
    return 0;
}

struct EvalFlags {
    std::string run;
    std::string qrels;
    std::string manifest;
    std::vector<std::string> metrics{"ndcg@10", "recall@1"};
    std::string json_out;
    EvalOptions options;
};

int cmd_eval(const EvalFlags& flags, std::ostream& out) {
    if (!flags.manifest.empty()) {
        if (!flags.run.empty() || !flags.qrels.empty()) throw InputError("--manifest excludes --run and --qrels");
        const auto entries = load_manifest(flags.manifest);
        std::vector<std::vector<MetricReport>> reports;
        auto all = nlohmann::ordered_json::object();
        for (const auto& e : entries) {
            const auto run = RunFile::read(e.run_path);
            const auto qrels = Qrels::read(e.qrels_path);
            reports.push_back(evaluate_run(run, qrels, flags.metrics, flags.options));
            auto arr = nlohmann::ordered_json::array();
            for (const auto& r : reports.back()) arr.push_back(r.to_json());
            all["datasets"][e.name] = arr;
        }
        std::size_t width = 7;
        for (const auto& e : entries) width = std::max(width, e.name.size());
        out << fmt::format("{:<{}}", "dataset", width);
        for (const auto& m : flags.metrics) out << fmt::format("  {:>10}", m);
        out << '\n';
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out << fmt::format("{:<{}}", entries[i].name, width);
            for (const auto& r : reports[i]) out << fmt::format("  {:>10.4f}", r.mean);
            out << '\n';
        }
        const auto groups = summarize_groups(entries, reports);
        all["groups"] = nlohmann::ordered_json::array();
        for (const auto& g : groups) {
            out << fmt::format("{:<{}}  {:>10}  {:.4f}  ({} datasets)\n", g.group, width, g.metric, g.macro_mean,
                               g.datasets);
            all["groups"].push_back({{"group", g.group}, {"metric", g.metric}, {"macro_mean", g.macro_mean},
                                     {"datasets", g.datasets}});
        }
        if (!flags.json_out.empty()) write_text(flags.json_out, all.dump(2) + "\n");
        return 0;
    }
    if (flags.run.empty() || flags.qrels.empty()) throw InputError("eval needs --run and --qrels (or --manifest)");
    const auto run = RunFile::read(flags.run);
    const auto qrels = Qrels::read(flags.qrels);
    const auto reports = evaluate_run(run, qrels, flags.metrics, flags.options);
    print_reports(out, reports);
    if (!flags.json_out.empty()) write_text(flags.json_out, reports_to_json(reports));
    return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::vector<std::string>& axes, const std::string& csv_out,
              std::ostream& out, std::ostream& err) {
    ExperimentConfig config = flags.resolve();
    config.validate(true);
    SweepGrid grid;
    for (const auto& a : axes) grid.push_back(parse_grid_axis(a));
    if (grid.empty()) throw InputError("sweep needs at least one --grid axis");
    BenchmarkContext ctx;
    const auto rows = sweep(config, grid, ctx);
    const std::string csv = sweep_csv(grid, config.metrics, rows);
    if (csv_out.empty()) {
        out << csv;
    } else {
        write_text(csv_out, csv);
    }
    const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.error.empty(); });
    err << fmt::format("{} cells, {} failed\n", rows.size(), failed);
    return 0;
}

void init_logging(const std::string& level) {
    static const bool once = [] {
        spdlog::set_default_logger(spdlog::stderr_color_mt("unitrank"));
        spdlog::set_pattern("%^%l%$: %v");
        return true;
    }();
    (void)once;
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw InputError("unknown log level '" + level + "'");
    spdlog::set_level(lvl);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Retrieval with decomposed query units: indexing, retrieval, fusion and evaluation"};
    app.name("unitrank");
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

    std::string ingest_corpus_path, ingest_out;
    AnalyzerFlags analyzer_flags;
    auto* ingest = app.add_subcommand("ingest", "Index a JSONL corpus and print its statistics");
    ingest->add_option("--corpus", ingest_corpus_path, "Corpus JSONL")->required();
    ingest->add_option("-o,--out", ingest_out, "Index file to write")->required();
    analyzer_flags.add_to(*ingest);

    UnderstandOptions uo;
    auto* understand = app.add_subcommand("understand", "Build or extend a retrieval-unit cache");
    understand->add_option("--queries", uo.queries, "Queries JSONL")->required();
    understand->add_option("--cache", uo.cache, "Unit cache JSONL to create or extend")->required();
    understand->add_option("--mode", uo.mode, "sparse or dense")->capture_default_str();
    understand->add_option("--from-expansions", uo.expansions, "JSON object of query_id -> expansion text");
    understand->add_option("--endpoint", uo.reasoner.endpoint, "Chat-completion URL");
    understand->add_option("--model", uo.reasoner.model_name, "Model name sent to the endpoint");
    understand->add_option("--temperature", uo.reasoner.temperature)->capture_default_str();
    understand->add_option("--timeout-ms", uo.timeout_ms)->capture_default_str();
    understand->add_option("--retries", uo.reasoner.retries, "Attempts per call")->capture_default_str();
    understand->add_option("--backoff-ms", uo.backoff_ms, "First retry delay, doubled per attempt")
        ->capture_default_str();
    understand->add_option("--token-env", uo.reasoner.token_env, "Env var holding the bearer token")
        ->capture_default_str();
    understand->add_option("--text-path", uo.reasoner.text_path, "JSON pointer to the reply text")
        ->capture_default_str();
    understand->add_option("--prompt-dir", uo.reasoner.prompt_dir, "Directory overriding prompt templates");
    understand->add_option("--max-units", uo.max_units, "Keep at most this many sub-queries");
    understand->add_flag("--no-interpret", uo.no_interpret, "Decompose only");
    understand->add_flag("--skip-failed", uo.skip_failed, "Leave failing queries out instead of aborting");
    understand->add_option("-j,--jobs", uo.jobs, "Concurrent queries (0: all cores)");

    ConfigFlags retrieve_flags;
    auto* retrieve = app.add_subcommand("retrieve", "Retrieve and fuse; write a TREC run");
    retrieve_flags.add_to(*retrieve);

    EvalFlags ef;
    auto* eval = app.add_subcommand("eval", "Score a run against qrels");
    eval->add_option("--run", ef.run, "TREC run file");
    eval->add_option("--qrels", ef.qrels, "TREC qrels file");
    eval->add_option("--manifest", ef.manifest, "JSON list of {name, group, run, qrels}");
    eval->add_option("-m,--metric", ef.metrics, "ndcg@K or recall@K (repeatable)")->capture_default_str();
    eval->add_option("--json", ef.json_out, "Write the report JSON here");
    eval->add_flag("--exclude-zero-relevant", ef.options.exclude_zero_relevant,
                   "Drop queries without relevant documents");
    eval->add_flag("--strict", ef.options.strict_qrels, "Fail on run queries missing from qrels");
    eval->add_flag("--complete", ef.options.complete, "Score judged queries missing from the run as 0");

    ConfigFlags sweep_flags;
    std::vector<std::string> axes;
    std::string csv_out;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter grid and tabulate metrics");
    sweep_flags.add_to(*sweep_cmd);
    sweep_cmd->add_option("--grid", axes, "key=v1,v2,... (repeatable; first varies slowest)");
    sweep_cmd->add_option("-o,--out", csv_out, "CSV file (default: stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        init_logging(log_level);
        if (*ingest) return cmd_ingest(ingest_corpus_path, ingest_out, analyzer_flags, out);
        if (*understand) return cmd_understand(uo, err);
        if (*retrieve) return cmd_retrieve(retrieve_flags, out, err);
        if (*eval) {
            for (const auto& m : ef.metrics) parse_metric(m);
            return cmd_eval(ef, out);
        }
        if (*sweep_cmd) return cmd_sweep(sweep_flags, axes, csv_out, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace unitrank::cli
