#include "unitrank/corpus.hpp"

#include "unitrank/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <unordered_set>

namespace unitrank {

namespace {

using nlohmann::json;

std::string required_string(const json& obj, const char* key, const std::string& path, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw InputError(at_line(path, line_no, std::string("missing key \"") + key + "\""));
    if (!it->is_string()) throw InputError(at_line(path, line_no, std::string("\"") + key + "\" must be a string"));
    return it->get<std::string>();
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

// Calls fn(object, line_no) for every non-blank line.
template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(at_line(path, line_no, std::string("malformed JSON: ") + e.what()));
        }
        if (!obj.is_object()) throw InputError(at_line(path, line_no, "expected a JSON object"));
        fn(obj, line_no);
    }
}

}  // namespace

CorpusStore CorpusStore::build(std::vector<Document> docs, const AnalyzerConfig& config) {
    if (docs.empty()) throw InputError("corpus is empty");
    std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].doc_id.empty()) throw InputError("empty doc_id in corpus");
        if (i > 0 && docs[i].doc_id == docs[i - 1].doc_id) {
            throw InputError("duplicate doc_id \"" + docs[i].doc_id + "\"");
        }
    }
    CorpusStore store;
    store.analyzer_ = config;
    for (auto& d : docs) {
        d.length_tokens = static_cast<std::uint32_t>(analyze(d.text, config).size());
        store.total_tokens_ += d.length_tokens;
    }
    store.docs_ = std::move(docs);
    store.avgdl_ = static_cast<double>(store.total_tokens_) / static_cast<double>(store.docs_.size());
    return store;
}

const Document* CorpusStore::find(std::string_view doc_id) const {
    auto it = std::lower_bound(docs_.begin(), docs_.end(), doc_id,
                               [](const Document& d, std::string_view id) { return d.doc_id < id; });
    if (it == docs_.end() || it->doc_id != doc_id) return nullptr;
    return &*it;
}

CorpusStore ingest_corpus(const std::string& path, const AnalyzerConfig& config) {
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
        Document d;
        d.doc_id = required_string(obj, "doc_id", path, line_no);
        d.text = required_string(obj, "text", path, line_no);
        if (d.doc_id.empty()) throw InputError(at_line(path, line_no, "empty doc_id"));
        if (!seen.insert(d.doc_id).second) {
            throw InputError(at_line(path, line_no, "duplicate doc_id \"" + d.doc_id + "\""));
        }
        docs.push_back(std::move(d));
    });
    if (docs.empty()) throw InputError("corpus file has no documents: " + path);
    return CorpusStore::build(std::move(docs), config);
}

CorpusStats corpus_stats(const CorpusStore& store) {
    if (store.num_docs() == 0) throw Error("corpus store is empty");
    return {store.num_docs(), store.avgdl()};
}

std::vector<Query> load_queries(const std::string& path) {
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    for_each_json_line(path, [&](const json& obj, std::size_t line_no) {
        Query q;
        q.query_id = required_string(obj, "query_id", path, line_no);
        q.text = required_string(obj, "text", path, line_no);
        if (q.query_id.empty()) throw InputError(at_line(path, line_no, "empty query_id"));
        if (!seen.insert(q.query_id).second) {
            throw InputError(at_line(path, line_no, "duplicate query_id \"" + q.query_id + "\""));
        }
        queries.push_back(std::move(q));
    });
    if (queries.empty()) throw InputError("query file has no queries: " + path);
    return queries;
}

}  // namespace unitrank
