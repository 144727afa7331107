#include "unitrank/http_reasoner.hpp"

#include "unitrank/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <thread>

namespace unitrank {

namespace {

struct SplitUrl {
    std::string scheme_host_port;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("endpoint must start with http:// or https://: " + url);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw InputError("unsupported endpoint scheme: " + scheme);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

// A client-side HTTP error; repeating the request cannot help.
struct RejectedRequest : BackendError {
    using BackendError::BackendError;
};

}  // namespace

HttpReasoner::HttpReasoner(ReasonerConfig config)
    : config_(std::move(config)), prompts_(PromptTemplates::load(config_.prompt_dir)) {
    config_.validate();
    auto split = split_url(config_.endpoint);
    scheme_host_port_ = std::move(split.scheme_host_port);
    path_ = std::move(split.path);
}

std::string HttpReasoner::post(const std::string& prompt) {
    httplib::Client client(scheme_host_port_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token != nullptr && *token != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    nlohmann::json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config_.temperature;

    ++requests_;
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw BackendError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw BackendError("endpoint returned HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw RejectedRequest("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) throw BackendError("endpoint returned a non-JSON body");
    const nlohmann::json::json_pointer pointer(config_.text_path);
    if (!reply.contains(pointer) || !reply.at(pointer).is_string()) {
        throw BackendError("no text at " + config_.text_path + " in endpoint response");
    }
    return reply.at(pointer).get<std::string>();
}

template <typename Parse>
auto HttpReasoner::call_with_retries(const std::string& prompt, Parse&& parse) -> decltype(parse(std::string{})) {
    for (int attempt = 1;; ++attempt) {
        std::string failure;
        try {
            return parse(post(prompt));
        } catch (const RejectedRequest&) {
            throw;
        } catch (const BackendError& e) {
            // Covers unusable model output too: the next sample may parse.
            failure = e.what();
        }
        if (attempt >= config_.retries) {
            throw BackendError(failure + " (after " + std::to_string(attempt) + " attempts)");
        }
        const auto delay = config_.backoff * (1LL << (attempt - 1));
        spdlog::warn("reasoner call failed ({}), retrying in {} ms", failure, delay.count());
        std::this_thread::sleep_for(delay);
    }
}

std::vector<std::string> HttpReasoner::decompose(const Query& query, Mode) {
    const auto prompt = render_prompt(prompts_.decompose, query.text);
    return call_with_retries(prompt, [](const std::string& raw) {
        std::vector<std::string> subs;
        for (auto& u : parse_reasoner_output(raw)) subs.push_back(std::move(u.sub_query));
        return subs;
    });
}

std::string HttpReasoner::interpret(const Query& query, std::string_view sub_query, Mode mode) {
    const auto& tmpl = mode == Mode::sparse ? prompts_.interpret_sparse : prompts_.interpret_dense;
    const auto prompt = render_prompt(tmpl, query.text, sub_query);
    return call_with_retries(prompt, [&](const std::string& raw) {
        const auto units = parse_reasoner_output(raw);
        const ParsedUnit* pick = &units.front();
        for (const auto& u : units) {
            if (u.sub_query == sub_query) {
                pick = &u;
                break;
            }
        }
        if (pick->interpretation.empty()) throw BackendError("empty interpretation in reasoner output");
        return pick->interpretation;
    });
}

}  // namespace unitrank
