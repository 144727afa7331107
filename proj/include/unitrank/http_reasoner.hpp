#pragma once

#include "unitrank/query_understanding.hpp"

#include <atomic>

namespace unitrank {

/// Reasoner backed by a chat-completion style HTTP endpoint.
///
/// Each call POSTs {"model", "messages": [{"role": "user", "content"}],
/// "temperature"} to config.endpoint and reads the generated text at
/// config.text_path. A bearer token is sent when the environment variable
/// named by config.token_env is set. Failures (transport errors, 5xx and 429
/// responses, unusable output) are retried up to config.retries attempts with
/// exponential backoff; other 4xx responses fail immediately.
class HttpReasoner final : public Reasoner {
public:
    explicit HttpReasoner(ReasonerConfig config);

    std::vector<std::string> decompose(const Query& query, Mode mode) override;
    std::string interpret(const Query& query, std::string_view sub_query, Mode mode) override;

    /// Requests sent so far, including retries.
    std::size_t requests_sent() const noexcept { return requests_.load(); }

private:
    template <typename Parse>
    auto call_with_retries(const std::string& prompt, Parse&& parse) -> decltype(parse(std::string{}));
    std::string post(const std::string& prompt);

    ReasonerConfig config_;
    PromptTemplates prompts_;
    std::string scheme_host_port_;
    std::string path_;
    std::atomic<std::size_t> requests_{0};
};

}  // namespace unitrank
