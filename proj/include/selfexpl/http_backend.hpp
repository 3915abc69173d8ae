#pragma once

#include <memory>
#include <string>

#include "selfexpl/backend.hpp"

namespace selfexpl::backend {

struct HttpBackendConfig {
    std::string endpoint;  // e.g. http://host:port/v1/chat/completions
    std::string model;
    std::string auth_token;       // sent as "Authorization: Bearer ..." when set
    int max_tokens = 256;         // generation requests
    int classify_max_tokens = 8;  // label queries
    bool request_logprobs = true;
    int top_logprobs = 20;
    int max_attempts = 3;  // transport retries, exponential backoff
    int backoff_ms = 100;
    int timeout_sec = 30;
};

// Chat-completion backend. Decoding is greedy (temperature 0). Label
// distributions come from first-token top-logprobs restricted to
// label-initial tokens, renormalized; servers without logprobs degrade to a
// one-hot vector parsed from the generated text.
class HttpChatBackend : public ModelBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ~HttpChatBackend() override;

    Capabilities capabilities() const override;
    std::string identity() const override;

    ClassifyResult classify(const ChatTranscript& transcript,
                            const std::vector<std::string>& labels) override;
    GenerateResult generate(const ChatTranscript& transcript) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace selfexpl::backend
