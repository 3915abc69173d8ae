#include "selfexpl/http_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "selfexpl/textops.hpp"

namespace selfexpl::backend {

namespace {

struct ParsedEndpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    const std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw std::invalid_argument("endpoint must include a scheme: " + endpoint);
    }
    const std::size_t path_start = endpoint.find('/', scheme + 3);
    if (path_start == std::string::npos) {
        return ParsedEndpoint{endpoint, "/"};
    }
    return ParsedEndpoint{endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

nlohmann::ordered_json transcript_to_messages(const ChatTranscript& transcript) {
    nlohmann::ordered_json messages = nlohmann::ordered_json::array();
    for (const auto& turn : transcript.turns()) {
        messages.push_back({{"role", to_string(turn.speaker)}, {"content", turn.text}});
    }
    return messages;
}

std::string ltrim(const std::string& s) {
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

std::string lowercase(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// A top-logprob token counts toward a label when, after trimming leading
// whitespace and lowercasing, it is a nonempty prefix of the label (or vice
// versa for multi-label-long tokens such as "Negative.").
bool token_matches_label(const std::string& token, const std::string& label) {
    const std::string t = lowercase(ltrim(token));
    const std::string l = lowercase(label);
    if (t.empty()) return false;
    if (t.size() <= l.size()) return l.compare(0, t.size(), t) == 0;
    return t.compare(0, l.size(), l) == 0;
}

}  // namespace

struct HttpChatBackend::Impl {
    HttpBackendConfig config;
    ParsedEndpoint endpoint;

    explicit Impl(HttpBackendConfig cfg) : config(std::move(cfg)), endpoint(parse_endpoint(config.endpoint)) {}

    struct Exchange {
        bool ok = false;
        std::string error;
        nlohmann::json body;
    };

    // POST with bounded exponential backoff. A failing instance is reported,
    // never dropped.
    Exchange post(const nlohmann::ordered_json& request) const {
        Exchange exchange;
        std::string last_error = "no attempts made";
        for (int attempt = 1; attempt <= std::max(config.max_attempts, 1); ++attempt) {
            if (attempt > 1) {
                const auto delay = std::chrono::milliseconds(
                    static_cast<long long>(config.backoff_ms) * (1LL << (attempt - 2)));
                std::this_thread::sleep_for(delay);
            }
            httplib::Client client(endpoint.origin);
            client.set_connection_timeout(config.timeout_sec, 0);
            client.set_read_timeout(config.timeout_sec, 0);
            httplib::Headers headers;
            if (!config.auth_token.empty()) {
                headers.emplace("Authorization", "Bearer " + config.auth_token);
            }
            auto res = client.Post(endpoint.path, headers, request.dump(), "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
            if (body.is_discarded()) {
                last_error = "response body is not valid json";
                continue;
            }
            exchange.ok = true;
            exchange.body = std::move(body);
            return exchange;
        }
        exchange.error = last_error;
        return exchange;
    }

    nlohmann::ordered_json base_request(const ChatTranscript& transcript, int max_tokens) const {
        nlohmann::ordered_json request;
        request["model"] = config.model;
        request["messages"] = transcript_to_messages(transcript);
        request["temperature"] = 0;
        request["max_tokens"] = max_tokens;
        return request;
    }
};

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpChatBackend::~HttpChatBackend() = default;

Capabilities HttpChatBackend::capabilities() const {
    return Capabilities{impl_->config.request_logprobs, true};
}

std::string HttpChatBackend::identity() const { return "http/" + impl_->config.model; }

ClassifyResult HttpChatBackend::classify(const ChatTranscript& transcript,
                                         const std::vector<std::string>& labels) {
    check_classify_preconditions(transcript, labels);

    nlohmann::ordered_json request = impl_->base_request(transcript, impl_->config.classify_max_tokens);
    if (impl_->config.request_logprobs) {
        request["logprobs"] = true;
        request["top_logprobs"] = impl_->config.top_logprobs;
    }

    ClassifyResult result;
    const auto exchange = impl_->post(request);
    if (!exchange.ok) {
        result.error = exchange.error;
        return result;
    }

    std::string content;
    const nlohmann::json* logprob_entries = nullptr;
    try {
        const auto& choice = exchange.body.at("choices").at(0);
        content = choice.at("message").at("content").get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array() &&
            !choice["logprobs"]["content"].empty()) {
            const auto& first = choice["logprobs"]["content"][0];
            if (first.contains("top_logprobs") && first["top_logprobs"].is_array()) {
                logprob_entries = &first["top_logprobs"];
            }
        }
    } catch (const nlohmann::json::exception&) {
        result.error = "malformed chat completion response";
        return result;
    }

    if (logprob_entries != nullptr) {
        // Best logprob per label over label-initial tokens, renormalized.
        std::vector<double> mass(labels.size(), 0.0);
        bool any = false;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            double best = 0.0;
            bool found = false;
            for (const auto& entry : *logprob_entries) {
                if (!entry.contains("token") || !entry.contains("logprob")) continue;
                if (!token_matches_label(entry["token"].get<std::string>(), labels[i])) continue;
                const double lp = entry["logprob"].get<double>();
                if (!found || lp > best) {
                    best = lp;
                    found = true;
                }
            }
            if (found) {
                mass[i] = std::exp(best);
                any = true;
            }
        }
        if (any) {
            double sum = 0.0;
            for (double m : mass) sum += m;
            for (auto& m : mass) m /= sum;
            result.ok = true;
            result.distribution = std::move(mass);
            result.argmax_index = argmax_index(result.distribution);
            result.label = labels[result.argmax_index];
            return result;
        }
    }

    // One-hot fallback from the generated text.
    const auto matched = match_label_in_text(content, labels);
    if (!matched) {
        result.error = "unparseable-prediction: '" + content + "'";
        return result;
    }
    result.ok = true;
    result.distribution.assign(labels.size(), 0.0);
    result.distribution[*matched] = 1.0;
    result.argmax_index = *matched;
    result.label = labels[*matched];
    return result;
}

GenerateResult HttpChatBackend::generate(const ChatTranscript& transcript) {
    if (!transcript.ends_with_user()) {
        throw std::invalid_argument("generate: transcript must end with a user turn");
    }
    GenerateResult result;
    const auto exchange = impl_->post(impl_->base_request(transcript, impl_->config.max_tokens));
    if (!exchange.ok) {
        result.error = exchange.error;
        return result;
    }
    try {
        result.text = exchange.body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        result.error = "malformed chat completion response";
        return result;
    }
    result.ok = true;
    return result;
}

}  // namespace selfexpl::backend
