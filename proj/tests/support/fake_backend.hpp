#pragma once

#include <atomic>
#include <functional>

#include "selfexpl/backend.hpp"

namespace selfexpl::testsupport {

// Lambda-driven ModelBackend for exercising exact error and format paths.
class FakeBackend : public backend::ModelBackend {
public:
    std::function<backend::ClassifyResult(const ChatTranscript&, const std::vector<std::string>&)>
        on_classify;
    std::function<backend::GenerateResult(const ChatTranscript&)> on_generate;
    backend::Capabilities caps{true, true};

    mutable std::atomic<std::size_t> classify_calls{0};
    mutable std::atomic<std::size_t> generate_calls{0};

    backend::Capabilities capabilities() const override { return caps; }
    std::string identity() const override { return "fake/test"; }

    backend::ClassifyResult classify(const ChatTranscript& transcript,
                                     const std::vector<std::string>& labels) override {
        backend::check_classify_preconditions(transcript, labels);
        ++classify_calls;
        return on_classify(transcript, labels);
    }

    backend::GenerateResult generate(const ChatTranscript& transcript) override {
        ++generate_calls;
        return on_generate(transcript);
    }
};

inline backend::ClassifyResult one_hot(const std::vector<std::string>& labels, std::size_t index) {
    backend::ClassifyResult result;
    result.ok = true;
    result.distribution.assign(labels.size(), 0.0);
    result.distribution[index] = 1.0;
    result.argmax_index = index;
    result.label = labels[index];
    return result;
}

}  // namespace selfexpl::testsupport
