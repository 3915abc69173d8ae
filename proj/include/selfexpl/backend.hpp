#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "selfexpl/types.hpp"

namespace selfexpl::backend {

struct Capabilities {
    bool supports_label_distribution = false;
    bool deterministic = false;
};

struct ClassifyResult {
    bool ok = false;
    std::string error;
    std::vector<double> distribution;  // over the requested labels, sums to 1
    std::size_t argmax_index = 0;      // ties broken by label order
    std::string label;                 // labels[argmax_index]
};

struct GenerateResult {
    bool ok = false;
    std::string error;
    std::string text;  // raw completion, untrimmed; the caller parses
};

// Uniform interface to a classifier-capable chat model. Implementations must
// be safe to call from multiple in-flight requests.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    virtual Capabilities capabilities() const = 0;
    virtual std::string identity() const = 0;

    // Pre: transcript ends with a user turn, labels nonempty (throws
    // std::invalid_argument otherwise). Data-level failures land in the
    // result, never as exceptions.
    virtual ClassifyResult classify(const ChatTranscript& transcript,
                                    const std::vector<std::string>& labels) = 0;
    virtual GenerateResult generate(const ChatTranscript& transcript) = 0;
};

// Runs fn(i) for i in [0, n) on up to `concurrency` worker threads. Callers
// write results into pre-sized slots, so output order never depends on
// scheduling. Exceptions escaping fn terminate; fn must capture failures in
// its result slot.
void parallel_for(std::size_t n, int concurrency, const std::function<void(std::size_t)>& fn);

// Positionally aligned batch helpers; per-request failures stay isolated in
// their result slots.
std::vector<ClassifyResult> batch_classify(ModelBackend& backend,
                                           const std::vector<ChatTranscript>& transcripts,
                                           const std::vector<std::string>& labels,
                                           int concurrency);
std::vector<GenerateResult> batch_generate(ModelBackend& backend,
                                           const std::vector<ChatTranscript>& transcripts,
                                           int concurrency);

// Numerically stable softmax.
std::vector<double> softmax(const std::vector<double>& scores);

// Argmax with ties broken by lowest index.
std::size_t argmax_index(const std::vector<double>& values);

// Finds which label a free-text answer names: exact normalized match first,
// then earliest whole-word occurrence (ties by label order). nullopt when no
// label is named.
std::optional<std::size_t> match_label_in_text(const std::string& text,
                                               const std::vector<std::string>& labels);

void check_classify_preconditions(const ChatTranscript& transcript,
                                  const std::vector<std::string>& labels);

}  // namespace selfexpl::backend
