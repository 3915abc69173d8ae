#include "selfexpl/backend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "selfexpl/textops.hpp"

namespace selfexpl::backend {

void parallel_for(std::size_t n, int concurrency, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::max(concurrency, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

std::vector<ClassifyResult> batch_classify(ModelBackend& backend,
                                           const std::vector<ChatTranscript>& transcripts,
                                           const std::vector<std::string>& labels,
                                           int concurrency) {
    std::vector<ClassifyResult> results(transcripts.size());
    parallel_for(transcripts.size(), concurrency,
                 [&](std::size_t i) { results[i] = backend.classify(transcripts[i], labels); });
    return results;
}

std::vector<GenerateResult> batch_generate(ModelBackend& backend,
                                           const std::vector<ChatTranscript>& transcripts,
                                           int concurrency) {
    std::vector<GenerateResult> results(transcripts.size());
    parallel_for(transcripts.size(), concurrency,
                 [&](std::size_t i) { results[i] = backend.generate(transcripts[i]); });
    return results;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    std::vector<double> out(scores.size(), 0.0);
    if (scores.empty()) return out;
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - max_score);
        sum += out[i];
    }
    for (auto& p : out) p /= sum;
    return out;
}

std::size_t argmax_index(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::optional<std::size_t> match_label_in_text(const std::string& text,
                                               const std::vector<std::string>& labels) {
    const std::string whole = textops::normalize_word(text);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (whole == textops::normalize_word(labels[i])) return i;
    }

    const auto words = textops::tokenize(text);
    std::optional<std::size_t> best;
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::string needle = textops::normalize_word(labels[i]);
        for (std::size_t pos = 0; pos < words.size(); ++pos) {
            if (textops::normalize_word(words[pos]) == needle) {
                if (!best || pos < best_pos) {
                    best = i;
                    best_pos = pos;
                }
                break;
            }
        }
    }
    return best;
}

void check_classify_preconditions(const ChatTranscript& transcript,
                                  const std::vector<std::string>& labels) {
    if (!transcript.ends_with_user()) {
        throw std::invalid_argument("classify: transcript must end with a user turn");
    }
    if (labels.empty()) {
        throw std::invalid_argument("classify: label list must be nonempty");
    }
}

}  // namespace selfexpl::backend
