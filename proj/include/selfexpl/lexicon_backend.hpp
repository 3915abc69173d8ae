#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selfexpl/backend.hpp"

namespace selfexpl::backend {

// How the mock answers explanation prompts. faithful_argmax picks the input
// word with the highest own-prediction weight; fixed_word always uses its
// configured word; refuse and format_violator return canned non-answers so
// negative evaluation paths are testable by construction.
enum class ExplanationPolicy { faithful_argmax, fixed_word, refuse, format_violator };

const char* to_string(ExplanationPolicy p);
std::optional<ExplanationPolicy> explanation_policy_from_string(const std::string& s);

struct LexiconOptions {
    ExplanationPolicy policy = ExplanationPolicy::faithful_argmax;
    std::string fixed_word = "the";
    // With probability corrupt_rate (a pure hash of the input text), the
    // faithful_argmax policy swaps its chosen word for another input word.
    double corrupt_rate = 0.0;
    uint64_t corrupt_salt = 0;
};

// Deterministic linear bag-of-words classifier behind the ModelBackend
// interface: p(y|x) = softmax_y(bias_y + sum_{w in x} weight_{w,y}).
// Lookups normalize words (edge punctuation stripped, lowercased); unknown
// words weigh zero. Pure and reentrant.
class LexiconModel : public ModelBackend {
public:
    using Weights = std::map<std::string, double>;  // label -> weight

    LexiconModel(std::map<std::string, Weights> entries, Weights bias,
                 std::vector<std::string> label_order, LexiconOptions options = {});

    // Lexicon file: jsonl of {"word": ..., "weights": {label: number, ...}}
    // plus one {"bias": {label: number, ...}} record whose key order fixes
    // the label order for generation-side decisions.
    static LexiconModel from_file(const std::string& path, LexiconOptions options = {});

    Capabilities capabilities() const override { return Capabilities{true, true}; }
    std::string identity() const override;

    ClassifyResult classify(const ChatTranscript& transcript,
                            const std::vector<std::string>& labels) override;
    GenerateResult generate(const ChatTranscript& transcript) override;

    // Exposed for tests and oracles.
    std::vector<double> label_scores(const std::vector<std::string>& words,
                                     const std::vector<std::string>& labels) const;
    const std::vector<std::string>& label_order() const { return label_order_; }

private:
    std::map<std::string, Weights> entries_;  // normalized word -> weights
    Weights bias_;
    std::vector<std::string> label_order_;
    LexiconOptions options_;

    double weight(const std::string& word, const std::string& label) const;
    std::string answer_explanation(const ChatTranscript& transcript, const std::string& last_user);
    std::string answer_fill(const std::string& prompt);
    std::size_t pick_word_index(const std::vector<std::string>& words,
                                const std::string& predicted) const;
};

}  // namespace selfexpl::backend
