#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selfexpl/backend.hpp"
#include "selfexpl/corpus.hpp"
#include "selfexpl/prompts.hpp"
#include "selfexpl/textops.hpp"
#include "selfexpl/types.hpp"

namespace selfexpl::construction {

struct InfluenceScore {
    std::size_t word_index = 0;
    std::string word;
    double score = 0.0;  // p(yhat | x) - p(yhat | x without this word)
};

struct AttributionResult {
    bool ok = false;
    std::string error;
    std::string instance_id;
    std::string predicted_label;
    double p_predicted = 0.0;
    std::vector<double> distribution;  // over task labels, on the full input
    std::vector<InfluenceScore> all_scores;
    std::size_t top_word_index = 0;  // argmax influence, ties by lowest index
    std::string top_word;
    bool degraded = false;  // one-hot-only backend: scores land in {0, 1}
};

// One classify on x plus one per single-position redaction: exactly m+1
// backend calls. Any classify failure fails the whole instance.
AttributionResult influence_all(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                                const corpus::LabeledInstance& instance,
                                const prompts::TemplateRegistry& registry, int concurrency = 1);

// Label with the second-highest probability; ties by label order. Throws
// std::invalid_argument with fewer than 2 labels.
std::string second_label(const std::vector<double>& distribution,
                         const std::vector<std::string>& labels);

struct PseudoExplanation {
    Style style = Style::attribution;
    std::string payload;  // word | redacted text | filled text
    std::string instance_id;
    std::string predicted_label;
};

PseudoExplanation build_pseudo_attribution(const AttributionResult& result);
PseudoExplanation build_pseudo_redaction(const AttributionResult& result,
                                         const textops::WordSequence& x);

struct CounterfactualFill {
    bool accepted = false;
    std::string rejection_reason;  // label-leak | redaction-token | not-one-word | no-edit
    std::string bar_label;         // second most probable label
    std::string fill_word;
    std::string filled_text;
};

struct CounterfactualOutcome {
    bool failed = false;  // generation failure after retries
    std::string error;
    CounterfactualFill fill;
    std::optional<PseudoExplanation> explanation;  // set when accepted
};

// Prompts the backend to fill the redacted slot with one word steering the
// prediction toward the runner-up label, then applies the acceptance filter.
// One re-prompt on unparseable output, then reject.
CounterfactualOutcome build_pseudo_counterfactual(backend::ModelBackend& backend,
                                                  const AttributionResult& result,
                                                  const textops::WordSequence& x,
                                                  const corpus::TaskSpec& task,
                                                  const corpus::LabeledInstance& instance,
                                                  const prompts::TemplateRegistry& registry);

// Parses "exactly one word" out of a fill completion; nullopt when the
// completion is empty or multi-word.
std::optional<std::string> parse_fill_word(const std::string& completion);

}  // namespace selfexpl::construction
