#include "selfexpl/construction.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace selfexpl::construction {

using backend::ClassifyResult;

AttributionResult influence_all(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                                const corpus::LabeledInstance& instance,
                                const prompts::TemplateRegistry& registry, int concurrency) {
    AttributionResult result;
    result.instance_id = instance.id;
    result.degraded = !backend.capabilities().supports_label_distribution;

    const auto x = textops::WordSequence::from_text(instance.input, instance.id + "/input");
    if (x.size() == 0) {
        result.error = "empty input";
        return result;
    }

    // Transcript 0 is the full input; transcript i+1 redacts position i.
    std::vector<ChatTranscript> transcripts;
    transcripts.reserve(x.size() + 1);
    transcripts.push_back(
        prompts::classification_transcript(registry, task, instance.input, instance.second_input));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto redacted = textops::redact(x, {i});
        transcripts.push_back(prompts::classification_transcript(registry, task, redacted.text(),
                                                                 instance.second_input));
    }

    const auto responses =
        backend::batch_classify(backend, transcripts, task.label_names, concurrency);
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (!responses[i].ok) {
            result.error = (i == 0 ? "classify failed on input: "
                                   : "classify failed on redaction " + std::to_string(i - 1) + ": ") +
                           responses[i].error;
            return result;
        }
    }

    const ClassifyResult& full = responses.front();
    result.predicted_label = full.label;
    result.p_predicted = full.distribution[full.argmax_index];
    result.distribution = full.distribution;

    result.all_scores.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        InfluenceScore score;
        score.word_index = i;
        score.word = x.words[i];
        score.score = result.p_predicted - responses[i + 1].distribution[full.argmax_index];
        result.all_scores.push_back(std::move(score));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.all_scores.size(); ++i) {
        if (result.all_scores[i].score > result.all_scores[best].score) best = i;
    }
    result.top_word_index = best;
    result.top_word = x.words[best];
    result.ok = true;
    return result;
}

std::string second_label(const std::vector<double>& distribution,
                         const std::vector<std::string>& labels) {
    if (labels.size() < 2 || distribution.size() != labels.size()) {
        throw std::invalid_argument("second_label needs >= 2 labels with a matching distribution");
    }
    const std::size_t top = backend::argmax_index(distribution);
    std::size_t second = top == 0 ? 1 : 0;
    for (std::size_t i = 0; i < distribution.size(); ++i) {
        if (i == top || i == second) continue;
        if (distribution[i] > distribution[second]) second = i;
    }
    return labels[second];
}

PseudoExplanation build_pseudo_attribution(const AttributionResult& result) {
    return PseudoExplanation{Style::attribution, result.top_word, result.instance_id,
                             result.predicted_label};
}

PseudoExplanation build_pseudo_redaction(const AttributionResult& result,
                                         const textops::WordSequence& x) {
    const auto redacted = textops::redact(x, {result.top_word_index});
    return PseudoExplanation{Style::redaction, redacted.text(), result.instance_id,
                             result.predicted_label};
}

std::optional<std::string> parse_fill_word(const std::string& completion) {
    std::string text = completion;
    const std::size_t marker = text.rfind("Output word:");
    if (marker != std::string::npos) {
        text = text.substr(marker + std::string("Output word:").size());
    }
    auto words = textops::tokenize(text);
    if (words.size() != 1) return std::nullopt;
    std::string word = words.front();
    // Strip surrounding quotes, keep inner punctuation.
    while (!word.empty() && (word.front() == '"' || word.front() == '\'' || word.front() == '`')) {
        word.erase(word.begin());
    }
    while (!word.empty() && (word.back() == '"' || word.back() == '\'' || word.back() == '`' ||
                             word.back() == '.' || word.back() == ',')) {
        word.pop_back();
    }
    if (word.empty()) return std::nullopt;
    return word;
}

namespace {

bool contains_case_insensitive(const std::string& haystack, const std::string& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    auto lower = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    return lower(haystack).find(lower(needle)) != std::string::npos;
}

}  // namespace

CounterfactualOutcome build_pseudo_counterfactual(backend::ModelBackend& backend,
                                                  const AttributionResult& result,
                                                  const textops::WordSequence& x,
                                                  const corpus::TaskSpec& task,
                                                  const corpus::LabeledInstance& instance,
                                                  const prompts::TemplateRegistry& registry) {
    CounterfactualOutcome outcome;
    if (!result.ok) {
        outcome.failed = true;
        outcome.error = "attribution unavailable: " + result.error;
        return outcome;
    }

    outcome.fill.bar_label = second_label(result.distribution, task.label_names);
    const auto redacted = textops::redact(x, {result.top_word_index});

    const auto& tmpl = registry.require(task.prompt_set_id, Style::cf_fill);
    prompts::Bindings bindings{{prompts::kRedactedInput, redacted.text()},
                               {prompts::kTargetLabel, outcome.fill.bar_label}};
    if (instance.second_input.has_value()) {
        bindings[prompts::kSecondInput] = *instance.second_input;
    }
    const auto transcript = prompts::render(tmpl, bindings);

    std::optional<std::string> fill;
    for (int attempt = 0; attempt < 2; ++attempt) {  // one re-prompt on unparseable output
        const auto gen = backend.generate(transcript);
        if (!gen.ok) {
            outcome.failed = true;
            outcome.error = "fill generation failed: " + gen.error;
            return outcome;
        }
        fill = parse_fill_word(gen.text);
        if (fill) break;
    }
    if (!fill) {
        outcome.fill.rejection_reason = "not-one-word";
        return outcome;
    }

    outcome.fill.fill_word = *fill;
    if (fill->find(textops::kRedactedToken) != std::string::npos) {
        outcome.fill.rejection_reason = "redaction-token";
        return outcome;
    }
    for (const auto& label : task.label_names) {
        if (contains_case_insensitive(*fill, label)) {
            outcome.fill.rejection_reason = "label-leak";
            return outcome;
        }
    }
    if (*fill == result.top_word) {
        outcome.fill.rejection_reason = "no-edit";
        return outcome;
    }

    textops::WordSequence filled = x;
    filled.words[result.top_word_index] = *fill;
    outcome.fill.filled_text = filled.text();
    outcome.fill.accepted = true;
    outcome.explanation = PseudoExplanation{Style::counterfactual, outcome.fill.filled_text,
                                            result.instance_id, result.predicted_label};
    return outcome;
}

}  // namespace selfexpl::construction
