#pragma once

#include <random>
#include <string>
#include <vector>

#include "selfexpl/corpus.hpp"
#include "selfexpl/lexicon_backend.hpp"

namespace selfexpl::testsupport {

// Synthetic sentiment sentences where exactly one trigger word carries all
// of the label evidence (+3 toward its label) and one weak anchor leans the
// opposite way (+0.5), so redacting the trigger always flips the argmax while
// redacting anything else never does.
struct TriggerCorpus {
    std::vector<corpus::LabeledInstance> instances;
    std::vector<std::string> triggers;  // per-instance trigger word
    std::map<std::string, backend::LexiconModel::Weights> entries;
    std::vector<std::string> labels{"Positive", "Negative"};

    backend::LexiconModel make_model(backend::LexiconOptions options = {}) const {
        return backend::LexiconModel(entries, {}, labels, options);
    }
};

inline TriggerCorpus make_trigger_corpus(std::size_t n, uint64_t seed) {
    const std::vector<std::string> positive = {"adore",  "cherish", "delight", "enjoy", "love",
                                               "praise", "relish",  "savor",   "smile", "thrive"};
    const std::vector<std::string> negative = {"despise", "dread",  "gloom",  "grief",  "loathe",
                                               "mourn",   "regret", "sorrow", "wreck",  "hate"};
    const std::vector<std::string> fillers = {"the",  "my",    "day", "it", "was",
                                              "thing", "quite", "so",  "then"};

    TriggerCorpus out;
    for (const auto& word : positive) {
        out.entries[word] = {{"Positive", 3.0}, {"Negative", 0.0}};
    }
    for (const auto& word : negative) {
        out.entries[word] = {{"Positive", 0.0}, {"Negative", 3.0}};
    }
    out.entries["alas"] = {{"Positive", 0.0}, {"Negative", 0.5}};
    out.entries["okay"] = {{"Positive", 0.5}, {"Negative", 0.0}};

    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const bool is_positive = (i % 2) == 0;
        const auto& triggers = is_positive ? positive : negative;
        const std::string trigger = triggers[rng() % triggers.size()];
        const std::string anchor = is_positive ? "alas" : "okay";

        std::vector<std::string> words{trigger, anchor};
        const std::size_t filler_count = 2 + rng() % 5;
        for (std::size_t f = 0; f < filler_count; ++f) {
            words.push_back(fillers[rng() % fillers.size()]);
        }
        for (std::size_t k = words.size(); k > 1; --k) {
            std::swap(words[k - 1], words[rng() % k]);
        }

        corpus::LabeledInstance instance;
        instance.id = "syn-" + std::to_string(1000 + i);
        std::string text;
        for (const auto& word : words) {
            if (!text.empty()) text += ' ';
            text += word;
        }
        instance.input = text;
        instance.gold_label = is_positive ? "Positive" : "Negative";
        out.instances.push_back(std::move(instance));
        out.triggers.push_back(trigger);
    }
    return out;
}

}  // namespace selfexpl::testsupport
