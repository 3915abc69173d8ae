#include "selfexpl/lexicon_backend.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "selfexpl/textops.hpp"

namespace selfexpl::backend {

const char* to_string(ExplanationPolicy p) {
    switch (p) {
        case ExplanationPolicy::faithful_argmax: return "faithful_argmax";
        case ExplanationPolicy::fixed_word: return "fixed_word";
        case ExplanationPolicy::refuse: return "refuse";
        case ExplanationPolicy::format_violator: return "format_violator";
    }
    return "?";
}

std::optional<ExplanationPolicy> explanation_policy_from_string(const std::string& s) {
    if (s == "faithful_argmax") return ExplanationPolicy::faithful_argmax;
    if (s == "fixed_word") return ExplanationPolicy::fixed_word;
    if (s == "refuse") return ExplanationPolicy::refuse;
    if (s == "format_violator") return ExplanationPolicy::format_violator;
    return std::nullopt;
}

namespace {

constexpr const char* kRefusal = "I cannot determine that.";
constexpr const char* kFormatViolation = "hate and early";
constexpr const char* kUnrecognized = "Unrecognized request.";

std::map<std::string, LexiconModel::Weights> normalize_entries(
    std::map<std::string, LexiconModel::Weights> entries) {
    std::map<std::string, LexiconModel::Weights> out;
    for (auto& [word, weights] : entries) {
        const std::string key = textops::normalize_word(word);
        if (key.empty()) continue;
        auto& slot = out[key];
        for (const auto& [label, w] : weights) slot[label] += w;
    }
    return out;
}

// The builtin templates open with "<Field>: <input>" and separate the input
// from the question with a blank line; the mock leans on that convention.
std::string extract_prompt_field(const std::string& text, const std::string& marker) {
    const std::size_t start = text.find(marker);
    if (start == std::string::npos) return {};
    const std::size_t from = start + marker.size();
    std::size_t end = text.find("\n\n", from);
    if (end == std::string::npos) end = text.find('\n', from);
    if (end == std::string::npos) end = text.size();
    std::string out = text.substr(from, end - from);
    while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
    return out;
}

std::string extract_first_input(const std::string& first_user_turn) {
    const std::size_t colon = first_user_turn.find(": ");
    if (colon == std::string::npos) return {};
    const std::size_t from = colon + 2;
    std::size_t end = first_user_turn.find("\n\n", from);
    if (end == std::string::npos) end = first_user_turn.size();
    return first_user_turn.substr(from, end - from);
}

struct StyleRequest {
    Style style;
    WordMode mode;
};

std::optional<StyleRequest> detect_style(const std::string& instruction) {
    if (instruction.find("\"words\"") != std::string::npos) {
        return StyleRequest{Style::attribution, WordMode::multi_word};
    }
    if (instruction.find("\"redacted_text\"") != std::string::npos) {
        return StyleRequest{Style::redaction, WordMode::multi_word};
    }
    if (instruction.find("\"edited_text\"") != std::string::npos) {
        return StyleRequest{Style::counterfactual, WordMode::multi_word};
    }
    if (instruction.find("List the single most important word") != std::string::npos) {
        return StyleRequest{Style::attribution, WordMode::one_word};
    }
    if (instruction.find("Redact one word") != std::string::npos) {
        return StyleRequest{Style::redaction, WordMode::one_word};
    }
    if (instruction.find("Edit the") != std::string::npos) {
        return StyleRequest{Style::counterfactual, WordMode::one_word};
    }
    return std::nullopt;
}

}  // namespace

LexiconModel::LexiconModel(std::map<std::string, Weights> entries, Weights bias,
                           std::vector<std::string> label_order, LexiconOptions options)
    : entries_(normalize_entries(std::move(entries))),
      bias_(std::move(bias)),
      label_order_(std::move(label_order)),
      options_(options) {
    if (label_order_.size() < 2) {
        throw std::invalid_argument("lexicon model needs at least 2 labels");
    }
}

LexiconModel LexiconModel::from_file(const std::string& path, LexiconOptions options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path);

    std::map<std::string, Weights> entries;
    Weights bias;
    std::vector<std::string> label_order;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw std::runtime_error("lexicon " + path + " line " + std::to_string(row) +
                                     ": invalid json");
        }
        if (j.contains("bias")) {
            for (const auto& [label, w] : j["bias"].items()) {
                bias[label] = w.get<double>();
                label_order.push_back(label);
            }
            continue;
        }
        if (!j.contains("word") || !j.contains("weights")) {
            throw std::runtime_error("lexicon " + path + " line " + std::to_string(row) +
                                     ": expected {word, weights} or {bias}");
        }
        Weights weights;
        for (const auto& [label, w] : j["weights"].items()) {
            weights[label] = w.get<double>();
        }
        entries[j["word"].get<std::string>()] = std::move(weights);
    }
    if (label_order.empty()) {
        // No bias record: label order from the first entry seen.
        std::ifstream again(path);
        while (std::getline(again, line)) {
            if (line.empty()) continue;
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, false);
            if (j.is_object() && j.contains("weights")) {
                for (const auto& [label, w] : j["weights"].items()) {
                    (void)w;
                    label_order.push_back(label);
                }
                break;
            }
        }
    }
    return LexiconModel(std::move(entries), std::move(bias), std::move(label_order), options);
}

std::string LexiconModel::identity() const {
    return std::string("lexicon/") + to_string(options_.policy);
}

double LexiconModel::weight(const std::string& word, const std::string& label) const {
    const auto it = entries_.find(textops::normalize_word(word));
    if (it == entries_.end()) return 0.0;
    const auto w = it->second.find(label);
    return w == it->second.end() ? 0.0 : w->second;
}

std::vector<double> LexiconModel::label_scores(const std::vector<std::string>& words,
                                               const std::vector<std::string>& labels) const {
    std::vector<double> scores(labels.size(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto b = bias_.find(labels[i]);
        scores[i] = b == bias_.end() ? 0.0 : b->second;
        for (const auto& word : words) {
            scores[i] += weight(word, labels[i]);
        }
    }
    return scores;
}

ClassifyResult LexiconModel::classify(const ChatTranscript& transcript,
                                      const std::vector<std::string>& labels) {
    check_classify_preconditions(transcript, labels);
    const auto words = textops::tokenize(transcript.back().text);
    ClassifyResult result;
    result.ok = true;
    result.distribution = softmax(label_scores(words, labels));
    result.argmax_index = argmax_index(result.distribution);
    result.label = labels[result.argmax_index];
    return result;
}

std::size_t LexiconModel::pick_word_index(const std::vector<std::string>& words,
                                          const std::string& predicted) const {
    std::size_t best = 0;
    double best_weight = weight(words[0], predicted);
    for (std::size_t i = 1; i < words.size(); ++i) {
        const double w = weight(words[i], predicted);
        if (w > best_weight) {
            best = i;
            best_weight = w;
        }
    }
    if (options_.corrupt_rate > 0.0 && words.size() > 1) {
        const std::string text = textops::join_words(words);
        if (hash_unit(text, options_.corrupt_salt) < options_.corrupt_rate) {
            // Deterministically land on some other input word.
            const uint64_t h = hash64(text, options_.corrupt_salt + 1);
            std::size_t other = static_cast<std::size_t>(h % (words.size() - 1));
            if (other >= best) ++other;
            return other;
        }
    }
    return best;
}

std::string LexiconModel::answer_fill(const std::string& prompt) {
    if (options_.policy == ExplanationPolicy::refuse) return kRefusal;
    if (options_.policy == ExplanationPolicy::format_violator) return kFormatViolation;
    if (options_.policy == ExplanationPolicy::fixed_word) return options_.fixed_word;

    const std::string target = extract_prompt_field(prompt, "Target label: ");
    if (target.empty()) return kUnrecognized;
    // Strongest word for the requested label; ties by lexicon order.
    std::string best_word;
    double best_weight = 0.0;
    for (const auto& [word, weights] : entries_) {
        const auto it = weights.find(target);
        if (it == weights.end()) continue;
        if (best_word.empty() || it->second > best_weight) {
            best_word = word;
            best_weight = it->second;
        }
    }
    return best_word.empty() ? kUnrecognized : best_word;
}

std::string LexiconModel::answer_explanation(const ChatTranscript& transcript,
                                             const std::string& last_user) {
    const auto request = detect_style(last_user);
    if (!request) return kUnrecognized;

    const std::string input = extract_first_input(transcript.turns().front().text);
    const auto words = textops::tokenize(input);
    if (words.empty()) return kUnrecognized;

    // Condition on the model's own stated prediction (the last assistant turn).
    std::string predicted;
    for (const auto& turn : transcript.turns()) {
        if (turn.speaker == Speaker::assistant) predicted = turn.text;
    }
    if (predicted.empty()) {
        const auto scores = label_scores(words, label_order_);
        predicted = label_order_[argmax_index(scores)];
    }

    const std::size_t chosen = pick_word_index(words, predicted);

    switch (request->style) {
        case Style::attribution: {
            const std::string word = textops::strip_edge_punct(words[chosen]);
            if (request->mode == WordMode::multi_word) {
                return std::string("{\"words\": [\"") + word + "\"]}";
            }
            return "Answer: " + word;
        }
        case Style::redaction: {
            auto redacted = words;
            redacted[chosen] = textops::kRedactedToken;
            const std::string text = textops::join_words(redacted);
            if (request->mode == WordMode::multi_word) {
                return std::string("{\"redacted_text\": \"") + text + "\"}";
            }
            return "Answer: " + text;
        }
        case Style::counterfactual: {
            // Swap the chosen word for the strongest word of the runner-up label.
            const auto scores = label_scores(words, label_order_);
            const auto dist = softmax(scores);
            std::size_t top = argmax_index(dist);
            std::size_t second = top == 0 ? 1 : 0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                if (i != top && dist[i] > dist[second]) second = i;
            }
            std::string fill;
            double fill_weight = 0.0;
            for (const auto& [word, weights] : entries_) {
                const auto it = weights.find(label_order_[second]);
                if (it == weights.end()) continue;
                if (fill.empty() || it->second > fill_weight) {
                    fill = word;
                    fill_weight = it->second;
                }
            }
            auto edited = words;
            if (fill.empty()) {
                edited.erase(edited.begin() + static_cast<std::ptrdiff_t>(chosen));
            } else {
                edited[chosen] = fill;
            }
            const std::string text = textops::join_words(edited);
            if (request->mode == WordMode::multi_word) {
                return std::string("{\"edited_text\": \"") + text + "\"}";
            }
            return "Answer: " + text;
        }
        default:
            return kUnrecognized;
    }
}

GenerateResult LexiconModel::generate(const ChatTranscript& transcript) {
    if (!transcript.ends_with_user()) {
        throw std::invalid_argument("generate: transcript must end with a user turn");
    }
    GenerateResult result;
    result.ok = true;
    const std::string& last_user = transcript.back().text;

    if (last_user.find("Replace [REDACTED] with exactly one word") != std::string::npos) {
        result.text = answer_fill(last_user);
        return result;
    }

    switch (options_.policy) {
        case ExplanationPolicy::refuse:
            result.text = kRefusal;
            return result;
        case ExplanationPolicy::format_violator:
            result.text = kFormatViolation;
            return result;
        case ExplanationPolicy::fixed_word: {
            const auto request = detect_style(last_user);
            const std::string input = transcript.size() >= 3
                                          ? extract_first_input(transcript.turns().front().text)
                                          : std::string();
            const auto words = textops::tokenize(input);
            if (!request || words.empty()) {
                result.text = "Answer: " + options_.fixed_word;
                return result;
            }
            const auto positions =
                textops::find_word_positions(textops::WordSequence{words, ""}, options_.fixed_word);
            switch (request->style) {
                case Style::attribution:
                    result.text = "Answer: " + options_.fixed_word;
                    return result;
                case Style::redaction: {
                    auto out = words;
                    if (!positions.empty()) out[positions.front()] = textops::kRedactedToken;
                    result.text = "Answer: " + textops::join_words(out);  // no-op when absent
                    return result;
                }
                case Style::counterfactual: {
                    auto out = words;
                    if (!positions.empty()) {
                        out.erase(out.begin() + static_cast<std::ptrdiff_t>(positions.front()));
                    } else {
                        out.push_back(options_.fixed_word);
                    }
                    result.text = "Answer: " + textops::join_words(out);
                    return result;
                }
                default:
                    result.text = "Answer: " + options_.fixed_word;
                    return result;
            }
        }
        case ExplanationPolicy::faithful_argmax:
            break;
    }

    if (transcript.size() >= 3) {
        result.text = answer_explanation(transcript, last_user);
    } else {
        result.text = kUnrecognized;
    }
    return result;
}

}  // namespace selfexpl::backend
