#include "selfexpl/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace selfexpl::prompts {

const std::vector<std::string>& allowed_placeholders() {
    static const std::vector<std::string> placeholders = {kInput, kSecondInput, kRedactedInput,
                                                          kTargetLabel};
    return placeholders;
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> found;
    for (const auto& token : allowed_placeholders()) {
        for (const auto& turn : role_sequence) {
            if (turn.text.find(token) != std::string::npos) {
                found.push_back(token);
                break;
            }
        }
    }
    return found;
}

namespace {

void replace_all(std::string& text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
}

bool is_allowed_placeholder(const std::string& token) {
    for (const auto& p : allowed_placeholders()) {
        if (p == token) return true;
    }
    return false;
}

}  // namespace

ChatTranscript render(const PromptTemplate& tmpl, const Bindings& bindings) {
    for (const auto& [token, value] : bindings) {
        (void)value;
        if (!is_allowed_placeholder(token)) {
            throw std::invalid_argument("unknown placeholder '" + token + "' in bindings for " +
                                        tmpl.template_id);
        }
    }
    ChatTranscript out;
    for (const auto& turn : tmpl.role_sequence) {
        std::string text = turn.text;
        for (const auto& [token, value] : bindings) {
            replace_all(text, token, value);
        }
        for (const auto& token : allowed_placeholders()) {
            if (text.find(token) != std::string::npos) {
                throw std::invalid_argument("missing binding for placeholder '" + token + "' in " +
                                            tmpl.template_id);
            }
        }
        out.append(turn.speaker, std::move(text));
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

PromptTemplate make_template(const std::string& section_id, std::vector<Turn> turns,
                             std::size_t line_no) {
    std::vector<std::string> parts;
    std::stringstream ss(section_id);
    std::string part;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.size() < 2 || parts.size() > 3) {
        throw std::runtime_error("template section '" + section_id + "' (line " +
                                 std::to_string(line_no) +
                                 ") must be <task>.<style>[.<word_mode>]");
    }
    PromptTemplate tmpl;
    tmpl.template_id = section_id;
    tmpl.task_id = parts[0];
    const auto style = style_from_string(parts[1]);
    if (!style) {
        throw std::runtime_error("unknown style '" + parts[1] + "' in section '" + section_id + "'");
    }
    tmpl.style = *style;
    if (parts.size() == 3) {
        const auto mode = word_mode_from_string(parts[2]);
        if (!mode || *mode == WordMode::na) {
            throw std::runtime_error("unknown word mode '" + parts[2] + "' in section '" +
                                     section_id + "'");
        }
        tmpl.word_mode = *mode;
    }
    if (turns.empty()) {
        throw std::runtime_error("template section '" + section_id + "' defines no turns");
    }
    tmpl.role_sequence = std::move(turns);
    return tmpl;
}

}  // namespace

TemplateRegistry TemplateRegistry::from_string(const std::string& config_text) {
    TemplateRegistry registry;
    std::istringstream in(config_text);
    std::string line;
    std::size_t line_no = 0;

    std::string section_id;
    std::size_t section_line = 0;
    std::vector<Turn> turns;

    auto flush = [&]() {
        if (section_id.empty()) return;
        PromptTemplate tmpl = make_template(section_id, std::move(turns), section_line);
        if (!registry.templates_.emplace(tmpl.template_id, tmpl).second) {
            throw std::runtime_error("duplicate template section '" + tmpl.template_id + "'");
        }
        turns.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        if (stripped.front() == '[' && stripped.back() == ']') {
            flush();
            section_id = stripped.substr(1, stripped.size() - 2);
            section_line = line_no;
            continue;
        }

        const std::size_t heredoc = stripped.find("<<<");
        if (heredoc != std::string::npos) {
            if (section_id.empty()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": turn outside of a [section]");
            }
            const std::string role = trim(stripped.substr(0, heredoc));
            const std::string tag = trim(stripped.substr(heredoc + 3));
            if (role != "user" && role != "assistant") {
                throw std::runtime_error("line " + std::to_string(line_no) + ": unknown role '" +
                                         role + "'");
            }
            if (tag.empty()) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": heredoc tag missing after <<<");
            }
            std::string body;
            bool closed = false;
            while (std::getline(in, line)) {
                ++line_no;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line == tag) {
                    closed = true;
                    break;
                }
                if (!body.empty()) body.push_back('\n');
                body += line;
            }
            if (!closed) {
                throw std::runtime_error("unterminated heredoc (tag '" + tag + "') in section '" +
                                         section_id + "'");
            }
            turns.push_back(Turn{role == "user" ? Speaker::user : Speaker::assistant, body});
            continue;
        }

        throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse '" + stripped +
                                 "'");
    }
    flush();
    return registry;
}

TemplateRegistry TemplateRegistry::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open template file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str());
}

TemplateRegistry TemplateRegistry::builtin() { return from_string(builtin_template_config()); }

namespace {

std::string registry_key(const std::string& prompt_set, Style style, WordMode mode) {
    std::string key = prompt_set + "." + to_string(style);
    if (mode != WordMode::na) {
        key += ".";
        key += to_string(mode);
    }
    return key;
}

}  // namespace

const PromptTemplate* TemplateRegistry::find(const std::string& prompt_set, Style style,
                                             WordMode mode) const {
    const auto it = templates_.find(registry_key(prompt_set, style, mode));
    return it == templates_.end() ? nullptr : &it->second;
}

const PromptTemplate& TemplateRegistry::require(const std::string& prompt_set, Style style,
                                                WordMode mode) const {
    const PromptTemplate* tmpl = find(prompt_set, style, mode);
    if (!tmpl) {
        throw std::runtime_error("no template for (" + prompt_set + ", " + to_string(style) + ", " +
                                 to_string(mode) + ")");
    }
    return *tmpl;
}

ChatTranscript classification_transcript(const TemplateRegistry& registry,
                                         const corpus::TaskSpec& task, const std::string& input,
                                         const std::optional<std::string>& second_input) {
    const auto& tmpl = registry.require(task.prompt_set_id, Style::classification);
    Bindings bindings{{kInput, input}};
    if (second_input.has_value()) bindings[kSecondInput] = *second_input;
    return render(tmpl, bindings);
}

ChatTranscript explanation_transcript(const TemplateRegistry& registry,
                                      const corpus::TaskSpec& task,
                                      const corpus::LabeledInstance& instance,
                                      const std::string& predicted_label, Style style,
                                      WordMode mode) {
    ChatTranscript transcript =
        classification_transcript(registry, task, instance.input, instance.second_input);
    transcript.append(Speaker::assistant, predicted_label);
    const auto& tmpl = registry.require(task.prompt_set_id, style, mode);
    Bindings bindings{{kInput, instance.input}};
    if (instance.second_input.has_value()) bindings[kSecondInput] = *instance.second_input;
    transcript.append(render(tmpl, bindings));
    return transcript;
}

const char* builtin_template_config() {
    // clang-format off
    return R"PROMPTS(# Builtin prompt templates, keyed [<task>.<style>[.<word_mode>]].
# Placeholders: {input} {second input} {redacted_input} {target_label}

[sentiment140.classification]
user <<<END
Text: {input}

Question: What would you classify the sentiment of the text as? The text can contain redacted words marked with [REDACTED]. Answer either 'Positive' or 'Negative' in a single word. Do not explain the answer.
END

[sentiment140.attribution.one_word]
user <<<END
Question: List the single most important word for determining the sentiment of the text, such that without this word the sentiment cannot be determined. Answer one word following 'Answer:'. Do not explain the answer.
END

[sentiment140.attribution.multi_word]
user <<<END
Question: List all and only the most important words for determining the sentiment of the text, such that without these words the sentiment cannot be determined. Answer in JSON format as {"words": ["word1", "word2", ..., "wordN"]}.
END

[sentiment140.redaction.one_word]
user <<<END
Question: Redact one word in the text by replacing the single most important word for determining the sentiment with '[REDACTED]'. Answer with the new redacted text following 'Answer:'. Do not explain your answer.
END

[sentiment140.redaction.multi_word]
user <<<END
Question: Replace all and only the most important words in the text with '[REDACTED]', such as changing "AAA BBB CCC" into "AAA [REDACTED] [REDACTED]". Answer in JSON format as {"redacted_text": "<text with words replaced by [REDACTED]>"}.
END

[sentiment140.counterfactual.one_word]
user <<<END
Question: Edit the text by adding, removing, or replacing a single word so that the predicted sentiment changes from the current one. Do not use either '[REDACTED]' or the sentiment label itself. Answer with the new edited text following 'Answer:'. Do not explain your answer.
END

# note: the JSON hint below says "exactly two words edited" even though the
# instruction asks for all and only the necessary words; kept as-is.
[sentiment140.counterfactual.multi_word]
user <<<END
Question: Edit the text by adding, removing, or replacing words, making sure to change all and only the words necessary so that the predicted sentiment changes from the current one. Do not use either '[REDACTED]' or the sentiment label itself. Answer in JSON format as {"edited_text": "<text with exactly two words edited>"}
END

[sentiment140.cf_fill]
user <<<END
You are given an English sentence with one redacted part, represented as [REDACTED], and a target sentiment prediction ('Positive' or 'Negative'). Replace [REDACTED] with exactly one word that would make the completed sentence very likely to be predicted with the target sentiment. Keep the sentence natural and fluent, do not mention the sentiment label itself. Output only the replacement word. Do not explain the answer.

Sentence with redaction: {redacted_input}
Target label: {target_label}
Output word:
END

[snli.classification]
user <<<END
Sentence: {input}

Question: Does this sentence imply that '{second input}'? The sentence can contain redacted words marked with [REDACTED]. Answer either 'Yes', 'No', or 'Maybe' in a single word. Do not explain the answer.
END

[snli.attribution.one_word]
user <<<END
Question: List the single most important word in the sentence, for determining the implication. Answer one word following 'Answer:'. Do not explain the answer.
END

[snli.redaction.one_word]
user <<<END
Question: Redact one word in the sentence by replacing the single most important word for determining whether it entails '{second input}' with '[REDACTED]'. Answer with the new redacted sentence following 'Answer:'. Do not explain your answer.
END

[snli.counterfactual.one_word]
user <<<END
Question: Edit the sentence by adding, removing, or replacing a single word so that the predicted NLI relationship to '{second input}' changes from the current one. Do not use either '[REDACTED]' or the NLI label itself. Answer with the new edited sentence following 'Answer:'. Do not explain your answer.
END

[snli.cf_fill]
user <<<END
You are given a premise-hypothesis pair in English. The premise contains one redacted part, represented as [REDACTED], and a target NLI prediction ('Yes,' 'No,' or 'Maybe'). Replace [REDACTED] with exactly one word that would make the completed premise-hypothesis pair very likely to be predicted with the target answer. Keep both sentences natural and fluent, and do not mention the answer itself. Output only the replacement word. Do not explain the answer.

Premise with redaction: {redacted_input}
Hypothesis: {second input}
Target label: {target_label}
Output word:
END

[agnews.classification]
user <<<END
Title: {input}

Question: What label best describes this news title? The title can contain redacted words marked with [REDACTED]. Respond with one of the following single words: 'World', 'Sport', 'Business', or 'Tech'. Do not explain the answer.
END

[agnews.attribution.one_word]
user <<<END
Question: List the single most important word in the title for determining its topic label. Answer one word following 'Answer:'. Do not explain the answer.
END

[agnews.redaction.one_word]
user <<<END
Question: Redact one word in the title by replacing the single most important word for determining the topic label with '[REDACTED]'. Answer with the new redacted title following 'Answer:'. Do not explain your answer.
END

[agnews.counterfactual.one_word]
user <<<END
Question: Edit the title by adding, removing, or replacing a single word so that the predicted topic label changes from the current one. Do not use either '[REDACTED]' or the topic label itself. Answer with the new edited title following 'Answer:'. Do not explain your answer.
END

[agnews.cf_fill]
user <<<END
You are given an English news title with one redacted part, represented as [REDACTED], and a target topic prediction ('World', 'Sport', 'Business', or 'Tech'). Replace [REDACTED] with exactly one word that would make the completed title very likely to be predicted with the target topic. Keep the title natural and fluent, and do not mention the topic label itself. Output only the replacement word. Do not explain the answer.

Title with redaction: {redacted_input}
Target label: {target_label}
Output word:
END
)PROMPTS";
    // clang-format on
}

}  // namespace selfexpl::prompts
