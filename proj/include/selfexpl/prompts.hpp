#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selfexpl/corpus.hpp"
#include "selfexpl/types.hpp"

namespace selfexpl::prompts {

// The only recognized placeholder tokens. Any other brace span in a template
// is literal text (several templates carry JSON format hints).
inline constexpr const char* kInput = "{input}";
inline constexpr const char* kSecondInput = "{second input}";
inline constexpr const char* kRedactedInput = "{redacted_input}";
inline constexpr const char* kTargetLabel = "{target_label}";

const std::vector<std::string>& allowed_placeholders();

struct PromptTemplate {
    std::string template_id;  // "<task>.<style>" or "<task>.<style>.<word_mode>"
    std::string task_id;
    Style style = Style::classification;
    WordMode word_mode = WordMode::na;
    std::vector<Turn> role_sequence;

    // Placeholder tokens appearing anywhere in the role sequence.
    std::vector<std::string> placeholders() const;
};

// Placeholder token -> bound value.
using Bindings = std::map<std::string, std::string>;

// Literal substitution of every bound placeholder; no escaping or
// normalization of the bound text. Throws std::invalid_argument on a binding
// key outside the allowed set or on a template placeholder left unbound.
ChatTranscript render(const PromptTemplate& tmpl, const Bindings& bindings);

// Registry of templates keyed by (task prompt set, style, word_mode).
// Immutable after construction; concurrent reads are safe.
class TemplateRegistry {
public:
    static TemplateRegistry builtin();
    static TemplateRegistry from_file(const std::string& path);
    static TemplateRegistry from_string(const std::string& config_text);

    const PromptTemplate* find(const std::string& prompt_set, Style style,
                               WordMode mode = WordMode::na) const;
    // Throws std::runtime_error naming the missing key.
    const PromptTemplate& require(const std::string& prompt_set, Style style,
                                  WordMode mode = WordMode::na) const;
    const std::map<std::string, PromptTemplate>& all() const { return templates_; }

private:
    std::map<std::string, PromptTemplate> templates_;
};

// The bundled template set in the registry file format (see README for the
// format description). Parsed by the same parser as user-supplied files.
const char* builtin_template_config();

// Classification transcript for one input (the probe path uses this too).
ChatTranscript classification_transcript(const TemplateRegistry& registry,
                                         const corpus::TaskSpec& task, const std::string& input,
                                         const std::optional<std::string>& second_input);

// Explanation-request transcript: classification prompt, the model's own
// predicted label, then the style instruction.
ChatTranscript explanation_transcript(const TemplateRegistry& registry,
                                      const corpus::TaskSpec& task,
                                      const corpus::LabeledInstance& instance,
                                      const std::string& predicted_label, Style style,
                                      WordMode mode);

}  // namespace selfexpl::prompts
