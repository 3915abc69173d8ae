#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfexpl/backend.hpp"
#include "selfexpl/corpus.hpp"
#include "selfexpl/prompts.hpp"
#include "selfexpl/types.hpp"

namespace selfexpl::evaluation {

// Groups with fewer retained instances than this are flagged in reports and
// matrices.
inline constexpr std::size_t kMinRetainedGroup = 50;

struct SelfExplanation {
    Style style = Style::attribution;
    WordMode word_mode = WordMode::one_word;
    std::string raw_text;
    std::vector<std::string> words;  // attribution payload
    std::string text;                // redaction / counterfactual payload
    bool parse_ok = false;
    std::string parse_error;
};

// Format parsing per style and word mode. Failures are data (parse_ok =
// false with a reason), never exceptions.
SelfExplanation parse_explanation(const std::string& raw, Style style, WordMode mode);

struct ConditionCheck {
    bool style_ok = false;
    std::string reason;
    std::size_t n_observed = 0;
    std::optional<int> n_required;  // nullopt = unconstrained
    bool retained = false;
};

// Style conditions: attribution lists only input words; redaction keeps the
// remaining input intact behind aligned [REDACTED] slots; counterfactual
// avoids [REDACTED] and label names (whole-word, case-insensitive) and must
// change the input. The number-of-word condition compares n_observed against
// n_required when constrained.
ConditionCheck check_conditions(const SelfExplanation& expl,
                                const corpus::LabeledInstance& instance,
                                std::optional<int> n_required, const corpus::TaskSpec& task);

// Probe input for the self-consistency check: attribution redacts every
// occurrence of every listed word; redaction and counterfactual pass the
// explanation text through.
std::string derive_probe(const SelfExplanation& expl, const corpus::LabeledInstance& instance);

struct FaithfulnessVerdict {
    bool ok = false;
    std::string error;
    std::string probe_input;
    std::string original_prediction;
    std::string probe_prediction;
    bool faithful = false;  // probe prediction differs from the original
};

// Classifies the probe in a fresh session (no explanation turns in context).
FaithfulnessVerdict judge(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                          const corpus::LabeledInstance& instance, const std::string& probe,
                          const std::string& original_prediction,
                          const prompts::TemplateRegistry& registry);

struct InstanceTrace {
    std::string id;
    Style style = Style::attribution;
    WordMode word_mode = WordMode::one_word;
    std::string input;
    std::optional<std::string> second_input;
    std::string prediction;
    std::string raw_explanation;
    bool parse_ok = false;
    std::vector<std::string> parsed_words;
    std::string parsed_text;
    bool style_ok = false;
    std::string reason;
    std::size_t n_observed = 0;
    bool retained = false;
    std::optional<std::string> probe;
    std::optional<std::string> probe_prediction;
    std::optional<bool> faithful;
    bool failed = false;
    std::string error;
};

struct PerNGroup {
    std::size_t n = 0;
    std::size_t retained = 0;
    std::size_t faithful = 0;
    std::optional<double> score;
    bool low_retained = false;
};

struct EvaluationReport {
    std::string task;
    Style style = Style::attribution;
    WordMode word_mode = WordMode::one_word;
    std::optional<int> n_required;
    std::string train_tag;
    std::string backend_identity;
    std::size_t total = 0;
    std::size_t retained = 0;
    std::size_t excluded_by_style = 0;
    std::size_t excluded_by_n = 0;
    std::size_t failed = 0;
    std::size_t faithful = 0;
    std::optional<double> score;  // faithful / retained; nullopt when retained = 0
    bool low_retained = false;
    std::vector<PerNGroup> per_n;  // multi_word runs only
};

struct EvalOptions {
    std::optional<int> n_required = 1;
    int concurrency = 8;
    std::string train_tag = "untrained";
};

struct EvaluationRun {
    EvaluationReport report;
    std::vector<InstanceTrace> traces;  // sorted by instance id
};

// Full pipeline: classify, generate the explanation in-session, parse, check
// conditions, derive the probe, judge in a fresh session. Per-instance
// failures are counted, never aborting the run.
EvaluationRun evaluate_style(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                             const std::vector<corpus::LabeledInstance>& instances, Style style,
                             WordMode word_mode, const prompts::TemplateRegistry& registry,
                             const EvalOptions& options);

// Same checks and judging over explanations supplied by the caller (used to
// score constructed pseudo-explanations with the identical configuration).
struct PreparsedItem {
    corpus::LabeledInstance instance;
    std::string predicted_label;
    SelfExplanation explanation;
    bool failed = false;  // upstream failure; counted, not judged
    std::string error;
};

EvaluationRun score_explanations(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                                 const std::vector<PreparsedItem>& items, Style style,
                                 WordMode word_mode, const prompts::TemplateRegistry& registry,
                                 const EvalOptions& options);

enum class MatrixAxis { task, style };

struct ReportSummary {
    std::string train_tag;
    std::string eval_task;
    Style eval_style = Style::attribution;
    std::optional<double> score;
    std::size_t retained = 0;
};

ReportSummary summarize(const EvaluationReport& report);

struct MatrixCell {
    std::string train_tag;
    std::string cell;  // eval task or eval style
    std::optional<double> value;
    std::size_t retained = 0;
    bool low_retained = false;
};

// Task axis: per-cell gain over the baseline tag. Style axis: raw scores per
// cell (baseline rows included). Throws std::runtime_error on a missing
// baseline cell.
std::vector<MatrixCell> cross_matrix(const std::vector<ReportSummary>& summaries,
                                     const std::string& baseline_tag, MatrixAxis axis);

std::string matrix_to_csv(const std::vector<MatrixCell>& cells, MatrixAxis axis);

nlohmann::ordered_json report_to_json(const EvaluationReport& report);
nlohmann::ordered_json trace_to_json(const InstanceTrace& trace);
ReportSummary summary_from_json(const nlohmann::json& report_json);

}  // namespace selfexpl::evaluation
