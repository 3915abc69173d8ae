#include "selfexpl/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "selfexpl/textops.hpp"

namespace selfexpl::evaluation {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

std::string strip_matching_quotes(std::string s) {
    while (s.size() >= 2 && (s.front() == '"' || s.front() == '\'' || s.front() == '`') &&
           s.back() == s.front()) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

std::optional<std::string> after_answer_marker(const std::string& raw) {
    const std::size_t marker = raw.rfind("Answer:");
    if (marker == std::string::npos) return std::nullopt;
    return strip_matching_quotes(trim(raw.substr(marker + std::string("Answer:").size())));
}

std::optional<nlohmann::json> embedded_json_object(const std::string& raw) {
    const std::size_t open = raw.find('{');
    const std::size_t close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        return std::nullopt;
    }
    nlohmann::json j = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

std::optional<std::string> json_text_field(const std::string& raw, const std::string& field) {
    const auto j = embedded_json_object(raw);
    if (!j || !j->contains(field) || !(*j)[field].is_string()) return std::nullopt;
    return (*j)[field].get<std::string>();
}

}  // namespace

SelfExplanation parse_explanation(const std::string& raw, Style style, WordMode mode) {
    SelfExplanation expl;
    expl.style = style;
    expl.word_mode = mode;
    expl.raw_text = raw;

    switch (style) {
        case Style::attribution: {
            if (mode == WordMode::multi_word) {
                const auto j = embedded_json_object(raw);
                if (!j || !j->contains("words") || !(*j)["words"].is_array()) {
                    expl.parse_error = "expected a JSON object with a \"words\" array";
                    return expl;
                }
                for (const auto& w : (*j)["words"]) {
                    if (!w.is_string()) {
                        expl.parse_error = "\"words\" array holds a non-string entry";
                        return expl;
                    }
                    expl.words.push_back(w.get<std::string>());
                }
                expl.parse_ok = true;
                return expl;
            }
            const auto answer = after_answer_marker(raw);
            if (!answer) {
                expl.parse_error = "no 'Answer:' marker";
                return expl;
            }
            expl.words = textops::tokenize(*answer);
            if (expl.words.empty()) {
                expl.parse_error = "empty answer";
                return expl;
            }
            expl.parse_ok = true;
            return expl;
        }
        case Style::redaction:
        case Style::counterfactual: {
            const std::string field = style == Style::redaction ? "redacted_text" : "edited_text";
            if (const auto text = json_text_field(raw, field)) {
                expl.text = trim(*text);
            } else if (const auto answer = after_answer_marker(raw)) {
                expl.text = *answer;
            } else {
                expl.parse_error = "no 'Answer:' marker and no \"" + field + "\" JSON field";
                return expl;
            }
            if (textops::tokenize(expl.text).empty()) {
                expl.parse_error = "empty answer";
                return expl;
            }
            expl.parse_ok = true;
            return expl;
        }
        default:
            expl.parse_error = "not a self-explanation style";
            return expl;
    }
}

ConditionCheck check_conditions(const SelfExplanation& expl,
                                const corpus::LabeledInstance& instance,
                                std::optional<int> n_required, const corpus::TaskSpec& task) {
    if (!expl.parse_ok) {
        throw std::invalid_argument("check_conditions requires a parsed explanation");
    }
    ConditionCheck check;
    check.n_required = n_required;

    const auto x = textops::WordSequence::from_text(instance.input, instance.id + "/input");

    switch (expl.style) {
        case Style::attribution: {
            if (expl.words.empty()) {
                check.reason = "no words listed";
                return check;
            }
            for (const auto& word : expl.words) {
                if (textops::find_word_positions(x, word).empty()) {
                    check.reason = "listed word not in input: '" + word + "'";
                    return check;
                }
            }
            check.style_ok = true;
            check.n_observed = expl.words.size();
            break;
        }
        case Style::redaction: {
            const auto redacted = textops::tokenize(expl.text);
            if (redacted.size() != x.size()) {
                check.reason = "redacted text length differs from input";
                return check;
            }
            std::size_t slots = 0;
            for (std::size_t i = 0; i < redacted.size(); ++i) {
                if (redacted[i] == textops::kRedactedToken) {
                    ++slots;
                } else if (redacted[i] != x.words[i]) {
                    check.reason = "remaining input altered at word " + std::to_string(i);
                    return check;
                }
            }
            if (slots == 0) {
                check.reason = "no [REDACTED] tokens";
                return check;
            }
            check.style_ok = true;
            check.n_observed = slots;
            break;
        }
        case Style::counterfactual: {
            if (expl.text.find(textops::kRedactedToken) != std::string::npos) {
                check.reason = "contains [REDACTED]";
                return check;
            }
            const auto edited = textops::WordSequence::from_text(expl.text);
            for (const auto& word : edited.words) {
                const std::string normalized = textops::normalize_word(word);
                for (const auto& label : task.label_names) {
                    if (normalized == textops::normalize_word(label)) {
                        check.reason = "contains label name '" + label + "'";
                        return check;
                    }
                }
            }
            const auto script = textops::word_edit_distance(x, edited);
            if (script.distance == 0) {
                check.reason = "input left unchanged";
                return check;
            }
            check.style_ok = true;
            check.n_observed = script.distance;
            break;
        }
        default:
            check.reason = "not a self-explanation style";
            return check;
    }

    check.retained = check.style_ok &&
                     (!check.n_required.has_value() ||
                      check.n_observed == static_cast<std::size_t>(*check.n_required));
    if (!check.retained && check.style_ok) {
        check.reason = "expected " + std::to_string(*check.n_required) + " word(s), observed " +
                       std::to_string(check.n_observed);
    }
    return check;
}

std::string derive_probe(const SelfExplanation& expl, const corpus::LabeledInstance& instance) {
    switch (expl.style) {
        case Style::attribution: {
            const auto x = textops::WordSequence::from_text(instance.input);
            std::set<std::size_t> positions;
            for (const auto& word : expl.words) {
                for (std::size_t pos : textops::find_word_positions(x, word)) {
                    positions.insert(pos);
                }
            }
            if (positions.empty()) {
                throw std::logic_error(
                    "derive_probe: attribution words match no input position (instance '" +
                    instance.id + "' should have been excluded)");
            }
            return textops::redact(x, std::vector<std::size_t>(positions.begin(), positions.end()))
                .text();
        }
        case Style::redaction:
        case Style::counterfactual:
            return expl.text;
        default:
            throw std::invalid_argument("derive_probe: not a self-explanation style");
    }
}

FaithfulnessVerdict judge(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                          const corpus::LabeledInstance& instance, const std::string& probe,
                          const std::string& original_prediction,
                          const prompts::TemplateRegistry& registry) {
    FaithfulnessVerdict verdict;
    verdict.probe_input = probe;
    verdict.original_prediction = original_prediction;
    if (textops::tokenize(probe).empty()) {
        verdict.error = "empty probe";
        return verdict;
    }
    const auto transcript =
        prompts::classification_transcript(registry, task, probe, instance.second_input);
    const auto result = backend.classify(transcript, task.label_names);
    if (!result.ok) {
        verdict.error = result.error;
        return verdict;
    }
    verdict.ok = true;
    verdict.probe_prediction = result.label;
    verdict.faithful = result.label != original_prediction;
    return verdict;
}

namespace {

// Shared tail of the pipeline: conditions, probe, judgment.
void finish_trace(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                  const corpus::LabeledInstance& instance, const SelfExplanation& expl,
                  std::optional<int> n_required, const prompts::TemplateRegistry& registry,
                  InstanceTrace& trace) {
    trace.parse_ok = expl.parse_ok;
    trace.parsed_words = expl.words;
    trace.parsed_text = expl.text;
    trace.raw_explanation = expl.raw_text;

    if (!expl.parse_ok) {
        trace.style_ok = false;
        trace.reason = "unparseable: " + expl.parse_error;
        return;
    }

    const auto check = check_conditions(expl, instance, n_required, task);
    trace.style_ok = check.style_ok;
    trace.reason = check.reason;
    trace.n_observed = check.n_observed;
    trace.retained = check.retained;
    if (!check.retained) return;

    const std::string probe = derive_probe(expl, instance);
    const auto verdict = judge(backend, task, instance, probe, trace.prediction, registry);
    trace.probe = probe;
    if (!verdict.ok) {
        trace.failed = true;
        trace.retained = false;
        trace.error = "judge: " + verdict.error;
        return;
    }
    trace.probe_prediction = verdict.probe_prediction;
    trace.faithful = verdict.faithful;
}

EvaluationReport aggregate(const std::string& task_id, Style style, WordMode word_mode,
                           const EvalOptions& options, const std::string& backend_identity,
                           std::vector<InstanceTrace>& traces) {
    std::stable_sort(traces.begin(), traces.end(),
                     [](const InstanceTrace& a, const InstanceTrace& b) { return a.id < b.id; });

    EvaluationReport report;
    report.task = task_id;
    report.style = style;
    report.word_mode = word_mode;
    report.n_required = options.n_required;
    report.train_tag = options.train_tag;
    report.backend_identity = backend_identity;
    report.total = traces.size();

    std::map<std::size_t, PerNGroup> groups;
    for (const auto& trace : traces) {
        if (trace.failed) {
            ++report.failed;
            continue;
        }
        if (!trace.style_ok) {
            ++report.excluded_by_style;
            continue;
        }
        if (!trace.retained) {
            ++report.excluded_by_n;
            continue;
        }
        ++report.retained;
        const bool faithful = trace.faithful.value_or(false);
        if (faithful) ++report.faithful;
        if (word_mode == WordMode::multi_word) {
            auto& group = groups[trace.n_observed];
            group.n = trace.n_observed;
            ++group.retained;
            if (faithful) ++group.faithful;
        }
    }
    if (report.retained > 0) {
        report.score = static_cast<double>(report.faithful) / static_cast<double>(report.retained);
    }
    report.low_retained = report.retained < kMinRetainedGroup;
    for (auto& [n, group] : groups) {
        (void)n;
        if (group.retained > 0) {
            group.score = static_cast<double>(group.faithful) / static_cast<double>(group.retained);
        }
        group.low_retained = group.retained < kMinRetainedGroup;
        report.per_n.push_back(group);
    }
    return report;
}

void check_style(Style style) {
    if (style != Style::attribution && style != Style::redaction &&
        style != Style::counterfactual) {
        throw std::invalid_argument("not a self-explanation style");
    }
}

}  // namespace

EvaluationRun evaluate_style(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                             const std::vector<corpus::LabeledInstance>& instances, Style style,
                             WordMode word_mode, const prompts::TemplateRegistry& registry,
                             const EvalOptions& options) {
    check_style(style);
    registry.require(task.prompt_set_id, style, word_mode);  // fail fast on a missing prompt set

    std::vector<InstanceTrace> traces(instances.size());
    backend::parallel_for(instances.size(), options.concurrency, [&](std::size_t i) {
        const auto& instance = instances[i];
        InstanceTrace& trace = traces[i];
        trace.id = instance.id;
        trace.style = style;
        trace.word_mode = word_mode;
        trace.input = instance.input;
        trace.second_input = instance.second_input;

        const auto prediction = backend.classify(
            prompts::classification_transcript(registry, task, instance.input,
                                               instance.second_input),
            task.label_names);
        if (!prediction.ok) {
            trace.failed = true;
            trace.error = "classify: " + prediction.error;
            return;
        }
        trace.prediction = prediction.label;

        const auto generated = backend.generate(prompts::explanation_transcript(
            registry, task, instance, prediction.label, style, word_mode));
        if (!generated.ok) {
            trace.failed = true;
            trace.error = "generate: " + generated.error;
            return;
        }

        const auto expl = parse_explanation(generated.text, style, word_mode);
        finish_trace(backend, task, instance, expl, options.n_required, registry, trace);
    });

    EvaluationRun run;
    run.traces = std::move(traces);
    run.report =
        aggregate(task.task_id, style, word_mode, options, backend.identity(), run.traces);
    return run;
}

EvaluationRun score_explanations(backend::ModelBackend& backend, const corpus::TaskSpec& task,
                                 const std::vector<PreparsedItem>& items, Style style,
                                 WordMode word_mode, const prompts::TemplateRegistry& registry,
                                 const EvalOptions& options) {
    check_style(style);

    std::vector<InstanceTrace> traces(items.size());
    backend::parallel_for(items.size(), options.concurrency, [&](std::size_t i) {
        const auto& item = items[i];
        InstanceTrace& trace = traces[i];
        trace.id = item.instance.id;
        trace.style = style;
        trace.word_mode = word_mode;
        trace.input = item.instance.input;
        trace.second_input = item.instance.second_input;
        trace.prediction = item.predicted_label;
        if (item.failed) {
            trace.failed = true;
            trace.error = item.error;
            return;
        }
        finish_trace(backend, task, item.instance, item.explanation, options.n_required, registry,
                     trace);
    });

    EvaluationRun run;
    run.traces = std::move(traces);
    run.report =
        aggregate(task.task_id, style, word_mode, options, backend.identity(), run.traces);
    return run;
}

ReportSummary summarize(const EvaluationReport& report) {
    return ReportSummary{report.train_tag, report.task, report.style, report.score,
                         report.retained};
}

std::vector<MatrixCell> cross_matrix(const std::vector<ReportSummary>& summaries,
                                     const std::string& baseline_tag, MatrixAxis axis) {
    auto cell_key = [&](const ReportSummary& s) {
        return axis == MatrixAxis::task ? s.eval_task : std::string(to_string(s.eval_style));
    };

    std::map<std::pair<std::string, std::string>, const ReportSummary*> by_key;
    for (const auto& summary : summaries) {
        const auto key = std::make_pair(summary.train_tag, cell_key(summary));
        if (!by_key.emplace(key, &summary).second) {
            throw std::runtime_error("duplicate report for (train_tag=" + key.first + ", cell=" +
                                     key.second + ")");
        }
    }

    std::vector<MatrixCell> cells;
    for (const auto& [key, summary] : by_key) {
        const auto& [tag, cell] = key;
        if (axis == MatrixAxis::task) {
            if (tag == baseline_tag) continue;
            const auto base = by_key.find(std::make_pair(baseline_tag, cell));
            if (base == by_key.end()) {
                throw std::runtime_error("missing baseline ('" + baseline_tag + "') report for cell '" +
                                         cell + "'");
            }
            MatrixCell out{tag, cell, std::nullopt, summary->retained,
                           summary->retained < kMinRetainedGroup};
            if (summary->score.has_value() && base->second->score.has_value()) {
                out.value = *summary->score - *base->second->score;
            }
            cells.push_back(std::move(out));
        } else {
            if (tag != baseline_tag) {
                const auto base = by_key.find(std::make_pair(baseline_tag, cell));
                if (base == by_key.end()) {
                    throw std::runtime_error("missing baseline ('" + baseline_tag +
                                             "') report for cell '" + cell + "'");
                }
            }
            cells.push_back(MatrixCell{tag, cell, summary->score, summary->retained,
                                       summary->retained < kMinRetainedGroup});
        }
    }
    return cells;
}

std::string matrix_to_csv(const std::vector<MatrixCell>& cells, MatrixAxis axis) {
    std::string csv = axis == MatrixAxis::task ? "train_tag,eval_task,gain,retained,low_retained\n"
                                               : "train_tag,eval_style,score,retained,low_retained\n";
    for (const auto& cell : cells) {
        char value[32] = "";
        if (cell.value.has_value()) {
            std::snprintf(value, sizeof(value), "%.6f", *cell.value);
        }
        csv += cell.train_tag + "," + cell.cell + "," + value + "," +
               std::to_string(cell.retained) + "," + (cell.low_retained ? "true" : "false") + "\n";
    }
    return csv;
}

nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
    nlohmann::ordered_json j;
    j["task"] = report.task;
    j["style"] = to_string(report.style);
    j["word_mode"] = to_string(report.word_mode);
    if (report.n_required.has_value()) {
        j["n_required"] = *report.n_required;
    } else {
        j["n_required"] = "unconstrained";
    }
    j["train_tag"] = report.train_tag;
    j["backend"] = report.backend_identity;
    j["counts"] = {{"total", report.total},
                   {"retained", report.retained},
                   {"excluded_by_style", report.excluded_by_style},
                   {"excluded_by_n", report.excluded_by_n},
                   {"failed", report.failed}};
    j["faithful"] = report.faithful;
    if (report.score.has_value()) {
        j["score"] = *report.score;
    } else {
        j["score"] = nullptr;
    }
    j["low_retained"] = report.low_retained;
    if (report.word_mode == WordMode::multi_word) {
        auto groups = nlohmann::ordered_json::array();
        for (const auto& group : report.per_n) {
            nlohmann::ordered_json g;
            g["n"] = group.n;
            g["retained"] = group.retained;
            g["faithful"] = group.faithful;
            if (group.score.has_value()) {
                g["score"] = *group.score;
            } else {
                g["score"] = nullptr;
            }
            g["low_retained"] = group.low_retained;
            groups.push_back(std::move(g));
        }
        j["per_n"] = std::move(groups);
    }
    return j;
}

nlohmann::ordered_json trace_to_json(const InstanceTrace& trace) {
    nlohmann::ordered_json j;
    j["id"] = trace.id;
    j["style"] = to_string(trace.style);
    j["word_mode"] = to_string(trace.word_mode);
    j["input"] = trace.input;
    if (trace.second_input.has_value()) j["second_input"] = *trace.second_input;
    if (trace.failed) {
        j["failed"] = true;
        j["error"] = trace.error;
        if (!trace.prediction.empty()) j["prediction"] = trace.prediction;
        if (trace.probe.has_value()) j["probe"] = *trace.probe;
        return j;
    }
    j["prediction"] = trace.prediction;
    j["raw_explanation"] = trace.raw_explanation;
    if (trace.parse_ok) {
        if (trace.style == Style::attribution) {
            j["parsed"] = trace.parsed_words;
        } else {
            j["parsed"] = trace.parsed_text;
        }
    } else {
        j["parsed"] = nullptr;
    }
    j["style_ok"] = trace.style_ok;
    if (!trace.reason.empty()) j["reason"] = trace.reason;
    j["n_observed"] = trace.n_observed;
    j["retained"] = trace.retained;
    if (trace.probe.has_value()) j["probe"] = *trace.probe;
    if (trace.probe_prediction.has_value()) j["probe_prediction"] = *trace.probe_prediction;
    if (trace.faithful.has_value()) j["faithful"] = *trace.faithful;
    return j;
}

ReportSummary summary_from_json(const nlohmann::json& report_json) {
    ReportSummary summary;
    summary.train_tag = report_json.at("train_tag").get<std::string>();
    summary.eval_task = report_json.at("task").get<std::string>();
    const auto style = style_from_string(report_json.at("style").get<std::string>());
    if (!style) throw std::runtime_error("report json carries an unknown style");
    summary.eval_style = *style;
    if (!report_json.at("score").is_null()) {
        summary.score = report_json.at("score").get<double>();
    }
    summary.retained = report_json.at("counts").at("retained").get<std::size_t>();
    return summary;
}

}  // namespace selfexpl::evaluation
