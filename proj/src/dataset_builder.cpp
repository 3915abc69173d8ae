#include "selfexpl/dataset_builder.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "selfexpl/textops.hpp"

namespace selfexpl::dataset_builder {

TrainingExample TrainingExample::make(ChatTranscript transcript, std::vector<bool> loss_mask,
                                      std::string task_id, Style style, std::string instance_id) {
    if (transcript.size() != 4) {
        throw std::invalid_argument("training example must have exactly 4 turns");
    }
    if (loss_mask.size() != 4 || loss_mask[0] || loss_mask[1] || loss_mask[2] || !loss_mask[3]) {
        throw std::invalid_argument(
            "loss mask must cover exactly the final assistant turn");
    }
    TrainingExample example;
    example.transcript = std::move(transcript);
    example.loss_mask = std::move(loss_mask);
    example.task_id = std::move(task_id);
    example.style = style;
    example.instance_id = std::move(instance_id);
    return example;
}

TrainingExample assemble_example(const corpus::LabeledInstance& instance,
                                 const std::string& predicted_label, Style style,
                                 const construction::PseudoExplanation& pseudo,
                                 const corpus::TaskSpec& task,
                                 const prompts::TemplateRegistry& registry) {
    if (pseudo.style != style) {
        throw std::invalid_argument("pseudo-explanation style does not match the requested style");
    }
    ChatTranscript transcript = prompts::explanation_transcript(registry, task, instance,
                                                                predicted_label, style,
                                                                WordMode::one_word);
    transcript.append(Speaker::assistant, "Answer: " + pseudo.payload);
    return TrainingExample::make(std::move(transcript), {false, false, false, true}, task.task_id,
                                 style, instance.id);
}

std::string training_example_to_line(const TrainingExample& example) {
    nlohmann::ordered_json j;
    auto messages = nlohmann::ordered_json::array();
    for (const auto& turn : example.transcript.turns()) {
        messages.push_back({{"role", to_string(turn.speaker)}, {"content", turn.text}});
    }
    j["messages"] = std::move(messages);
    j["loss_mask"] = example.loss_mask;
    j["meta"] = {{"task", example.task_id},
                 {"style", to_string(example.style)},
                 {"instance_id", example.instance_id}};
    return j.dump();
}

TrainingExample training_example_from_line(const std::string& line) {
    const nlohmann::json j = nlohmann::json::parse(line);
    ChatTranscript transcript;
    for (const auto& message : j.at("messages")) {
        const std::string role = message.at("role").get<std::string>();
        if (role != "user" && role != "assistant") {
            throw std::runtime_error("unknown role '" + role + "' in training example");
        }
        transcript.append(role == "user" ? Speaker::user : Speaker::assistant,
                          message.at("content").get<std::string>());
    }
    std::vector<bool> mask;
    for (const auto& bit : j.at("loss_mask")) mask.push_back(bit.get<bool>());
    const auto& meta = j.at("meta");
    const auto style = style_from_string(meta.at("style").get<std::string>());
    if (!style) throw std::runtime_error("unknown style in training example meta");
    return TrainingExample::make(std::move(transcript), std::move(mask),
                                 meta.at("task").get<std::string>(), *style,
                                 meta.at("instance_id").get<std::string>());
}

void emit_training_file(const std::vector<TrainingExample>& examples, const std::string& path) {
    std::vector<std::string> lines;
    lines.reserve(examples.size());
    for (const auto& example : examples) lines.push_back(training_example_to_line(example));
    write_lines(lines, path);
}

std::vector<TrainingExample> load_training_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open training file: " + path);
    std::vector<TrainingExample> examples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        examples.push_back(training_example_from_line(line));
    }
    return examples;
}

std::vector<std::string> load_passthrough_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open passthrough file: " + path);
    std::vector<std::string> lines;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("messages") ||
            !j["messages"].is_array()) {
            throw std::runtime_error("passthrough " + path + " line " + std::to_string(row) +
                                     ": expected an object with a \"messages\" array");
        }
        if (!j.contains("loss_mask")) {
            std::vector<bool> mask;
            for (const auto& message : j["messages"]) {
                mask.push_back(message.is_object() && message.value("role", "") == "assistant");
            }
            j["loss_mask"] = mask;
        }
        lines.push_back(j.dump());
    }
    return lines;
}

std::vector<std::string> mix_lines(const std::vector<std::string>& constructed,
                                   const std::vector<std::string>& passthrough, uint64_t seed) {
    std::vector<std::string> mixed;
    mixed.reserve(constructed.size() + passthrough.size());
    mixed.insert(mixed.end(), constructed.begin(), constructed.end());
    mixed.insert(mixed.end(), passthrough.begin(), passthrough.end());
    // Hand-rolled Fisher-Yates over mt19937_64 keeps the interleaving stable
    // across standard libraries.
    std::mt19937_64 rng(seed);
    for (std::size_t i = mixed.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(mixed[i - 1], mixed[j]);
    }
    return mixed;
}

void write_lines(const std::vector<std::string>& lines, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (const auto& line : lines) out << line << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

evaluation::SelfExplanation preparse_pseudo(const construction::PseudoExplanation& pseudo) {
    evaluation::SelfExplanation expl;
    expl.style = pseudo.style;
    expl.word_mode = WordMode::one_word;
    expl.raw_text = pseudo.payload;
    expl.parse_ok = true;
    if (pseudo.style == Style::attribution) {
        expl.words = {pseudo.payload};
    } else {
        expl.text = pseudo.payload;
    }
    return expl;
}

ValidationArm arm_from_report(const evaluation::EvaluationReport& report) {
    ValidationArm arm;
    arm.total = report.total;
    arm.retained = report.retained;
    arm.faithful = report.faithful;
    arm.score = report.score;
    return arm;
}

}  // namespace

DatasetValidationReport validate_dataset(backend::ModelBackend& backend,
                                         const corpus::TaskSpec& task,
                                         const std::vector<corpus::LabeledInstance>& instances,
                                         Style style, const prompts::TemplateRegistry& registry,
                                         const evaluation::EvalOptions& options) {
    DatasetValidationReport report;
    report.task = task.task_id;
    report.style = style;
    report.sample_size = instances.size();

    // Arm A: explanations the backend generates on its own.
    const auto original = evaluation::evaluate_style(backend, task, instances, style,
                                                     WordMode::one_word, registry, options);
    report.original = arm_from_report(original.report);

    // Arm B: constructed pseudo-explanations, scored with the identical
    // evaluator configuration.
    std::vector<evaluation::PreparsedItem> items(instances.size());
    backend::parallel_for(instances.size(), options.concurrency, [&](std::size_t i) {
        const auto& instance = instances[i];
        evaluation::PreparsedItem& item = items[i];
        item.instance = instance;

        const auto attribution =
            construction::influence_all(backend, task, instance, registry, 1);
        if (!attribution.ok) {
            item.failed = true;
            item.error = "construction: " + attribution.error;
            return;
        }
        item.predicted_label = attribution.predicted_label;
        const auto x = textops::WordSequence::from_text(instance.input);
        switch (style) {
            case Style::attribution:
                item.explanation = preparse_pseudo(construction::build_pseudo_attribution(attribution));
                break;
            case Style::redaction:
                item.explanation =
                    preparse_pseudo(construction::build_pseudo_redaction(attribution, x));
                break;
            case Style::counterfactual: {
                const auto outcome = construction::build_pseudo_counterfactual(
                    backend, attribution, x, task, instance, registry);
                if (outcome.failed) {
                    item.failed = true;
                    item.error = "construction: " + outcome.error;
                } else if (!outcome.explanation.has_value()) {
                    item.failed = true;
                    item.error = "construction rejected: " + outcome.fill.rejection_reason;
                } else {
                    item.explanation = preparse_pseudo(*outcome.explanation);
                }
                break;
            }
            default:
                item.failed = true;
                item.error = "not a self-explanation style";
        }
    });

    const auto constructed = evaluation::score_explanations(backend, task, items, style,
                                                            WordMode::one_word, registry, options);
    report.constructed = arm_from_report(constructed.report);
    return report;
}

nlohmann::ordered_json validation_report_to_json(const DatasetValidationReport& report) {
    auto arm_json = [](const ValidationArm& arm) {
        nlohmann::ordered_json j;
        j["total"] = arm.total;
        j["retained"] = arm.retained;
        j["faithful"] = arm.faithful;
        if (arm.score.has_value()) {
            j["score"] = *arm.score;
        } else {
            j["score"] = nullptr;
        }
        return j;
    };
    nlohmann::ordered_json j;
    j["task"] = report.task;
    j["style"] = to_string(report.style);
    j["sample_size"] = report.sample_size;
    j["original"] = arm_json(report.original);
    j["constructed"] = arm_json(report.constructed);
    return j;
}

}  // namespace selfexpl::dataset_builder
