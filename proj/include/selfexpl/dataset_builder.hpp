#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selfexpl/backend.hpp"
#include "selfexpl/construction.hpp"
#include "selfexpl/corpus.hpp"
#include "selfexpl/evaluation.hpp"
#include "selfexpl/prompts.hpp"
#include "selfexpl/types.hpp"

namespace selfexpl::dataset_builder {

// Four-turn chat example with the loss mask on the final explanation turn
// only. Turn 2 carries the model's own prediction, never the gold label.
struct TrainingExample {
    ChatTranscript transcript;
    std::vector<bool> loss_mask;
    std::string task_id;
    Style style = Style::attribution;
    std::string instance_id;

    // Validates the shape; throws std::invalid_argument on a transcript that
    // is not 4 alternating turns or a mask that is not {false,false,false,true}.
    static TrainingExample make(ChatTranscript transcript, std::vector<bool> loss_mask,
                                std::string task_id, Style style, std::string instance_id);

    bool operator==(const TrainingExample&) const = default;
};

TrainingExample assemble_example(const corpus::LabeledInstance& instance,
                                 const std::string& predicted_label, Style style,
                                 const construction::PseudoExplanation& pseudo,
                                 const corpus::TaskSpec& task,
                                 const prompts::TemplateRegistry& registry);

// One jsonl line: {"messages": [{"role", "content"}...], "loss_mask": [...],
// "meta": {"task", "style", "instance_id"}}.
std::string training_example_to_line(const TrainingExample& example);
TrainingExample training_example_from_line(const std::string& line);

void emit_training_file(const std::vector<TrainingExample>& examples, const std::string& path);
std::vector<TrainingExample> load_training_file(const std::string& path);

// Instruction-tuning passthrough records are copied verbatim (modulo json
// canonicalization); records lacking a loss_mask get one defaulting to
// all-assistant-turns.
std::vector<std::string> load_passthrough_lines(const std::string& path);

// Deterministic interleaving by seed; the output holds every line of both
// inputs exactly once.
std::vector<std::string> mix_lines(const std::vector<std::string>& constructed,
                                   const std::vector<std::string>& passthrough, uint64_t seed);

void write_lines(const std::vector<std::string>& lines, const std::string& path);

struct ValidationArm {
    std::size_t total = 0;
    std::size_t retained = 0;
    std::size_t faithful = 0;
    std::optional<double> score;  // nullopt when retained = 0
};

struct DatasetValidationReport {
    std::string task;
    Style style = Style::attribution;
    std::size_t sample_size = 0;
    ValidationArm original;     // explanations generated by the backend
    ValidationArm constructed;  // pseudo-explanations built from attribution
};

// Scores backend-generated explanations against constructed ones with the
// identical evaluator configuration.
DatasetValidationReport validate_dataset(backend::ModelBackend& backend,
                                         const corpus::TaskSpec& task,
                                         const std::vector<corpus::LabeledInstance>& instances,
                                         Style style, const prompts::TemplateRegistry& registry,
                                         const evaluation::EvalOptions& options);

nlohmann::ordered_json validation_report_to_json(const DatasetValidationReport& report);

}  // namespace selfexpl::dataset_builder
