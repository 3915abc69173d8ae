#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace selfexpl::corpus {

struct TaskSpec {
    std::string task_id;
    std::vector<std::string> label_names;  // ordered; order breaks ties everywhere
    int input_arity = 1;                   // 1 or 2
    std::string prompt_set_id;             // key into the prompt registry

    // Throws std::invalid_argument on duplicate/empty labels or bad arity.
    void validate() const;
    std::size_t label_index(const std::string& label) const;  // npos if absent
};

inline constexpr std::size_t kNoLabel = static_cast<std::size_t>(-1);

// sentiment140 (Positive/Negative), snli (Yes/No/Maybe, premise+hypothesis),
// agnews (World/Sport/Business/Tech).
const std::vector<TaskSpec>& builtin_tasks();
std::optional<TaskSpec> find_builtin_task(const std::string& task_id);

struct LabeledInstance {
    std::string id;
    std::string input;
    std::optional<std::string> second_input;
    std::string gold_label;

    bool operator==(const LabeledInstance&) const = default;
};

enum class CorpusFormat { csv, tsv, jsonl };
std::optional<CorpusFormat> corpus_format_from_string(const std::string& s);

struct RowError {
    std::size_t row = 0;  // 1-based line number in the source file
    std::string message;
};

struct LoadResult {
    std::vector<LabeledInstance> instances;
    std::vector<RowError> errors;
};

// Loads and validates instances. Malformed rows land in errors with their
// row numbers; an unreadable file throws std::runtime_error. Instances
// without an id get "row-<index>".
LoadResult load_corpus(const std::string& path, CorpusFormat format, const TaskSpec& task);

// Canonical jsonl: {"id", "text", "text2"?, "label"}, UTF-8, one object per line.
void write_jsonl(const std::vector<LabeledInstance>& instances, const std::string& path);

// Deterministic label-balanced sample: per-label counts differ by at most 1,
// surplus goes to labels in TaskSpec order, output order is a function of
// seed. Throws std::runtime_error when some label cannot supply its quota.
std::vector<LabeledInstance> balanced_sample(const std::vector<LabeledInstance>& instances,
                                             std::size_t n, uint64_t seed, const TaskSpec& task);

struct FieldStats {
    std::size_t count = 0;
    double avg_input_words = 0.0;
    std::optional<double> avg_second_input_words;
};

FieldStats field_stats(const std::vector<LabeledInstance>& instances);

struct CorpusSplit {
    std::vector<LabeledInstance> train;
    std::vector<LabeledInstance> test;
};

// Throws std::invalid_argument when train and test share an id.
void validate_split(const CorpusSplit& split);

struct SplitStats {
    FieldStats train;
    FieldStats test;
};

SplitStats split_stats(const CorpusSplit& split);

}  // namespace selfexpl::corpus
