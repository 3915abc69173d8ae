#include "selfexpl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "selfexpl/textops.hpp"

namespace selfexpl::corpus {

void TaskSpec::validate() const {
    if (task_id.empty()) throw std::invalid_argument("task_id must be nonempty");
    if (label_names.size() < 2) {
        throw std::invalid_argument("task '" + task_id + "' needs at least 2 labels");
    }
    std::set<std::string> seen;
    for (const auto& label : label_names) {
        if (label.empty()) throw std::invalid_argument("task '" + task_id + "' has an empty label");
        if (!seen.insert(label).second) {
            throw std::invalid_argument("task '" + task_id + "' has duplicate label '" + label + "'");
        }
    }
    if (input_arity != 1 && input_arity != 2) {
        throw std::invalid_argument("task '" + task_id + "' input_arity must be 1 or 2");
    }
}

std::size_t TaskSpec::label_index(const std::string& label) const {
    for (std::size_t i = 0; i < label_names.size(); ++i) {
        if (label_names[i] == label) return i;
    }
    return kNoLabel;
}

const std::vector<TaskSpec>& builtin_tasks() {
    static const std::vector<TaskSpec> tasks = {
        TaskSpec{"sentiment140", {"Positive", "Negative"}, 1, "sentiment140"},
        TaskSpec{"snli", {"Yes", "No", "Maybe"}, 2, "snli"},
        TaskSpec{"agnews", {"World", "Sport", "Business", "Tech"}, 1, "agnews"},
    };
    return tasks;
}

std::optional<TaskSpec> find_builtin_task(const std::string& task_id) {
    for (const auto& task : builtin_tasks()) {
        if (task.task_id == task_id) return task;
    }
    return std::nullopt;
}

std::optional<CorpusFormat> corpus_format_from_string(const std::string& s) {
    if (s == "csv") return CorpusFormat::csv;
    if (s == "tsv") return CorpusFormat::tsv;
    if (s == "jsonl") return CorpusFormat::jsonl;
    return std::nullopt;
}

namespace {

// RFC-4180-ish: quoted fields, doubled quotes as escapes. No multi-line fields.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::vector<std::string> split_tsv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == '\t') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

struct RawRecord {
    std::optional<std::string> id;
    std::optional<std::string> text;
    std::optional<std::string> text2;
    std::optional<std::string> label;
};

void validate_record(const RawRecord& rec, std::size_t row, std::size_t index,
                     const TaskSpec& task, LoadResult& out) {
    if (!rec.text.has_value()) {
        out.errors.push_back(RowError{row, "missing field 'text'"});
        return;
    }
    if (!rec.label.has_value()) {
        out.errors.push_back(RowError{row, "missing field 'label'"});
        return;
    }
    if (task.input_arity == 2 && !rec.text2.has_value()) {
        out.errors.push_back(RowError{row, "missing field 'text2' (task expects two inputs)"});
        return;
    }
    if (textops::tokenize(*rec.text).empty()) {
        out.errors.push_back(RowError{row, "empty text"});
        return;
    }
    if (task.label_index(*rec.label) == kNoLabel) {
        out.errors.push_back(RowError{row, "unknown label value '" + *rec.label + "'"});
        return;
    }
    LabeledInstance instance;
    instance.id = rec.id.has_value() && !rec.id->empty() ? *rec.id : "row-" + std::to_string(index);
    instance.input = *rec.text;
    if (task.input_arity == 2) instance.second_input = rec.text2;
    instance.gold_label = *rec.label;
    out.instances.push_back(std::move(instance));
}

}  // namespace

LoadResult load_corpus(const std::string& path, CorpusFormat format, const TaskSpec& task) {
    task.validate();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);

    LoadResult result;
    std::string line;
    std::size_t row = 0;
    std::size_t index = 0;

    if (format == CorpusFormat::jsonl) {
        while (std::getline(in, line)) {
            ++row;
            line = strip_cr(line);
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                result.errors.push_back(RowError{row, "invalid json object"});
                continue;
            }
            RawRecord rec;
            if (j.contains("id")) {
                rec.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
            }
            if (j.contains("text") && j["text"].is_string()) rec.text = j["text"].get<std::string>();
            if (j.contains("text2") && j["text2"].is_string()) rec.text2 = j["text2"].get<std::string>();
            if (j.contains("label") && j["label"].is_string()) rec.label = j["label"].get<std::string>();
            validate_record(rec, row, index, task, result);
            ++index;
        }
        return result;
    }

    // csv / tsv with header row
    auto split = format == CorpusFormat::csv ? split_csv_row : split_tsv_row;
    if (!std::getline(in, line)) return result;  // empty file -> empty list
    ++row;
    const auto header = split(strip_cr(line));
    std::map<std::string, std::size_t> columns;
    for (std::size_t i = 0; i < header.size(); ++i) columns[header[i]] = i;

    auto cell = [&](const std::vector<std::string>& fields,
                    const std::string& name) -> std::optional<std::string> {
        auto it = columns.find(name);
        if (it == columns.end() || it->second >= fields.size()) return std::nullopt;
        return fields[it->second];
    };

    while (std::getline(in, line)) {
        ++row;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split(line);
        RawRecord rec;
        rec.id = cell(fields, "id");
        rec.text = cell(fields, "text");
        rec.text2 = cell(fields, "text2");
        rec.label = cell(fields, "label");
        validate_record(rec, row, index, task, result);
        ++index;
    }
    return result;
}

void write_jsonl(const std::vector<LabeledInstance>& instances, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const auto& instance : instances) {
        nlohmann::ordered_json j;
        j["id"] = instance.id;
        j["text"] = instance.input;
        if (instance.second_input.has_value()) j["text2"] = *instance.second_input;
        j["label"] = instance.gold_label;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// Hand-rolled Fisher-Yates: std::shuffle's use of the URBG is
// implementation-defined, which would break seed-stable outputs.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace

std::vector<LabeledInstance> balanced_sample(const std::vector<LabeledInstance>& instances,
                                             std::size_t n, uint64_t seed, const TaskSpec& task) {
    task.validate();
    if (n == 0) return {};

    std::vector<std::vector<std::size_t>> buckets(task.label_names.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::size_t label = task.label_index(instances[i].gold_label);
        if (label == kNoLabel) {
            throw std::runtime_error("instance '" + instances[i].id + "' carries unknown label '" +
                                     instances[i].gold_label + "'");
        }
        buckets[label].push_back(i);
    }

    const std::size_t k = task.label_names.size();
    const std::size_t base = n / k;
    const std::size_t surplus = n % k;

    std::vector<std::size_t> picked;
    picked.reserve(n);
    for (std::size_t label = 0; label < k; ++label) {
        const std::size_t quota = base + (label < surplus ? 1 : 0);
        if (buckets[label].size() < quota) {
            throw std::runtime_error("label '" + task.label_names[label] + "' has only " +
                                     std::to_string(buckets[label].size()) + " instances; " +
                                     std::to_string(quota) + " needed for a balanced sample");
        }
        auto& bucket = buckets[label];
        deterministic_shuffle(bucket, hash64(task.label_names[label], seed));
        picked.insert(picked.end(), bucket.begin(), bucket.begin() + static_cast<std::ptrdiff_t>(quota));
    }
    deterministic_shuffle(picked, seed);

    std::vector<LabeledInstance> sample;
    sample.reserve(picked.size());
    for (std::size_t i : picked) sample.push_back(instances[i]);
    return sample;
}

FieldStats field_stats(const std::vector<LabeledInstance>& instances) {
    FieldStats stats;
    stats.count = instances.size();
    if (instances.empty()) return stats;

    double input_words = 0.0;
    double second_words = 0.0;
    std::size_t second_count = 0;
    for (const auto& instance : instances) {
        input_words += static_cast<double>(textops::tokenize(instance.input).size());
        if (instance.second_input.has_value()) {
            second_words += static_cast<double>(textops::tokenize(*instance.second_input).size());
            ++second_count;
        }
    }
    stats.avg_input_words = input_words / static_cast<double>(instances.size());
    if (second_count > 0) {
        stats.avg_second_input_words = second_words / static_cast<double>(second_count);
    }
    return stats;
}

void validate_split(const CorpusSplit& split) {
    std::set<std::string> train_ids;
    for (const auto& instance : split.train) train_ids.insert(instance.id);
    for (const auto& instance : split.test) {
        if (train_ids.count(instance.id)) {
            throw std::invalid_argument("instance id '" + instance.id +
                                        "' appears in both train and test");
        }
    }
}

SplitStats split_stats(const CorpusSplit& split) {
    validate_split(split);
    return SplitStats{field_stats(split.train), field_stats(split.test)};
}

}  // namespace selfexpl::corpus
