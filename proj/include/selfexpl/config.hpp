#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "selfexpl/backend.hpp"
#include "selfexpl/corpus.hpp"
#include "selfexpl/prompts.hpp"
#include "selfexpl/types.hpp"

namespace selfexpl::config {

// Configuration problems exit with code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BackendSpec {
    std::string kind = "lexicon";  // "lexicon" | "http"
    // lexicon
    std::string lexicon_path;
    std::string policy = "faithful_argmax";
    std::string fixed_word = "the";
    double corrupt_rate = 0.0;
    uint64_t corrupt_salt = 0;
    // http
    std::string endpoint;
    std::string model;
    std::string auth_token;                        // literal token, or
    std::string auth_token_env = "SELFEXPL_TOKEN";  // env var holding it
    bool request_logprobs = true;
    int max_tokens = 256;
    int max_attempts = 3;
    int backoff_ms = 100;
};

// One evaluation/build cell; unset fields inherit the config defaults.
struct RunSpec {
    std::optional<std::string> task;
    std::vector<Style> styles;
    std::optional<WordMode> word_mode;
    std::optional<std::optional<int>> n_words;  // inner nullopt = unconstrained
    std::optional<std::string> train_tag;
    std::optional<BackendSpec> backend;
    std::optional<std::string> corpus_path;
    std::optional<std::string> corpus_format;
};

struct MatrixSpec {
    bool enabled = false;
    std::string baseline_tag = "untrained";
    std::string axis = "task";              // "task" | "style"
    std::vector<std::string> report_paths;  // report jsons from earlier runs
};

struct MixingSpec {
    bool enabled = false;
    std::string passthrough_path;
    std::size_t constructed_count = 0;  // 0 = all
    std::size_t passthrough_count = 0;  // 0 = all
};

struct RunConfig {
    std::string task;
    std::string corpus_path;
    std::string corpus_format = "jsonl";
    BackendSpec backend;
    std::vector<Style> styles;
    WordMode word_mode = WordMode::one_word;
    std::optional<int> n_words = 1;  // nullopt = unconstrained
    std::size_t sample_size = 0;     // 0 = every loaded instance
    std::optional<uint64_t> seed;
    std::string output_dir = "out";
    int concurrency = 8;
    std::string templates_path;  // empty = builtin registry
    std::string train_tag = "untrained";
    std::vector<RunSpec> runs;  // empty = one implicit run from the defaults
    MatrixSpec matrix;
    MixingSpec mixing;
    std::vector<corpus::TaskSpec> custom_tasks;
    // analyze
    std::vector<std::string> trace_paths;
    std::size_t top_k = 10;

    std::string config_hash;  // hex hash of the config file bytes
};

RunConfig load_config(const std::string& path);

// Builtin task or one defined under "tasks" in the config.
corpus::TaskSpec resolve_task(const RunConfig& config, const std::string& task_id);

prompts::TemplateRegistry load_registry(const RunConfig& config);

std::unique_ptr<backend::ModelBackend> make_backend(const BackendSpec& spec);

}  // namespace selfexpl::config
