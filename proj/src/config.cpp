#include "selfexpl/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selfexpl/http_backend.hpp"
#include "selfexpl/lexicon_backend.hpp"

namespace selfexpl::config {

namespace {

using nlohmann::json;

std::vector<Style> parse_styles(const json& j, const std::string& where) {
    std::vector<Style> styles;
    if (!j.is_array()) throw ConfigError(where + ": \"styles\" must be an array");
    for (const auto& entry : j) {
        const auto style = style_from_string(entry.get<std::string>());
        if (!style || (*style != Style::attribution && *style != Style::redaction &&
                       *style != Style::counterfactual)) {
            throw ConfigError(where + ": unknown explanation style '" +
                              entry.get<std::string>() + "'");
        }
        styles.push_back(*style);
    }
    if (styles.empty()) throw ConfigError(where + ": \"styles\" must not be empty");
    return styles;
}

WordMode parse_word_mode(const json& j, const std::string& where) {
    const auto mode = word_mode_from_string(j.get<std::string>());
    if (!mode || *mode == WordMode::na) {
        throw ConfigError(where + ": \"word_mode\" must be one_word or multi_word");
    }
    return *mode;
}

std::optional<int> parse_n_words(const json& j, const std::string& where) {
    if (j.is_string()) {
        if (j.get<std::string>() == "unconstrained") return std::nullopt;
        throw ConfigError(where + ": \"n_words\" must be an integer or \"unconstrained\"");
    }
    const int n = j.get<int>();
    if (n < 1) throw ConfigError(where + ": \"n_words\" must be >= 1");
    return n;
}

BackendSpec parse_backend(const json& j, const std::string& where) {
    BackendSpec spec;
    if (!j.is_object()) throw ConfigError(where + ": \"backend\" must be an object");
    spec.kind = j.value("kind", "lexicon");
    if (spec.kind == "lexicon") {
        if (!j.contains("lexicon_path")) {
            throw ConfigError(where + ": lexicon backend needs \"lexicon_path\"");
        }
        spec.lexicon_path = j.at("lexicon_path").get<std::string>();
        spec.policy = j.value("policy", "faithful_argmax");
        if (!backend::explanation_policy_from_string(spec.policy)) {
            throw ConfigError(where + ": unknown explanation policy '" + spec.policy + "'");
        }
        spec.fixed_word = j.value("fixed_word", "the");
        spec.corrupt_rate = j.value("corrupt_rate", 0.0);
        if (spec.corrupt_rate < 0.0 || spec.corrupt_rate > 1.0) {
            throw ConfigError(where + ": \"corrupt_rate\" must lie in [0, 1]");
        }
        spec.corrupt_salt = j.value("corrupt_salt", 0ULL);
    } else if (spec.kind == "http") {
        if (!j.contains("endpoint") || !j.contains("model")) {
            throw ConfigError(where + ": http backend needs \"endpoint\" and \"model\"");
        }
        spec.endpoint = j.at("endpoint").get<std::string>();
        spec.model = j.at("model").get<std::string>();
        spec.auth_token = j.value("auth_token", "");
        spec.auth_token_env = j.value("auth_token_env", "SELFEXPL_TOKEN");
        spec.request_logprobs = j.value("request_logprobs", true);
        spec.max_tokens = j.value("max_tokens", 256);
        spec.max_attempts = j.value("max_attempts", 3);
        spec.backoff_ms = j.value("backoff_ms", 100);
    } else {
        throw ConfigError(where + ": unknown backend kind '" + spec.kind + "'");
    }
    return spec;
}

corpus::TaskSpec parse_task_spec(const json& j) {
    corpus::TaskSpec task;
    task.task_id = j.at("task_id").get<std::string>();
    for (const auto& label : j.at("labels")) task.label_names.push_back(label.get<std::string>());
    task.input_arity = j.value("input_arity", 1);
    task.prompt_set_id = j.value("prompt_set_id", task.task_id);
    try {
        task.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("tasks: ") + e.what());
    }
    return task;
}

RunSpec parse_run(const json& j, std::size_t index) {
    const std::string where = "runs[" + std::to_string(index) + "]";
    RunSpec run;
    if (j.contains("task")) run.task = j.at("task").get<std::string>();
    if (j.contains("styles")) run.styles = parse_styles(j.at("styles"), where);
    if (j.contains("word_mode")) run.word_mode = parse_word_mode(j.at("word_mode"), where);
    if (j.contains("n_words")) run.n_words = parse_n_words(j.at("n_words"), where);
    if (j.contains("train_tag")) run.train_tag = j.at("train_tag").get<std::string>();
    if (j.contains("backend")) run.backend = parse_backend(j.at("backend"), where);
    if (j.contains("corpus_path")) run.corpus_path = j.at("corpus_path").get<std::string>();
    if (j.contains("corpus_format")) run.corpus_format = j.at("corpus_format").get<std::string>();
    return run;
}

}  // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config file is not a json object: " + path);
    }

    RunConfig config;
    {
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(hash64(text)));
        config.config_hash = hex;
    }

    try {
        if (j.contains("task")) config.task = j.at("task").get<std::string>();
        if (j.contains("corpus_path")) config.corpus_path = j.at("corpus_path").get<std::string>();
        config.corpus_format = j.value("corpus_format", "jsonl");
        if (j.contains("backend")) config.backend = parse_backend(j.at("backend"), "config");
        if (j.contains("styles")) config.styles = parse_styles(j.at("styles"), "config");
        if (j.contains("word_mode")) config.word_mode = parse_word_mode(j.at("word_mode"), "config");
        if (j.contains("n_words")) config.n_words = parse_n_words(j.at("n_words"), "config");
        config.sample_size = j.value("sample_size", 0ULL);
        if (j.contains("seed")) config.seed = j.at("seed").get<uint64_t>();
        config.output_dir = j.value("output_dir", "out");
        config.concurrency = j.value("concurrency", 8);
        if (config.concurrency < 1) throw ConfigError("\"concurrency\" must be >= 1");
        config.templates_path = j.value("templates_path", "");
        config.train_tag = j.value("train_tag", "untrained");
        if (j.contains("runs")) {
            std::size_t index = 0;
            for (const auto& run : j.at("runs")) config.runs.push_back(parse_run(run, index++));
        }
        if (j.contains("matrix")) {
            const auto& m = j.at("matrix");
            config.matrix.enabled = true;
            config.matrix.baseline_tag = m.value("baseline_tag", "untrained");
            config.matrix.axis = m.value("axis", "task");
            if (config.matrix.axis != "task" && config.matrix.axis != "style") {
                throw ConfigError("matrix \"axis\" must be \"task\" or \"style\"");
            }
            if (m.contains("report_paths")) {
                for (const auto& p : m.at("report_paths")) {
                    config.matrix.report_paths.push_back(p.get<std::string>());
                }
            }
        }
        if (j.contains("mixing")) {
            const auto& m = j.at("mixing");
            config.mixing.enabled = true;
            config.mixing.passthrough_path = m.at("passthrough_path").get<std::string>();
            config.mixing.constructed_count = m.value("constructed_count", 0ULL);
            config.mixing.passthrough_count = m.value("passthrough_count", 0ULL);
        }
        if (j.contains("tasks")) {
            for (const auto& t : j.at("tasks")) config.custom_tasks.push_back(parse_task_spec(t));
        }
        if (j.contains("trace_paths")) {
            for (const auto& p : j.at("trace_paths")) {
                config.trace_paths.push_back(p.get<std::string>());
            }
        }
        config.top_k = j.value("top_k", 10ULL);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }

    if (config.sample_size > 0 && !config.seed.has_value()) {
        throw ConfigError("\"seed\" is required whenever \"sample_size\" requests sampling");
    }
    if (config.mixing.enabled && !config.seed.has_value()) {
        throw ConfigError("\"seed\" is required when \"mixing\" interleaves records");
    }
    return config;
}

corpus::TaskSpec resolve_task(const RunConfig& config, const std::string& task_id) {
    for (const auto& task : config.custom_tasks) {
        if (task.task_id == task_id) return task;
    }
    if (const auto task = corpus::find_builtin_task(task_id)) return *task;
    throw ConfigError("unknown task '" + task_id + "' (not builtin, not defined under \"tasks\")");
}

prompts::TemplateRegistry load_registry(const RunConfig& config) {
    if (config.templates_path.empty()) return prompts::TemplateRegistry::builtin();
    try {
        return prompts::TemplateRegistry::from_file(config.templates_path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
}

std::unique_ptr<backend::ModelBackend> make_backend(const BackendSpec& spec) {
    if (spec.kind == "lexicon") {
        backend::LexiconOptions options;
        options.policy = *backend::explanation_policy_from_string(spec.policy);
        options.fixed_word = spec.fixed_word;
        options.corrupt_rate = spec.corrupt_rate;
        options.corrupt_salt = spec.corrupt_salt;
        try {
            return std::make_unique<backend::LexiconModel>(
                backend::LexiconModel::from_file(spec.lexicon_path, options));
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
    }
    backend::HttpBackendConfig http;
    http.endpoint = spec.endpoint;
    http.model = spec.model;
    http.auth_token = spec.auth_token;
    if (http.auth_token.empty() && !spec.auth_token_env.empty()) {
        if (const char* token = std::getenv(spec.auth_token_env.c_str())) {
            http.auth_token = token;
        }
    }
    http.request_logprobs = spec.request_logprobs;
    http.max_tokens = spec.max_tokens;
    http.max_attempts = spec.max_attempts;
    http.backoff_ms = spec.backoff_ms;
    return std::make_unique<backend::HttpChatBackend>(std::move(http));
}

}  // namespace selfexpl::config
