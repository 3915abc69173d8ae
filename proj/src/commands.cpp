#include "selfexpl/commands.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "selfexpl/construction.hpp"
#include "selfexpl/dataset_builder.hpp"
#include "selfexpl/evaluation.hpp"
#include "selfexpl/textops.hpp"

namespace selfexpl::commands {

namespace fs = std::filesystem;
using config::ConfigError;
using config::RunConfig;

namespace {

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '-');
    }
    return out;
}

// temp-then-rename so partial outputs never land under their final name
void write_text_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_lines_atomic(const fs::path& path, const std::vector<std::string>& lines) {
    std::string content;
    for (const auto& line : lines) {
        content += line;
        content.push_back('\n');
    }
    write_text_atomic(path, content);
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buffer[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buffer;
}

struct Manifest {
    std::string command;
    std::string started_at;
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    nlohmann::ordered_json totals = nlohmann::ordered_json::object();

    explicit Manifest(std::string cmd) : command(std::move(cmd)), started_at(iso_now()) {}

    void add_output(const fs::path& path) {
        outputs.push_back({{"path", path.string()},
                           {"bytes", static_cast<std::size_t>(fs::file_size(path))}});
    }

    void write(const RunConfig& config) const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config_hash"] = config.config_hash;
        j["backend"] = config.backend.kind;
        j["started_at"] = started_at;
        j["finished_at"] = iso_now();
        j["outputs"] = outputs;
        j["totals"] = totals;
        write_text_atomic(fs::path(config.output_dir) / "manifest.json", j.dump(2) + "\n");
    }
};

struct LoadedCorpus {
    corpus::TaskSpec task;
    std::vector<corpus::LabeledInstance> instances;
};

LoadedCorpus load_instances(const RunConfig& config, const std::string& task_id,
                            const std::string& corpus_path, const std::string& corpus_format) {
    LoadedCorpus loaded;
    loaded.task = config::resolve_task(config, task_id);
    if (corpus_path.empty()) throw ConfigError("\"corpus_path\" is required");
    const auto format = corpus::corpus_format_from_string(corpus_format);
    if (!format) throw ConfigError("unknown corpus format '" + corpus_format + "'");

    corpus::LoadResult result;
    try {
        result = corpus::load_corpus(corpus_path, *format, loaded.task);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    for (const auto& error : result.errors) {
        std::cerr << corpus_path << ":" << error.row << ": " << error.message << "\n";
    }
    loaded.instances = std::move(result.instances);

    if (config.sample_size > 0) {
        try {
            loaded.instances = corpus::balanced_sample(loaded.instances, config.sample_size,
                                                       *config.seed, loaded.task);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
    }
    if (loaded.instances.empty()) {
        throw ConfigError("corpus '" + corpus_path + "' yields no usable instances");
    }
    return loaded;
}

void require_templates(const prompts::TemplateRegistry& registry, const corpus::TaskSpec& task,
                       const std::vector<Style>& styles, WordMode mode, bool need_cf_fill) {
    try {
        registry.require(task.prompt_set_id, Style::classification);
        for (Style style : styles) registry.require(task.prompt_set_id, style, mode);
        if (need_cf_fill) registry.require(task.prompt_set_id, Style::cf_fill);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
}

int exit_code_for(std::size_t failed, std::size_t total) {
    if (total > 0 && failed == total) return kBackendFailure;
    if (failed > 0) return kPartial;
    return kOk;
}

std::string format_score(const std::optional<double>& score, std::size_t retained) {
    if (!score.has_value()) return "undefined (n=" + std::to_string(retained) + ")";
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.3f", *score);
    return buffer;
}

}  // namespace

int cmd_build_dataset(const RunConfig& config) {
    const auto registry = config::load_registry(config);
    if (config.styles.empty()) throw ConfigError("\"styles\" is required for build-dataset");
    const auto loaded = load_instances(config, config.task, config.corpus_path, config.corpus_format);
    const auto& task = loaded.task;
    const auto& instances = loaded.instances;
    const bool want_counterfactual =
        std::find(config.styles.begin(), config.styles.end(), Style::counterfactual) !=
        config.styles.end();
    require_templates(registry, task, config.styles, WordMode::one_word, want_counterfactual);

    auto backend_ptr = config::make_backend(config.backend);
    Manifest manifest("build-dataset");

    struct InstanceOutcome {
        construction::AttributionResult attribution;
        construction::CounterfactualOutcome counterfactual;
    };
    std::vector<InstanceOutcome> outcomes(instances.size());
    backend::parallel_for(instances.size(), config.concurrency, [&](std::size_t i) {
        auto& outcome = outcomes[i];
        outcome.attribution =
            construction::influence_all(*backend_ptr, task, instances[i], registry, 1);
        if (want_counterfactual && outcome.attribution.ok) {
            const auto x = textops::WordSequence::from_text(instances[i].input);
            outcome.counterfactual = construction::build_pseudo_counterfactual(
                *backend_ptr, outcome.attribution, x, task, instances[i], registry);
        }
    });

    // Attribution log, one record per instance in corpus order.
    std::vector<std::string> log_lines;
    log_lines.reserve(instances.size());
    std::size_t failed = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& result = outcomes[i].attribution;
        nlohmann::ordered_json j;
        j["id"] = instances[i].id;
        if (!result.ok) {
            ++failed;
            j["failed"] = true;
            j["error"] = result.error;
            log_lines.push_back(j.dump());
            continue;
        }
        j["y_hat"] = result.predicted_label;
        j["p_yhat"] = result.p_predicted;
        auto scores = nlohmann::ordered_json::array();
        for (const auto& score : result.all_scores) {
            scores.push_back(
                {{"index", score.word_index}, {"word", score.word}, {"score", score.score}});
        }
        j["scores"] = std::move(scores);
        j["w_star_index"] = result.top_word_index;
        j["w_star"] = result.top_word;
        if (result.degraded) j["degraded"] = true;
        if (want_counterfactual) {
            const auto& cf = outcomes[i].counterfactual;
            if (cf.failed) {
                j["cf_failed"] = true;
                j["cf_error"] = cf.error;
            } else {
                j["cf_accepted"] = cf.fill.accepted;
                j["cf_bar_label"] = cf.fill.bar_label;
                if (!cf.fill.accepted) {
                    j["cf_reason"] = cf.fill.rejection_reason;
                } else {
                    j["cf_fill"] = cf.fill.fill_word;
                }
            }
        }
        log_lines.push_back(j.dump());
    }
    const fs::path out_dir(config.output_dir);
    write_lines_atomic(out_dir / "attribution_log.jsonl", log_lines);
    manifest.add_output(out_dir / "attribution_log.jsonl");

    // Per-style training files plus acceptance/rejection accounting.
    nlohmann::ordered_json style_report = nlohmann::ordered_json::object();
    std::vector<std::string> passthrough;
    if (config.mixing.enabled) {
        passthrough = dataset_builder::load_passthrough_lines(config.mixing.passthrough_path);
        if (config.mixing.passthrough_count > 0) {
            if (passthrough.size() < config.mixing.passthrough_count) {
                throw ConfigError("passthrough file holds " + std::to_string(passthrough.size()) +
                                  " records, " + std::to_string(config.mixing.passthrough_count) +
                                  " requested");
            }
            passthrough.resize(config.mixing.passthrough_count);
        }
    }

    for (Style style : config.styles) {
        std::vector<std::string> lines;
        std::map<std::string, std::size_t> rejections;
        std::size_t style_failed = 0;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& result = outcomes[i].attribution;
            if (!result.ok) {
                ++style_failed;
                continue;
            }
            std::optional<construction::PseudoExplanation> pseudo;
            switch (style) {
                case Style::attribution:
                    pseudo = construction::build_pseudo_attribution(result);
                    break;
                case Style::redaction:
                    pseudo = construction::build_pseudo_redaction(
                        result, textops::WordSequence::from_text(instances[i].input));
                    break;
                case Style::counterfactual: {
                    const auto& cf = outcomes[i].counterfactual;
                    if (cf.failed) {
                        ++style_failed;
                    } else if (!cf.explanation.has_value()) {
                        ++rejections[cf.fill.rejection_reason];
                    } else {
                        pseudo = cf.explanation;
                    }
                    break;
                }
                default:
                    break;
            }
            if (!pseudo) continue;
            const auto example = dataset_builder::assemble_example(
                instances[i], result.predicted_label, style, *pseudo, task, registry);
            lines.push_back(dataset_builder::training_example_to_line(example));
        }

        std::size_t constructed_used = lines.size();
        if (config.mixing.enabled) {
            if (config.mixing.constructed_count > 0) {
                if (lines.size() < config.mixing.constructed_count) {
                    throw ConfigError("style " + std::string(to_string(style)) + " constructed " +
                                      std::to_string(lines.size()) + " examples, " +
                                      std::to_string(config.mixing.constructed_count) +
                                      " requested for mixing");
                }
                lines.resize(config.mixing.constructed_count);
                constructed_used = lines.size();
            }
            lines = dataset_builder::mix_lines(lines, passthrough, *config.seed);
        }

        const fs::path train_path = out_dir / ("train_" + std::string(to_string(style)) + ".jsonl");
        write_lines_atomic(train_path, lines);
        manifest.add_output(train_path);

        nlohmann::ordered_json per_style;
        per_style["constructed"] = constructed_used;
        per_style["failed"] = style_failed;
        auto rejected = nlohmann::ordered_json::object();
        std::size_t rejected_total = 0;
        for (const auto& [reason, count] : rejections) {
            rejected[reason] = count;
            rejected_total += count;
        }
        per_style["rejected"] = rejected_total;
        per_style["rejection_reasons"] = std::move(rejected);
        per_style["emitted_lines"] = lines.size();
        style_report[to_string(style)] = std::move(per_style);

        std::cout << "build " << to_string(style) << ": " << constructed_used << " constructed, "
                  << rejected_total << " rejected, " << style_failed << " failed -> "
                  << train_path.string() << " (" << lines.size() << " lines)\n";
    }

    nlohmann::ordered_json report;
    report["task"] = task.task_id;
    report["instances"] = instances.size();
    report["failed_instances"] = failed;
    report["styles"] = std::move(style_report);
    write_text_atomic(out_dir / "construction_report.json", report.dump(2) + "\n");
    manifest.add_output(out_dir / "construction_report.json");

    manifest.totals["instances"] = instances.size();
    manifest.totals["failed_instances"] = failed;
    manifest.write(config);
    return exit_code_for(failed, instances.size());
}

int cmd_validate_dataset(const RunConfig& config) {
    const auto registry = config::load_registry(config);
    if (config.styles.empty()) throw ConfigError("\"styles\" is required for validate-dataset");
    const auto loaded = load_instances(config, config.task, config.corpus_path, config.corpus_format);
    const bool want_counterfactual =
        std::find(config.styles.begin(), config.styles.end(), Style::counterfactual) !=
        config.styles.end();
    require_templates(registry, loaded.task, config.styles, WordMode::one_word, want_counterfactual);

    auto backend_ptr = config::make_backend(config.backend);
    Manifest manifest("validate-dataset");

    evaluation::EvalOptions options;
    options.n_required = 1;
    options.concurrency = config.concurrency;
    options.train_tag = config.train_tag;

    auto reports = nlohmann::ordered_json::array();
    for (Style style : config.styles) {
        const auto report = dataset_builder::validate_dataset(*backend_ptr, loaded.task,
                                                              loaded.instances, style, registry,
                                                              options);
        reports.push_back(dataset_builder::validation_report_to_json(report));
        std::cout << "validate " << to_string(style) << ": original "
                  << format_score(report.original.score, report.original.retained)
                  << " vs constructed "
                  << format_score(report.constructed.score, report.constructed.retained) << " over "
                  << report.sample_size << " samples\n";
    }

    const fs::path out_path = fs::path(config.output_dir) / "validation_report.json";
    write_text_atomic(out_path, reports.dump(2) + "\n");
    manifest.add_output(out_path);
    manifest.totals["sample_size"] = loaded.instances.size();
    manifest.write(config);
    return kOk;
}

int cmd_evaluate(const RunConfig& config) {
    const auto registry = config::load_registry(config);
    Manifest manifest("evaluate");
    const fs::path out_dir(config.output_dir);

    // Expand runs; an empty list means one implicit run from the defaults.
    std::vector<config::RunSpec> runs = config.runs;
    if (runs.empty()) runs.emplace_back();

    std::vector<evaluation::ReportSummary> summaries;
    std::size_t failed_total = 0;
    std::size_t instances_total = 0;

    for (const auto& run : runs) {
        const std::string task_id = run.task.value_or(config.task);
        const auto styles = run.styles.empty() ? config.styles : run.styles;
        if (styles.empty()) throw ConfigError("\"styles\" is required for evaluate");
        const WordMode mode = run.word_mode.value_or(config.word_mode);
        const std::optional<int> n_words = run.n_words.value_or(config.n_words);
        const std::string train_tag = run.train_tag.value_or(config.train_tag);

        const auto loaded = load_instances(config, task_id, run.corpus_path.value_or(config.corpus_path),
                                           run.corpus_format.value_or(config.corpus_format));
        require_templates(registry, loaded.task, styles, mode, false);
        auto backend_ptr = config::make_backend(run.backend.value_or(config.backend));

        evaluation::EvalOptions options;
        options.n_required = n_words;
        options.concurrency = config.concurrency;
        options.train_tag = train_tag;

        for (Style style : styles) {
            const auto result = evaluation::evaluate_style(*backend_ptr, loaded.task,
                                                           loaded.instances, style, mode, registry,
                                                           options);
            failed_total += result.report.failed;
            instances_total += result.report.total;

            const std::string stem = sanitize(train_tag) + "__" + sanitize(task_id) + "__" +
                                     to_string(style) + "__" + sanitize(to_string(mode));
            const fs::path report_path = out_dir / ("report__" + stem + ".json");
            write_text_atomic(report_path, evaluation::report_to_json(result.report).dump(2) + "\n");
            manifest.add_output(report_path);

            std::vector<std::string> trace_lines;
            trace_lines.reserve(result.traces.size());
            for (const auto& trace : result.traces) {
                trace_lines.push_back(evaluation::trace_to_json(trace).dump());
            }
            const fs::path trace_path = out_dir / ("trace__" + stem + ".jsonl");
            write_lines_atomic(trace_path, trace_lines);
            manifest.add_output(trace_path);

            summaries.push_back(evaluation::summarize(result.report));
            std::cout << "evaluate [" << train_tag << "] " << task_id << "/" << to_string(style)
                      << "/" << to_string(mode) << ": score "
                      << format_score(result.report.score, result.report.retained) << ", retained "
                      << result.report.retained << "/" << result.report.total << "\n";
        }
    }

    if (config.matrix.enabled) {
        for (const auto& path : config.matrix.report_paths) {
            std::ifstream in(path);
            if (!in) throw ConfigError("cannot open report json: " + path);
            nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
            if (j.is_discarded()) throw ConfigError("report json is invalid: " + path);
            summaries.push_back(evaluation::summary_from_json(j));
        }
        const auto axis = config.matrix.axis == "task" ? evaluation::MatrixAxis::task
                                                       : evaluation::MatrixAxis::style;
        std::vector<evaluation::MatrixCell> cells;
        try {
            cells = evaluation::cross_matrix(summaries, config.matrix.baseline_tag, axis);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
        const fs::path matrix_path = out_dir / "matrix.csv";
        write_text_atomic(matrix_path, evaluation::matrix_to_csv(cells, axis));
        manifest.add_output(matrix_path);
        std::cout << "matrix: " << cells.size() << " cells -> " << matrix_path.string() << "\n";
    }

    manifest.totals["instances"] = instances_total;
    manifest.totals["failed"] = failed_total;
    manifest.write(config);
    return exit_code_for(failed_total, instances_total);
}

int cmd_analyze(const RunConfig& config) {
    if (config.trace_paths.empty()) {
        throw ConfigError("\"trace_paths\" is required for analyze");
    }
    Manifest manifest("analyze");

    std::vector<textops::AnalyzedExplanation> explanations;
    for (const auto& path : config.trace_paths) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open trace file: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                throw ConfigError("trace " + path + " holds an invalid json line");
            }
            if (j.value("failed", false)) continue;
            if (!j.value("retained", false) || !j.value("faithful", false)) continue;
            const auto style = style_from_string(j.value("style", ""));
            if (!style) continue;
            textops::AnalyzedExplanation expl;
            expl.style = *style;
            expl.original = textops::WordSequence::from_text(j.value("input", ""));
            const auto& parsed = j.at("parsed");
            if (parsed.is_array()) {
                for (const auto& w : parsed) expl.words.push_back(w.get<std::string>());
            } else if (parsed.is_string()) {
                expl.text = parsed.get<std::string>();
            } else {
                continue;
            }
            explanations.push_back(std::move(expl));
        }
    }

    const auto ranked = textops::top_frequent_words(explanations, config.top_k);
    std::string csv = "lemma,count\n";
    for (const auto& entry : ranked) {
        csv += entry.lemma + "," + std::to_string(entry.count) + "\n";
    }
    const fs::path out_path = fs::path(config.output_dir) / "frequent_words.csv";
    write_text_atomic(out_path, csv);
    manifest.add_output(out_path);

    if (ranked.empty()) {
        std::cout << "no faithful explanations in the given traces\n";
    } else {
        std::cout << "top " << ranked.size() << " frequent words over " << explanations.size()
                  << " faithful explanations:\n";
        for (const auto& entry : ranked) {
            std::cout << "  " << entry.lemma << "  " << entry.count << "\n";
        }
    }
    manifest.totals["faithful_explanations"] = explanations.size();
    manifest.write(config);
    return kOk;
}

int run_command(const std::string& command, const std::string& config_path) {
    try {
        const RunConfig config = config::load_config(config_path);
        if (command == "build-dataset") return cmd_build_dataset(config);
        if (command == "validate-dataset") return cmd_validate_dataset(config);
        if (command == "evaluate") return cmd_evaluate(config);
        if (command == "analyze") return cmd_analyze(config);
        std::cerr << "unknown command: " << command << "\n";
        return kConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBackendFailure;
    }
}

}  // namespace selfexpl::commands
