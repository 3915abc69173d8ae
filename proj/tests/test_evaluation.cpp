#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

#include "selfexpl/evaluation.hpp"
#include "selfexpl/lexicon_backend.hpp"
#include "selfexpl/textops.hpp"
#include "support/fake_backend.hpp"
#include "support/trigger_corpus.hpp"

using namespace selfexpl;
using evaluation::parse_explanation;
using testsupport::FakeBackend;

namespace {

const corpus::TaskSpec& sentiment() {
    static const auto task = *corpus::find_builtin_task("sentiment140");
    return task;
}

const prompts::TemplateRegistry& registry() {
    static const auto r = prompts::TemplateRegistry::builtin();
    return r;
}

corpus::LabeledInstance wake_instance() {
    return {"1", "I hate waking up early.", std::nullopt, "Negative"};
}

evaluation::ConditionCheck check(const evaluation::SelfExplanation& expl,
                                 const corpus::LabeledInstance& instance, std::optional<int> n) {
    return evaluation::check_conditions(expl, instance, n, sentiment());
}

}  // namespace

TEST_CASE("parse one-word attribution answers") {
    const auto parsed = parse_explanation("Answer: hate", Style::attribution, WordMode::one_word);
    REQUIRE(parsed.parse_ok);
    CHECK(parsed.words == std::vector<std::string>{"hate"});

    const auto last_marker = parse_explanation("Answer: no. Final Answer: hate",
                                               Style::attribution, WordMode::one_word);
    CHECK(last_marker.words == std::vector<std::string>{"hate"});

    const auto quoted = parse_explanation("Answer: \"hate\"", Style::attribution,
                                          WordMode::one_word);
    CHECK(quoted.words == std::vector<std::string>{"hate"});

    const auto two_words = parse_explanation("Answer: hate early", Style::attribution,
                                             WordMode::one_word);
    REQUIRE(two_words.parse_ok);
    CHECK(two_words.words.size() == 2);  // excluded later by the N condition

    CHECK_FALSE(parse_explanation("I think it is hate", Style::attribution, WordMode::one_word)
                    .parse_ok);
    CHECK_FALSE(parse_explanation("Answer:   ", Style::attribution, WordMode::one_word).parse_ok);
}

TEST_CASE("parse multi-word attribution JSON") {
    const auto parsed = parse_explanation("{\"words\": [\"hate\",\"early\"]}", Style::attribution,
                                          WordMode::multi_word);
    REQUIRE(parsed.parse_ok);
    CHECK(parsed.words == std::vector<std::string>{"hate", "early"});

    const auto wrapped = parse_explanation("Sure! {\"words\": [\"hate\"]} Hope that helps.",
                                           Style::attribution, WordMode::multi_word);
    REQUIRE(wrapped.parse_ok);
    CHECK(wrapped.words == std::vector<std::string>{"hate"});

    CHECK_FALSE(parse_explanation("Answer: hate", Style::attribution, WordMode::multi_word)
                    .parse_ok);
    CHECK_FALSE(parse_explanation("{\"words\": \"hate\"}", Style::attribution, WordMode::multi_word)
                    .parse_ok);
    CHECK_FALSE(
        parse_explanation("{\"words\": [1, 2]}", Style::attribution, WordMode::multi_word).parse_ok);
}

TEST_CASE("parse redaction and counterfactual answers in both formats") {
    const auto marker = parse_explanation("Answer: I [REDACTED] waking up early.", Style::redaction,
                                          WordMode::one_word);
    REQUIRE(marker.parse_ok);
    CHECK(marker.text == "I [REDACTED] waking up early.");

    const auto json_form = parse_explanation("{\"redacted_text\": \"I [REDACTED] waking up.\"}",
                                             Style::redaction, WordMode::multi_word);
    REQUIRE(json_form.parse_ok);
    CHECK(json_form.text == "I [REDACTED] waking up.");

    const auto edited = parse_explanation("{\"edited_text\": \"my room walls are exciting\"}",
                                          Style::counterfactual, WordMode::multi_word);
    REQUIRE(edited.parse_ok);
    CHECK(edited.text == "my room walls are exciting");

    CHECK_FALSE(
        parse_explanation("no structure here", Style::counterfactual, WordMode::one_word).parse_ok);
}

TEST_CASE("condition (i): attribution words must come from the input") {
    auto expl = parse_explanation("Answer: hate", Style::attribution, WordMode::one_word);
    const auto retained = check(expl, wake_instance(), 1);
    CHECK(retained.style_ok);
    CHECK(retained.retained);
    CHECK(retained.n_observed == 1);

    auto foreign = parse_explanation("Answer: boring", Style::attribution, WordMode::one_word);
    const auto rejected = check(foreign, wake_instance(), 1);
    CHECK_FALSE(rejected.style_ok);
    CHECK(rejected.reason.find("boring") != std::string::npos);

    // punctuation and case do not block the match
    auto cased = parse_explanation("Answer: Early", Style::attribution, WordMode::one_word);
    CHECK(check(cased, wake_instance(), 1).retained);
}

TEST_CASE("condition (ii): redaction must keep the remaining input intact") {
    auto good = parse_explanation("Answer: I [REDACTED] waking up early.", Style::redaction,
                                  WordMode::one_word);
    const auto retained = check(good, wake_instance(), 1);
    CHECK(retained.retained);
    CHECK(retained.n_observed == 1);

    auto altered = parse_explanation("Answer: I [REDACTED] waking up LATE.", Style::redaction,
                                     WordMode::one_word);
    const auto rejected = check(altered, wake_instance(), 1);
    CHECK_FALSE(rejected.style_ok);

    auto shorter = parse_explanation("Answer: I [REDACTED] waking up", Style::redaction,
                                     WordMode::one_word);
    CHECK_FALSE(check(shorter, wake_instance(), 1).style_ok);

    auto none = parse_explanation("Answer: I hate waking up early.", Style::redaction,
                                  WordMode::one_word);
    CHECK_FALSE(check(none, wake_instance(), 1).style_ok);

    auto two = parse_explanation("Answer: I [REDACTED] [REDACTED] up early.", Style::redaction,
                                 WordMode::one_word);
    const auto n_mismatch = check(two, wake_instance(), 1);
    CHECK(n_mismatch.style_ok);
    CHECK(n_mismatch.n_observed == 2);
    CHECK_FALSE(n_mismatch.retained);
    CHECK(check(two, wake_instance(), 2).retained);
    CHECK(check(two, wake_instance(), std::nullopt).retained);  // unconstrained
}

TEST_CASE("condition (iii): counterfactuals avoid [REDACTED] and label names") {
    const corpus::LabeledInstance boring{"2", "my room walls are boring", std::nullopt, "Negative"};

    auto good = parse_explanation("Answer: my room walls are exciting", Style::counterfactual,
                                  WordMode::one_word);
    const auto retained = check(good, boring, 1);
    CHECK(retained.retained);
    CHECK(retained.n_observed == 1);

    auto with_token = parse_explanation("Answer: my room walls are [REDACTED]",
                                        Style::counterfactual, WordMode::one_word);
    CHECK_FALSE(check(with_token, boring, 1).style_ok);

    auto label_leak = parse_explanation("Answer: my room walls are positive",
                                        Style::counterfactual, WordMode::one_word);
    CHECK_FALSE(check(label_leak, boring, 1).style_ok);

    // substring inside a larger word does not trigger the label check
    auto substring = parse_explanation("Answer: my room walls are positively",
                                       Style::counterfactual, WordMode::one_word);
    CHECK(check(substring, boring, 1).style_ok);

    auto unchanged = parse_explanation("Answer: my room walls are boring", Style::counterfactual,
                                       WordMode::one_word);
    CHECK_FALSE(check(unchanged, boring, 1).style_ok);

    auto two_edits = parse_explanation("Answer: our room walls are exciting",
                                       Style::counterfactual, WordMode::one_word);
    const auto n2 = check(two_edits, boring, 1);
    CHECK(n2.style_ok);
    CHECK(n2.n_observed == 2);
    CHECK_FALSE(n2.retained);
}

TEST_CASE("derive_probe redacts every occurrence of every listed word") {
    auto expl = parse_explanation("Answer: hate", Style::attribution, WordMode::one_word);
    CHECK(evaluation::derive_probe(expl, wake_instance()) == "I [REDACTED] waking up early.");

    const corpus::LabeledInstance repeated{"3", "I hate hate mail", std::nullopt, "Negative"};
    CHECK(evaluation::derive_probe(expl, repeated) == "I [REDACTED] [REDACTED] mail");

    auto redaction = parse_explanation("Answer: I [REDACTED] waking up early.", Style::redaction,
                                       WordMode::one_word);
    CHECK(evaluation::derive_probe(redaction, wake_instance()) == "I [REDACTED] waking up early.");

    auto foreign = parse_explanation("Answer: boring", Style::attribution, WordMode::one_word);
    CHECK_THROWS_AS(evaluation::derive_probe(foreign, wake_instance()), std::logic_error);
}

TEST_CASE("judge classifies the probe in a fresh session") {
    const auto corpus = testsupport::make_trigger_corpus(4, 3);
    auto model = corpus.make_model();
    const auto& instance = corpus.instances[0];

    const auto flipped = evaluation::judge(model, sentiment(), instance,
                                           evaluation::derive_probe(
                                               parse_explanation("Answer: " + corpus.triggers[0],
                                                                 Style::attribution,
                                                                 WordMode::one_word),
                                               instance),
                                           instance.gold_label, registry());
    REQUIRE(flipped.ok);
    CHECK(flipped.faithful);
    CHECK(flipped.probe_prediction != instance.gold_label);

    const auto same = evaluation::judge(model, sentiment(), instance, instance.input,
                                        instance.gold_label, registry());
    REQUIRE(same.ok);
    CHECK_FALSE(same.faithful);

    FakeBackend broken;
    broken.on_classify = [](const ChatTranscript&, const std::vector<std::string>&) {
        backend::ClassifyResult failed;
        failed.error = "judge transport down";
        return failed;
    };
    broken.on_generate = [](const ChatTranscript&) { return backend::GenerateResult{}; };
    const auto failed =
        evaluation::judge(broken, sentiment(), instance, "probe text", "Negative", registry());
    CHECK_FALSE(failed.ok);
}

TEST_CASE("evaluate_style scores the faithful mock at 1.0 with clean accounting") {
    const auto corpus = testsupport::make_trigger_corpus(60, 9);
    auto model = corpus.make_model();
    evaluation::EvalOptions options;
    options.n_required = 1;
    options.concurrency = 4;

    for (Style style : {Style::attribution, Style::redaction, Style::counterfactual}) {
        const auto run = evaluation::evaluate_style(model, sentiment(), corpus.instances, style,
                                                    WordMode::one_word, registry(), options);
        CHECK(run.report.total == 60);
        CHECK(run.report.retained == 60);
        CHECK(run.report.faithful == 60);
        REQUIRE(run.report.score.has_value());
        CHECK(*run.report.score == doctest::Approx(1.0));
        CHECK(run.report.total == run.report.retained + run.report.excluded_by_style +
                                      run.report.excluded_by_n + run.report.failed);
        CHECK_FALSE(run.report.low_retained);

        if (style == Style::counterfactual) {
            // retained counterfactual probes sit at exactly n_observed edits
            for (const auto& trace : run.traces) {
                REQUIRE(trace.probe.has_value());
                const auto distance =
                    textops::word_edit_distance(textops::WordSequence::from_text(trace.input),
                                                textops::WordSequence::from_text(*trace.probe))
                        .distance;
                CHECK(distance == trace.n_observed);
                CHECK(distance >= 1);
            }
        }
    }
}

TEST_CASE("refusing backends leave nothing retained and the score undefined") {
    const auto corpus = testsupport::make_trigger_corpus(10, 9);
    auto model = corpus.make_model({backend::ExplanationPolicy::refuse});
    evaluation::EvalOptions options;
    options.concurrency = 2;
    const auto run = evaluation::evaluate_style(model, sentiment(), corpus.instances,
                                                Style::attribution, WordMode::one_word, registry(),
                                                options);
    CHECK(run.report.retained == 0);
    CHECK(run.report.excluded_by_style == 10);
    CHECK_FALSE(run.report.score.has_value());
    CHECK(run.report.low_retained);
    const auto json = evaluation::report_to_json(run.report);
    CHECK(json.at("score").is_null());
}

TEST_CASE("evaluate_style requires a prompt set for the cell") {
    const auto corpus = testsupport::make_trigger_corpus(2, 1);
    auto model = corpus.make_model();
    const auto snli = *corpus::find_builtin_task("snli");
    CHECK_THROWS_AS(evaluation::evaluate_style(model, snli, corpus.instances, Style::attribution,
                                               WordMode::multi_word, registry(), {}),
                    std::runtime_error);
}

TEST_CASE("score is invariant under instance permutation and runs are reproducible") {
    const auto corpus = testsupport::make_trigger_corpus(30, 21);
    auto model = corpus.make_model();
    evaluation::EvalOptions options;
    options.concurrency = 4;

    const auto run = evaluation::evaluate_style(model, sentiment(), corpus.instances,
                                                Style::attribution, WordMode::one_word, registry(),
                                                options);
    auto shuffled = corpus.instances;
    std::mt19937_64 rng(5);
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng() % i]);
    const auto permuted = evaluation::evaluate_style(model, sentiment(), shuffled,
                                                     Style::attribution, WordMode::one_word,
                                                     registry(), options);
    CHECK(run.report.score == permuted.report.score);
    CHECK(run.report.retained == permuted.report.retained);

    // byte-identical reports and traces on repeated runs (traces sort by id)
    const auto again = evaluation::evaluate_style(model, sentiment(), shuffled, Style::attribution,
                                                  WordMode::one_word, registry(), options);
    CHECK(evaluation::report_to_json(permuted.report).dump() ==
          evaluation::report_to_json(again.report).dump());
    REQUIRE(permuted.traces.size() == again.traces.size());
    for (std::size_t i = 0; i < permuted.traces.size(); ++i) {
        CHECK(evaluation::trace_to_json(permuted.traces[i]).dump() ==
              evaluation::trace_to_json(again.traces[i]).dump());
    }
}

TEST_CASE("attribution and redaction verdicts coincide per instance") {
    const auto corpus = testsupport::make_trigger_corpus(25, 13);
    auto model = corpus.make_model();
    evaluation::EvalOptions options;
    options.concurrency = 4;
    const auto attribution = evaluation::evaluate_style(model, sentiment(), corpus.instances,
                                                        Style::attribution, WordMode::one_word,
                                                        registry(), options);
    const auto redaction = evaluation::evaluate_style(model, sentiment(), corpus.instances,
                                                      Style::redaction, WordMode::one_word,
                                                      registry(), options);
    REQUIRE(attribution.traces.size() == redaction.traces.size());
    for (std::size_t i = 0; i < attribution.traces.size(); ++i) {
        REQUIRE(attribution.traces[i].id == redaction.traces[i].id);
        CHECK(attribution.traces[i].probe == redaction.traces[i].probe);
        CHECK(attribution.traces[i].faithful == redaction.traces[i].faithful);
    }
}

TEST_CASE("multi-word evaluation groups by observed word count") {
    // scripted backend: half the instances list one word, half list two
    const auto corpus = testsupport::make_trigger_corpus(12, 33);
    auto inner = corpus.make_model();
    FakeBackend fake;
    fake.on_classify = [&inner](const ChatTranscript& t, const std::vector<std::string>& labels) {
        return inner.classify(t, labels);
    };
    fake.on_generate = [&corpus](const ChatTranscript& t) {
        const std::string& classification = t.turns().front().text;
        backend::GenerateResult out;
        out.ok = true;
        for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
            if (classification.find("Text: " + corpus.instances[i].input + "\n") ==
                std::string::npos) {
                continue;
            }
            const auto words = textops::tokenize(corpus.instances[i].input);
            if (i % 2 == 0) {
                out.text = "{\"words\": [\"" + corpus.triggers[i] + "\"]}";
            } else {
                std::string other;
                for (const auto& w : words) {
                    if (w != corpus.triggers[i]) {
                        other = w;
                        break;
                    }
                }
                out.text = "{\"words\": [\"" + corpus.triggers[i] + "\", \"" + other + "\"]}";
            }
            return out;
        }
        out.text = "{\"words\": []}";
        return out;
    };

    evaluation::EvalOptions options;
    options.n_required = std::nullopt;  // multi-word runs drop the N condition
    options.concurrency = 3;
    const auto run = evaluation::evaluate_style(fake, sentiment(), corpus.instances,
                                                Style::attribution, WordMode::multi_word,
                                                registry(), options);
    CHECK(run.report.retained == 12);
    REQUIRE(run.report.per_n.size() == 2);
    CHECK(run.report.per_n[0].n == 1);
    CHECK(run.report.per_n[0].retained == 6);
    CHECK(run.report.per_n[0].low_retained);  // < 50 rule
    CHECK(run.report.per_n[1].n == 2);
    CHECK(run.report.per_n[1].retained == 6);
    // every one-word group member redacts the trigger -> faithful
    CHECK(run.report.per_n[0].faithful == 6);
}

TEST_CASE("two-input tasks thread the hypothesis through every session") {
    const auto snli = *corpus::find_builtin_task("snli");
    backend::LexiconModel model(
        {{"sleeping", {{"Yes", -1.0}, {"No", 2.0}, {"Maybe", 0.0}}},
         {"resting", {{"Yes", 2.0}, {"No", -1.0}, {"Maybe", 0.0}}}},
        {{"Maybe", 0.5}}, {"Yes", "No", "Maybe"});
    const std::vector<corpus::LabeledInstance> instances = {
        {"s1", "A fisherman sleeping on a boat.", std::string("A fisherman is awake."), "No"},
    };
    evaluation::EvalOptions options;
    options.n_required = 1;
    const auto run = evaluation::evaluate_style(model, snli, instances, Style::attribution,
                                                WordMode::one_word, registry(), options);
    REQUIRE(run.report.retained == 1);
    const auto& trace = run.traces[0];
    CHECK(trace.prediction == "No");
    CHECK(trace.parsed_words == std::vector<std::string>{"sleeping"});
    CHECK(trace.probe == "A fisherman [REDACTED] on a boat.");
    CHECK(trace.probe_prediction == "Maybe");  // bias wins once the trigger is gone
    CHECK(trace.faithful == true);
    CHECK(trace.second_input == "A fisherman is awake.");
}

TEST_CASE("cross_matrix computes gains against the baseline") {
    std::vector<evaluation::ReportSummary> summaries = {
        {"untrained", "sentiment140", Style::attribution, 0.140, 4618},
        {"trained", "sentiment140", Style::attribution, 0.255, 4964},
    };
    const auto cells =
        evaluation::cross_matrix(summaries, "untrained", evaluation::MatrixAxis::task);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].train_tag == "trained");
    CHECK(cells[0].cell == "sentiment140");
    REQUIRE(cells[0].value.has_value());
    CHECK(*cells[0].value == doctest::Approx(0.115).epsilon(1e-12));
    CHECK_FALSE(cells[0].low_retained);

    // tagged == baseline -> gain 0
    summaries[1].score = 0.140;
    const auto zero = evaluation::cross_matrix(summaries, "untrained", evaluation::MatrixAxis::task);
    CHECK(*zero[0].value == doctest::Approx(0.0));

    summaries.pop_back();
    summaries.push_back({"trained", "snli", Style::attribution, 0.3, 100});
    CHECK_THROWS_AS(evaluation::cross_matrix(summaries, "untrained", evaluation::MatrixAxis::task),
                    std::runtime_error);
}

TEST_CASE("cross_matrix 3x3 task grid carries retained counts") {
    std::vector<evaluation::ReportSummary> summaries;
    const std::vector<std::string> tasks = {"sentiment140", "snli", "agnews"};
    for (const auto& task : tasks) {
        summaries.push_back({"untrained", task, Style::attribution, 0.1, 1000});
    }
    for (const auto& tag : {"t-sent", "t-snli", "t-agnews"}) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            summaries.push_back({tag, tasks[i], Style::attribution, 0.2 + 0.01 * double(i),
                                 static_cast<std::size_t>(40 + 20 * i)});
        }
    }
    const auto cells =
        evaluation::cross_matrix(summaries, "untrained", evaluation::MatrixAxis::task);
    CHECK(cells.size() == 9);
    std::size_t flagged = 0;
    for (const auto& cell : cells) {
        if (cell.low_retained) ++flagged;
    }
    CHECK(flagged == 3);  // the retained=40 cells

    const auto csv = evaluation::matrix_to_csv(cells, evaluation::MatrixAxis::task);
    CHECK(csv.find("train_tag,eval_task,gain,retained,low_retained") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}

TEST_CASE("cross_matrix style axis reports raw scores including the baseline") {
    std::vector<evaluation::ReportSummary> summaries = {
        {"untrained", "sentiment140", Style::attribution, 0.12, 500},
        {"untrained", "sentiment140", Style::redaction, 0.10, 500},
        {"w-attribution", "sentiment140", Style::attribution, 0.30, 500},
        {"w-attribution", "sentiment140", Style::redaction, 0.20, 30},
    };
    const auto cells =
        evaluation::cross_matrix(summaries, "untrained", evaluation::MatrixAxis::style);
    CHECK(cells.size() == 4);
    for (const auto& cell : cells) {
        if (cell.train_tag == "w-attribution" && cell.cell == "redaction") {
            CHECK(cell.low_retained);
            CHECK(*cell.value == doctest::Approx(0.20));
        }
    }
}

TEST_CASE("report json round-trips into a summary") {
    evaluation::EvaluationReport report;
    report.task = "sentiment140";
    report.style = Style::counterfactual;
    report.word_mode = WordMode::one_word;
    report.n_required = 1;
    report.train_tag = "trained";
    report.total = 10;
    report.retained = 8;
    report.faithful = 4;
    report.score = 0.5;
    const auto summary = evaluation::summary_from_json(evaluation::report_to_json(report));
    CHECK(summary.train_tag == "trained");
    CHECK(summary.eval_task == "sentiment140");
    CHECK(summary.eval_style == Style::counterfactual);
    CHECK(summary.score == 0.5);
    CHECK(summary.retained == 8);
}
