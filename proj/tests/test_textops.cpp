#include <doctest.h>

#include <random>
#include <stdexcept>

#include "selfexpl/textops.hpp"

using namespace selfexpl;
using textops::WordSequence;

namespace {

// Textbook recursive Levenshtein, independent of the DP implementation.
std::size_t brute_distance(const std::vector<std::string>& a, std::size_t i,
                           const std::vector<std::string>& b, std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    std::size_t best = brute_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, brute_distance(a, i + 1, b, j) + 1);
    best = std::min(best, brute_distance(a, i, b, j + 1) + 1);
    return best;
}

std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t max_len,
                                      const std::vector<std::string>& alphabet) {
    const std::size_t len = rng() % (max_len + 1);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < len; ++i) words.push_back(alphabet[rng() % alphabet.size()]);
    return words;
}

}  // namespace

TEST_CASE("tokenize splits on whitespace runs and trims") {
    CHECK(textops::tokenize("  I hate  waking up early.  ") ==
          std::vector<std::string>{"I", "hate", "waking", "up", "early."});
    CHECK(textops::tokenize("").empty());
    CHECK(textops::tokenize(" \t\n ").empty());
    CHECK(textops::tokenize("one") == std::vector<std::string>{"one"});
}

TEST_CASE("word sequence round-trips through its canonical text") {
    const auto x = WordSequence::from_text("a  b\tc");
    CHECK(x.text() == "a b c");
    CHECK(WordSequence::from_text(x.text()) == x);
}

TEST_CASE("redact replaces exactly the requested positions") {
    const auto x = WordSequence::from_text("I hate waking up early.");
    CHECK(textops::redact(x, {1}).text() == "I [REDACTED] waking up early.");
    CHECK(textops::redact(x, {}) == x);
    CHECK(textops::redact(WordSequence::from_text("a b c"), {0, 1, 2}).text() ==
          "[REDACTED] [REDACTED] [REDACTED]");
    CHECK_THROWS_AS(textops::redact(x, {5}), std::out_of_range);
}

TEST_CASE("redact is idempotent on already-redacted positions") {
    const auto x = WordSequence::from_text("a b c d");
    const auto once = textops::redact(x, {1, 3});
    CHECK(textops::redact(once, {1, 3}) == once);
}

TEST_CASE("word edit distance on single-substitution pairs") {
    const auto a = WordSequence::from_text("my room walls are boring");
    const auto b = WordSequence::from_text("my room walls are exciting");
    const auto script = textops::word_edit_distance(a, b);
    CHECK(script.distance == 1);
    REQUIRE(script.operations.size() == 1);
    CHECK(script.operations[0].kind == textops::EditOpKind::substitute);
    CHECK(textops::apply_edit_script(a, script) == b);

    CHECK(textops::word_edit_distance(a, a).distance == 0);
    CHECK(textops::word_edit_distance(WordSequence{}, b).distance == 5);
    CHECK(textops::word_edit_distance(a, WordSequence{}).distance == 5);
}

TEST_CASE("edit distance matches the recursive oracle on random small pairs") {
    const std::vector<std::string> alphabet = {"a", "b", "c"};
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 400; ++trial) {
        const WordSequence a{random_words(rng, 6, alphabet), ""};
        const WordSequence b{random_words(rng, 6, alphabet), ""};
        const auto script = textops::word_edit_distance(a, b);
        CHECK(script.distance == brute_distance(a.words, 0, b.words, 0));
        CHECK(textops::apply_edit_script(a, script) == b);
        CHECK(script.operations.size() == script.distance);
    }
}

TEST_CASE("edit distance is a metric on random triples") {
    const std::vector<std::string> alphabet = {"x", "y", "z", "w"};
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const WordSequence a{random_words(rng, 8, alphabet), ""};
        const WordSequence b{random_words(rng, 8, alphabet), ""};
        const WordSequence c{random_words(rng, 8, alphabet), ""};
        const auto ab = textops::word_edit_distance(a, b).distance;
        const auto ba = textops::word_edit_distance(b, a).distance;
        const auto bc = textops::word_edit_distance(b, c).distance;
        const auto ac = textops::word_edit_distance(a, c).distance;
        CHECK(ab == ba);
        CHECK((ab == 0) == (a == b));
        CHECK(ac <= ab + bc);
    }
}

TEST_CASE("find_word_positions strips punctuation and ignores case") {
    CHECK(textops::find_word_positions(WordSequence::from_text("I hate waking"), "hate") ==
          std::vector<std::size_t>{1});
    CHECK(textops::find_word_positions(WordSequence::from_text("I hate, hate it"), "hate") ==
          std::vector<std::size_t>{1, 2});
    CHECK(textops::find_word_positions(WordSequence::from_text("I hate waking"), "love").empty());
    CHECK(textops::find_word_positions(WordSequence::from_text("Early! early."), "EARLY") ==
          std::vector<std::size_t>{0, 1});
}

TEST_CASE("lemmatize handles the documented suffix rules") {
    CHECK(textops::lemmatize("Stocks") == "stock");
    CHECK(textops::lemmatize("hate") == "hate");
    CHECK(textops::lemmatize("can't") == "can't");
    CHECK(textops::lemmatize("don't") == "don't");
    CHECK(textops::lemmatize("waking") == "wake");
    CHECK(textops::lemmatize("walking") == "walk");
    CHECK(textops::lemmatize("running") == "run");
    CHECK(textops::lemmatize("falling") == "fall");
    CHECK(textops::lemmatize("hated") == "hate");
    CHECK(textops::lemmatize("stopped") == "stop");
    CHECK(textops::lemmatize("studied") == "study");
    CHECK(textops::lemmatize("agreed") == "agree");
    CHECK(textops::lemmatize("parties") == "party");
    CHECK(textops::lemmatize("boxes") == "box");
    CHECK(textops::lemmatize("classes") == "class");
    CHECK(textops::lemmatize("miss") == "miss");
    CHECK(textops::lemmatize("bigger") == "big");
    CHECK(textops::lemmatize("nicest") == "nice");
    CHECK(textops::lemmatize("Terrible,") == "terrible");
}

TEST_CASE("lemmatize is idempotent") {
    const std::vector<std::string> samples = {
        "Stocks", "waking",  "walking", "running", "falling", "hated",  "stopped", "studied",
        "agreed", "parties", "boxes",   "classes", "miss",    "bigger", "nicest",  "can't",
        "hate",   "love",    "good",    "sad",     "worse",   "Iraq",   "Google",  "happier"};
    for (const auto& word : samples) {
        const auto lemma = textops::lemmatize(word);
        CHECK(textops::lemmatize(lemma) == lemma);
    }
    std::mt19937_64 rng(11);
    const std::string letters = "abcdefghijklmnopqrstuvwxyz";
    for (int trial = 0; trial < 500; ++trial) {
        std::string word;
        const std::size_t len = 1 + rng() % 10;
        for (std::size_t i = 0; i < len; ++i) word.push_back(letters[rng() % letters.size()]);
        const auto lemma = textops::lemmatize(word);
        CHECK(textops::lemmatize(lemma) == lemma);
    }
}

TEST_CASE("contributed lemmas per style") {
    textops::AnalyzedExplanation attribution;
    attribution.style = Style::attribution;
    attribution.words = {"Stocks", "hate"};
    CHECK(textops::contributed_lemmas(attribution) ==
          std::vector<std::string>{"stock", "hate"});

    textops::AnalyzedExplanation redaction;
    redaction.style = Style::redaction;
    redaction.original = WordSequence::from_text("I hate waking up early.");
    redaction.text = "I [REDACTED] waking up early.";
    CHECK(textops::contributed_lemmas(redaction) == std::vector<std::string>{"hate"});

    textops::AnalyzedExplanation substitution;
    substitution.style = Style::counterfactual;
    substitution.original = WordSequence::from_text("my room walls are boring");
    substitution.text = "my room walls are exciting";
    CHECK(textops::contributed_lemmas(substitution) == std::vector<std::string>{"excite"});

    textops::AnalyzedExplanation deletion;
    deletion.style = Style::counterfactual;
    deletion.original = WordSequence::from_text("not a good day");
    deletion.text = "a good day";
    CHECK(textops::contributed_lemmas(deletion) ==
          std::vector<std::string>{textops::kDeletionSentinel});
}

TEST_CASE("top_frequent_words ranks by count then lemma") {
    std::vector<textops::AnalyzedExplanation> explanations;
    for (const char* word : {"hate", "hate", "bad"}) {
        textops::AnalyzedExplanation e;
        e.style = Style::attribution;
        e.words = {word};
        explanations.push_back(e);
    }
    const auto top2 = textops::top_frequent_words(explanations, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0] == textops::CountedWord{"hate", 2});
    CHECK(top2[1] == textops::CountedWord{"bad", 1});

    CHECK(textops::top_frequent_words({}, 5).empty());

    // tie: alphabetical
    textops::AnalyzedExplanation tie;
    tie.style = Style::attribution;
    tie.words = {"zeta", "alpha"};
    const auto tied = textops::top_frequent_words({tie}, 10);
    REQUIRE(tied.size() == 2);
    CHECK(tied[0].lemma == "alpha");
    CHECK(tied[1].lemma == "zeta");
}
