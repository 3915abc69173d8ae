#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "selfexpl/types.hpp"

namespace selfexpl::textops {

// The literal redaction token, everywhere, including brackets and case.
inline constexpr const char* kRedactedToken = "[REDACTED]";

// Sentinel lemma counted when a counterfactual edit removes a word outright.
inline constexpr const char* kDeletionSentinel = "DELETION*";

// The single tokenization rule shared by every module: trim, then split on
// whitespace runs. Punctuation stays attached to its word.
std::vector<std::string> tokenize(const std::string& text);

// Inverse of tokenize for canonical sequences: single-space join.
std::string join_words(const std::vector<std::string>& words);

struct WordSequence {
    std::vector<std::string> words;
    std::string provenance;  // originating instance id + field, informational

    static WordSequence from_text(const std::string& text, std::string provenance = "");
    std::string text() const { return join_words(words); }
    std::size_t size() const { return words.size(); }
    bool operator==(const WordSequence& other) const { return words == other.words; }
};

// Replaces the words at the given positions with kRedactedToken. Positions
// out of bounds throw std::out_of_range.
WordSequence redact(const WordSequence& x, const std::vector<std::size_t>& positions);

enum class EditOpKind { insert, erase, substitute };

struct EditOp {
    EditOpKind kind = EditOpKind::substitute;
    // Index into the evolving sequence at the time the op is applied.
    std::size_t position = 0;
    std::string word;  // payload for insert/substitute

    bool operator==(const EditOp&) const = default;
};

struct EditScript {
    std::vector<EditOp> operations;
    std::size_t distance = 0;  // minimal word-level Levenshtein distance
};

// Minimal unit-cost word-level Levenshtein distance plus a script realizing
// it. apply_edit_script(a, script) == b always holds.
EditScript word_edit_distance(const WordSequence& a, const WordSequence& b);
WordSequence apply_edit_script(const WordSequence& source, const EditScript& script);

// Word matching used to map model-listed words back onto the input:
// case-insensitive after stripping leading/trailing punctuation.
std::string strip_edge_punct(const std::string& word);
std::string normalize_word(const std::string& word);
std::vector<std::size_t> find_word_positions(const WordSequence& x, const std::string& target);

// Rule-based English lemma: lowercase, edge punctuation stripped, suffix
// rules for -s/-es, -ing, -ed, -er/-est with undoubling and e-restoration.
// Deterministic and idempotent; feeds frequency reports only.
std::string lemmatize(const std::string& word);

// One retained+faithful explanation reduced to the inputs the frequency
// analysis counts.
struct AnalyzedExplanation {
    Style style = Style::attribution;
    std::vector<std::string> words;  // attribution: the listed words
    std::string text;                // redaction / counterfactual: explanation text
    WordSequence original;           // the original input
};

// Lemmas contributed by one explanation: listed words (attribution), the
// words hidden behind [REDACTED] slots (redaction), or the words added or
// substituted by the edit script (counterfactual; pure deletions count as
// kDeletionSentinel).
std::vector<std::string> contributed_lemmas(const AnalyzedExplanation& expl);

struct CountedWord {
    std::string lemma;
    std::size_t count = 0;

    bool operator==(const CountedWord&) const = default;
};

// Descending by count, ties by lemma; at most k entries.
std::vector<CountedWord> top_frequent_words(const std::vector<AnalyzedExplanation>& explanations,
                                            std::size_t k);

}  // namespace selfexpl::textops
