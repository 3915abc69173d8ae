#include "selfexpl/textops.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace selfexpl::textops {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += words[i];
    }
    return out;
}

WordSequence WordSequence::from_text(const std::string& text, std::string provenance) {
    return WordSequence{tokenize(text), std::move(provenance)};
}

WordSequence redact(const WordSequence& x, const std::vector<std::size_t>& positions) {
    WordSequence out = x;
    for (std::size_t pos : positions) {
        if (pos >= out.words.size()) {
            throw std::out_of_range("redact: position " + std::to_string(pos) +
                                    " out of bounds for sequence of length " +
                                    std::to_string(out.words.size()));
        }
        out.words[pos] = kRedactedToken;
    }
    return out;
}

EditScript word_edit_distance(const WordSequence& a, const WordSequence& b) {
    const auto& src = a.words;
    const auto& dst = b.words;
    const std::size_t m = src.size();
    const std::size_t n = dst.size();

    std::vector<std::vector<std::size_t>> dp(m + 1, std::vector<std::size_t>(n + 1, 0));
    for (std::size_t i = 0; i <= m; ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= n; ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            const std::size_t sub = dp[i - 1][j - 1] + (src[i - 1] == dst[j - 1] ? 0 : 1);
            const std::size_t del = dp[i - 1][j] + 1;
            const std::size_t ins = dp[i][j - 1] + 1;
            dp[i][j] = std::min({sub, del, ins});
        }
    }

    // Backtrace from (m, n), preferring match/substitute, then delete, then
    // insert. Steps are recorded in reverse and replayed forward with
    // positions in the evolving sequence.
    enum class Step { match, substitute, erase, insert };
    std::vector<std::pair<Step, std::string>> reversed;
    std::size_t i = m, j = n;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + (src[i - 1] == dst[j - 1] ? 0 : 1)) {
            if (src[i - 1] != dst[j - 1]) {
                reversed.emplace_back(Step::substitute, dst[j - 1]);
            } else {
                reversed.emplace_back(Step::match, std::string());
            }
            --i;
            --j;
        } else if (i > 0 && dp[i][j] == dp[i - 1][j] + 1) {
            reversed.emplace_back(Step::erase, std::string());
            --i;
        } else {
            reversed.emplace_back(Step::insert, dst[j - 1]);
            --j;
        }
    }

    EditScript script;
    script.distance = dp[m][n];
    std::size_t cursor = 0;  // position in the evolving sequence
    for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
        switch (it->first) {
            case Step::match:
                ++cursor;
                break;
            case Step::substitute:
                script.operations.push_back(EditOp{EditOpKind::substitute, cursor, it->second});
                ++cursor;
                break;
            case Step::erase:
                script.operations.push_back(EditOp{EditOpKind::erase, cursor, std::string()});
                break;
            case Step::insert:
                script.operations.push_back(EditOp{EditOpKind::insert, cursor, it->second});
                ++cursor;
                break;
        }
    }
    return script;
}

WordSequence apply_edit_script(const WordSequence& source, const EditScript& script) {
    WordSequence out = source;
    for (const auto& op : script.operations) {
        switch (op.kind) {
            case EditOpKind::insert:
                if (op.position > out.words.size()) {
                    throw std::out_of_range("apply_edit_script: insert position out of bounds");
                }
                out.words.insert(out.words.begin() + static_cast<std::ptrdiff_t>(op.position),
                                 op.word);
                break;
            case EditOpKind::erase:
                if (op.position >= out.words.size()) {
                    throw std::out_of_range("apply_edit_script: erase position out of bounds");
                }
                out.words.erase(out.words.begin() + static_cast<std::ptrdiff_t>(op.position));
                break;
            case EditOpKind::substitute:
                if (op.position >= out.words.size()) {
                    throw std::out_of_range("apply_edit_script: substitute position out of bounds");
                }
                out.words[op.position] = op.word;
                break;
        }
    }
    return out;
}

std::string strip_edge_punct(const std::string& word) {
    std::size_t begin = 0;
    std::size_t end = word.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(word[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(word[end - 1]))) --end;
    return word.substr(begin, end - begin);
}

std::string normalize_word(const std::string& word) {
    std::string out = strip_edge_punct(word);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::size_t> find_word_positions(const WordSequence& x, const std::string& target) {
    const std::string needle = normalize_word(target);
    std::vector<std::size_t> positions;
    if (needle.empty()) return positions;
    for (std::size_t i = 0; i < x.words.size(); ++i) {
        if (normalize_word(x.words[i]) == needle) {
            positions.push_back(i);
        }
    }
    return positions;
}

namespace {

bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool has_vowel(const std::string& w) {
    return std::any_of(w.begin(), w.end(), [](char c) { return is_vowel(c) || c == 'y'; });
}

bool ends_with(const std::string& w, const std::string& suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// bb dd ff gg mm nn pp rr tt; ll/ss/zz stay (fall, miss, buzz).
bool ends_doubled(const std::string& w) {
    if (w.size() < 2) return false;
    const char c = w[w.size() - 1];
    if (c != w[w.size() - 2]) return false;
    return c == 'b' || c == 'd' || c == 'f' || c == 'g' || c == 'm' || c == 'n' || c == 'p' ||
           c == 'r' || c == 't';
}

// consonant-vowel-consonant ending (final letter not w/x/y) wants its e back:
// wak -> wake, hop -> hope.
bool wants_final_e(const std::string& w) {
    if (w.size() < 3) return false;
    const char c2 = w[w.size() - 1];
    const char c1 = w[w.size() - 2];
    const char c0 = w[w.size() - 3];
    if (is_vowel(c2) || c2 == 'w' || c2 == 'x' || c2 == 'y') return false;
    if (!is_vowel(c1)) return false;
    if (is_vowel(c0)) return false;
    return true;
}

// Shared tail handling after stripping -ing/-ed/-er/-est.
std::string repair_stem(std::string stem) {
    if (!has_vowel(stem)) return stem;  // caller restores the original
    if (ends_doubled(stem)) {
        stem.pop_back();
        return stem;
    }
    if (ends_with(stem, "i")) {
        stem.back() = 'y';  // studi -> study
        return stem;
    }
    if (wants_final_e(stem)) {
        stem.push_back('e');
    }
    return stem;
}

std::string strip_plural(const std::string& w) {
    if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
    if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    if (ends_with(w, "es") && w.size() > 3) {
        const std::string stem = w.substr(0, w.size() - 2);
        if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") ||
            ends_with(stem, "ch") || ends_with(stem, "sh")) {
            return stem;
        }
        return w.substr(0, w.size() - 1);  // makes -> make
    }
    if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is") &&
        w.size() > 3) {
        return w.substr(0, w.size() - 1);
    }
    return w;
}

std::string strip_suffixes(const std::string& w) {
    if (ends_with(w, "ing") && w.size() >= 6) {
        std::string stem = repair_stem(w.substr(0, w.size() - 3));
        if (has_vowel(stem)) return stem;
    }
    if (ends_with(w, "eed") && w.size() >= 5) {
        return w.substr(0, w.size() - 1);  // agreed -> agree
    }
    if (ends_with(w, "ied") && w.size() >= 5) {
        return w.substr(0, w.size() - 3) + "y";  // studied -> study
    }
    if (ends_with(w, "ed") && w.size() >= 5) {
        std::string stem = repair_stem(w.substr(0, w.size() - 2));
        if (has_vowel(stem)) return stem;
    }
    if (ends_with(w, "est") && w.size() >= 6) {
        std::string stem = repair_stem(w.substr(0, w.size() - 3));
        if (has_vowel(stem)) return stem;
    }
    if (ends_with(w, "er") && w.size() >= 6) {
        std::string stem = repair_stem(w.substr(0, w.size() - 2));
        if (has_vowel(stem)) return stem;
    }
    return strip_plural(w);
}

}  // namespace

std::string lemmatize(const std::string& word) {
    const std::string base = normalize_word(word);
    if (base.empty()) return base;
    return strip_suffixes(base);
}

std::vector<std::string> contributed_lemmas(const AnalyzedExplanation& expl) {
    std::vector<std::string> lemmas;
    switch (expl.style) {
        case Style::attribution:
            for (const auto& w : expl.words) {
                const std::string lemma = lemmatize(w);
                if (!lemma.empty()) lemmas.push_back(lemma);
            }
            break;
        case Style::redaction: {
            const auto redacted = tokenize(expl.text);
            if (redacted.size() != expl.original.words.size()) break;  // not aligned, nothing to count
            for (std::size_t i = 0; i < redacted.size(); ++i) {
                if (redacted[i] == kRedactedToken) {
                    const std::string lemma = lemmatize(expl.original.words[i]);
                    if (!lemma.empty()) lemmas.push_back(lemma);
                }
            }
            break;
        }
        case Style::counterfactual: {
            const auto edited = WordSequence::from_text(expl.text);
            const auto script = word_edit_distance(expl.original, edited);
            for (const auto& op : script.operations) {
                if (op.kind == EditOpKind::erase) {
                    lemmas.push_back(kDeletionSentinel);
                } else {
                    const std::string lemma = lemmatize(op.word);
                    if (!lemma.empty()) lemmas.push_back(lemma);
                }
            }
            break;
        }
        default:
            break;
    }
    return lemmas;
}

std::vector<CountedWord> top_frequent_words(const std::vector<AnalyzedExplanation>& explanations,
                                            std::size_t k) {
    std::map<std::string, std::size_t> counts;
    for (const auto& expl : explanations) {
        for (const auto& lemma : contributed_lemmas(expl)) {
            ++counts[lemma];
        }
    }
    std::vector<CountedWord> ranked;
    ranked.reserve(counts.size());
    for (const auto& [lemma, count] : counts) {
        ranked.push_back(CountedWord{lemma, count});
    }
    std::sort(ranked.begin(), ranked.end(), [](const CountedWord& a, const CountedWord& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.lemma < b.lemma;
    });
    if (ranked.size() > k) ranked.resize(k);
    return ranked;
}

}  // namespace selfexpl::textops
