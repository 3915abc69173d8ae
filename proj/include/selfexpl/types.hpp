#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace selfexpl {

// Explanation / prompt styles. classification and cf_fill exist only as
// prompt styles; self-explanations are one of the other three.
enum class Style { classification, attribution, redaction, counterfactual, cf_fill };

enum class WordMode { na, one_word, multi_word };

const char* to_string(Style s);
const char* to_string(WordMode m);
std::optional<Style> style_from_string(const std::string& s);
std::optional<WordMode> word_mode_from_string(const std::string& s);

enum class Speaker { user, assistant };
const char* to_string(Speaker s);

struct Turn {
    Speaker speaker = Speaker::user;
    std::string text;

    bool operator==(const Turn&) const = default;
};

// Chat dialogue. Speakers strictly alternate starting with user; append()
// throws std::invalid_argument on violation.
class ChatTranscript {
public:
    ChatTranscript() = default;
    explicit ChatTranscript(std::vector<Turn> turns);

    void append(Speaker speaker, std::string text);
    void append(const ChatTranscript& fragment);

    const std::vector<Turn>& turns() const { return turns_; }
    bool empty() const { return turns_.empty(); }
    std::size_t size() const { return turns_.size(); }
    const Turn& back() const { return turns_.back(); }
    bool ends_with_user() const;

    bool operator==(const ChatTranscript&) const = default;

private:
    std::vector<Turn> turns_;
};

// Deterministic 64-bit text hash (FNV-1a with a splitmix64 finalizer).
// Used wherever a pure, platform-stable pseudo-random draw is needed.
uint64_t hash64(const std::string& text, uint64_t salt = 0);

// hash64 mapped into [0, 1).
double hash_unit(const std::string& text, uint64_t salt = 0);

}  // namespace selfexpl
