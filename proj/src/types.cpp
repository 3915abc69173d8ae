#include "selfexpl/types.hpp"

#include <stdexcept>
#include <utility>

namespace selfexpl {

const char* to_string(Style s) {
    switch (s) {
        case Style::classification: return "classification";
        case Style::attribution: return "attribution";
        case Style::redaction: return "redaction";
        case Style::counterfactual: return "counterfactual";
        case Style::cf_fill: return "cf_fill";
    }
    return "?";
}

const char* to_string(WordMode m) {
    switch (m) {
        case WordMode::na: return "n/a";
        case WordMode::one_word: return "one_word";
        case WordMode::multi_word: return "multi_word";
    }
    return "?";
}

const char* to_string(Speaker s) {
    return s == Speaker::user ? "user" : "assistant";
}

std::optional<Style> style_from_string(const std::string& s) {
    if (s == "classification") return Style::classification;
    if (s == "attribution") return Style::attribution;
    if (s == "redaction") return Style::redaction;
    if (s == "counterfactual") return Style::counterfactual;
    if (s == "cf_fill") return Style::cf_fill;
    return std::nullopt;
}

std::optional<WordMode> word_mode_from_string(const std::string& s) {
    if (s == "n/a" || s.empty()) return WordMode::na;
    if (s == "one_word") return WordMode::one_word;
    if (s == "multi_word") return WordMode::multi_word;
    return std::nullopt;
}

ChatTranscript::ChatTranscript(std::vector<Turn> turns) {
    for (auto& t : turns) {
        append(t.speaker, std::move(t.text));
    }
}

void ChatTranscript::append(Speaker speaker, std::string text) {
    const Speaker expected = turns_.empty()                   ? Speaker::user
                             : turns_.back().speaker == Speaker::user ? Speaker::assistant
                                                                      : Speaker::user;
    if (speaker != expected) {
        throw std::invalid_argument(
            "transcript turns must alternate user/assistant starting with user");
    }
    turns_.push_back(Turn{speaker, std::move(text)});
}

void ChatTranscript::append(const ChatTranscript& fragment) {
    for (const auto& t : fragment.turns()) {
        append(t.speaker, t.text);
    }
}

bool ChatTranscript::ends_with_user() const {
    return !turns_.empty() && turns_.back().speaker == Speaker::user;
}

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t hash64(const std::string& text, uint64_t salt) {
    uint64_t h = 0xcbf29ce484222325ULL ^ salt;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

double hash_unit(const std::string& text, uint64_t salt) {
    // 53 bits of the hash give a uniform double in [0, 1).
    return static_cast<double>(hash64(text, salt) >> 11) * 0x1.0p-53;
}

}  // namespace selfexpl
