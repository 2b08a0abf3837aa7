#include "steer/instruction.hpp"

#include <cctype>

namespace steer {

std::string_view to_string(InstructionTemplate t) {
    switch (t) {
        case InstructionTemplate::pick:
            return "pick";
        case InstructionTemplate::move_near:
            return "move_near";
        case InstructionTemplate::knock:
            return "knock";
        case InstructionTemplate::place_upright:
            return "place_upright";
    }
    return "pick";
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

/// If `s` starts with the token `word` followed by whitespace (or ends right
/// after it), returns the remainder; otherwise nullopt.
std::optional<std::string_view> strip_leading_token(std::string_view s, std::string_view word) {
    if (s.size() < word.size() || !iequals(s.substr(0, word.size()), word)) {
        return std::nullopt;
    }
    const std::string_view rest = s.substr(word.size());
    if (!rest.empty() && !is_space(rest.front())) {
        return std::nullopt;
    }
    return rest;
}

std::optional<std::string_view> strip_trailing_token(std::string_view s, std::string_view word) {
    if (s.size() < word.size() || !iequals(s.substr(s.size() - word.size()), word)) {
        return std::nullopt;
    }
    const std::string_view rest = s.substr(0, s.size() - word.size());
    if (!rest.empty() && !is_space(rest.back())) {
        return std::nullopt;
    }
    return rest;
}

/// Position of the last whitespace-delimited "near" token strictly inside `s`.
std::optional<std::size_t> find_last_near(std::string_view s) {
    constexpr std::string_view word = "near";
    for (std::size_t i = s.size(); i-- > 1;) {
        if (i + word.size() >= s.size()) {
            continue;
        }
        if (is_space(s[i - 1]) && iequals(s.substr(i, word.size()), word) && is_space(s[i + word.size()])) {
            return i;
        }
    }
    return std::nullopt;
}

std::string slot(std::string_view span, std::string_view input) {
    const std::string_view t = trim(span);
    if (t.empty()) {
        throw InstructionError(InstructionError::Code::empty_slot, std::string(input));
    }
    return std::string(t);
}

}  // namespace

ParsedInstruction parse_instruction(std::string_view text) {
    const std::string_view s = trim(text);
    const auto unknown = [&] { return InstructionError(InstructionError::Code::unknown_template, std::string(text)); };

    if (auto rest = strip_leading_token(s, "pick")) {
        return {InstructionTemplate::pick, slot(*rest, text), std::nullopt};
    }
    if (auto rest = strip_leading_token(s, "knock")) {
        return {InstructionTemplate::knock, slot(*rest, text), std::nullopt};
    }
    if (auto rest = strip_leading_token(s, "move")) {
        const auto at = find_last_near(*rest);
        if (!at) {
            // "move X near" / "move near" with nothing on one side.
            if (strip_trailing_token(trim(*rest), "near") || strip_leading_token(trim(*rest), "near")) {
                throw InstructionError(InstructionError::Code::empty_slot, std::string(text));
            }
            throw unknown();
        }
        return {InstructionTemplate::move_near, slot(rest->substr(0, *at), text),
                slot(rest->substr(*at + 4), text)};
    }
    if (auto rest = strip_leading_token(s, "place")) {
        if (auto middle = strip_trailing_token(*rest, "upright")) {
            return {InstructionTemplate::place_upright, slot(*middle, text), std::nullopt};
        }
    }
    throw unknown();
}

}  // namespace steer
