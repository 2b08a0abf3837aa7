#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace steer {

enum class InstructionTemplate { pick, move_near, knock, place_upright };

std::string_view to_string(InstructionTemplate t);

struct ParsedInstruction {
    InstructionTemplate template_kind = InstructionTemplate::pick;
    std::string object_slot;
    std::optional<std::string> secondary_object_slot;  // move_near only

    friend bool operator==(const ParsedInstruction&, const ParsedInstruction&) = default;
};

class InstructionError : public std::runtime_error {
public:
    enum class Code { unknown_template, empty_slot };

    InstructionError(Code code, std::string input)
        : std::runtime_error(std::string(code == Code::unknown_template ? "unknown template" : "empty slot") +
                             ": \"" + input + "\""),
          code_(code), input_(std::move(input)) {}

    Code code() const { return code_; }
    const std::string& input() const { return input_; }

private:
    Code code_;
    std::string input_;
};

/// Matches one of the episode-level templates:
///   pick <object> | move <object1> near <object2> | knock <object> | place <object> upright
/// Keywords are matched case-insensitively on whitespace-delimited tokens;
/// slots are the verbatim (trimmed) spans between them. For move_near the
/// split is at the last " near " token.
ParsedInstruction parse_instruction(std::string_view text);

}  // namespace steer
