#include <doctest.h>

#include <random>

#include "steer/instruction.hpp"

using namespace steer;

TEST_CASE("template examples") {
    CHECK(parse_instruction("pick coke can") == ParsedInstruction{InstructionTemplate::pick, "coke can", std::nullopt});
    CHECK(parse_instruction("move apple near sponge") ==
          ParsedInstruction{InstructionTemplate::move_near, "apple", "sponge"});
    CHECK(parse_instruction("place pink cup upright") ==
          ParsedInstruction{InstructionTemplate::place_upright, "pink cup", std::nullopt});
    CHECK(parse_instruction("knock water bottle") ==
          ParsedInstruction{InstructionTemplate::knock, "water bottle", std::nullopt});
}

TEST_CASE("case and surrounding whitespace are ignored, interior spacing kept") {
    CHECK(parse_instruction("  PICK Coke  Can \t") == ParsedInstruction{InstructionTemplate::pick, "Coke  Can", std::nullopt});
    CHECK(parse_instruction("Move apple NEAR sponge").secondary_object_slot == "sponge");
    CHECK(parse_instruction("place cup UPRIGHT").object_slot == "cup");
}

TEST_CASE("move splits at the last near") {
    const auto p = parse_instruction("move the near cup near the bowl");
    CHECK(p.object_slot == "the near cup");
    CHECK(p.secondary_object_slot == "the bowl");
    // "nearby" is not the keyword.
    const auto q = parse_instruction("move nearby cup near bowl");
    CHECK(q.object_slot == "nearby cup");
}

TEST_CASE("keywords must be whole tokens") {
    CHECK_THROWS_AS(parse_instruction("picking cup"), InstructionError);
    CHECK(parse_instruction("pick pickle").object_slot == "pickle");
}

TEST_CASE("errors") {
    const auto code_of = [](std::string_view s) {
        try {
            parse_instruction(s);
        } catch (const InstructionError& e) {
            return std::optional(e.code());
        }
        return std::optional<InstructionError::Code>();
    };
    CHECK(code_of("open the drawer") == InstructionError::Code::unknown_template);
    CHECK(code_of("") == InstructionError::Code::unknown_template);
    CHECK(code_of("place cup") == InstructionError::Code::unknown_template);
    CHECK(code_of("pick") == InstructionError::Code::empty_slot);
    CHECK(code_of("pick   ") == InstructionError::Code::empty_slot);
    CHECK(code_of("move apple near") == InstructionError::Code::empty_slot);
    CHECK(code_of("move near sponge") == InstructionError::Code::empty_slot);
    CHECK(code_of("place upright") == InstructionError::Code::empty_slot);
    try {
        parse_instruction("open the drawer");
    } catch (const InstructionError& e) {
        CHECK(e.input() == "open the drawer");
    }
}

TEST_CASE("random multi-word slots are recovered exactly") {
    const std::vector<std::string> words = {"coke", "can", "pink", "cup", "near", "upright", "pick", "a", "b2", "über"};
    const std::vector<std::string> target_words = {"coke", "can", "pink", "cup", "table", "bowl"};
    std::mt19937_64 rng(4);
    const auto phrase = [&](const std::vector<std::string>& from) {
        std::uniform_int_distribution<std::size_t> n(1, 4), w(0, from.size() - 1);
        std::string s;
        for (std::size_t i = n(rng); i > 0; --i) {
            s += (s.empty() ? "" : " ") + from[w(rng)];
        }
        return s;
    };
    for (int i = 0; i < 500; ++i) {
        const std::string x = phrase(words);
        const std::string y = phrase(target_words);
        CHECK(parse_instruction("pick " + x).object_slot == x);
        CHECK(parse_instruction("knock " + x).object_slot == x);
        CHECK(parse_instruction("place " + x + " upright").object_slot == x);
        const auto m = parse_instruction("move " + x + " near " + y);
        CHECK(m.object_slot == x);
        CHECK(m.secondary_object_slot == y);
    }
}
