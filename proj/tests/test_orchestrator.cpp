#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "steer/orchestrator.hpp"

using namespace steer;
using C = GraspApproachClass;
using R = ReorientDirection;

namespace {

PlanParseError::Code error_code(std::string_view text) {
    try {
        parse_plan(text);
    } catch (const PlanParseError& e) {
        return e.code();
    }
    FAIL("expected a parse error for: " << text);
    return PlanParseError::Code::syntax;
}

}  // namespace

TEST_CASE("pour program from the command list") {
    const Plan p = parse_plan(
        R"(grasp("pink cup", "side") lift("pink cup") reorient("pink cup", "horizontal") reorient("pink cup", "vertical") place("pink cup"))");
    CHECK(p.calls == pour_plan("pink cup"));
    CHECK(p.source_text.find("vertical") != std::string::npos);
}

TEST_CASE("syntax details") {
    const Plan p = parse_plan(
        "# pour\n"
        "grasp('cup', \"top-down\");  # trailing comment\n"
        "\n"
        "  lift ( \"cup\" ) ;\n"
        "place(\"a \\\"quoted\\\" cup\\\\\")");
    REQUIRE(p.calls.size() == 3);
    CHECK(p.calls[0] == SkillCall::grasp("cup", C::top_down));
    CHECK(p.calls[2].object == "a \"quoted\" cup\\");
    CHECK(parse_plan("reorient(\"x\", \"upright\")").calls[0].direction == R::to_upright);
    CHECK(parse_plan("reorient(\"x\", \"to_horizontal\")").calls[0].direction == R::to_horizontal);
}

TEST_CASE("error kinds") {
    CHECK(error_code(R"(grasp("coke can", "sideways"))") == PlanParseError::Code::invalid_modifier);
    CHECK(error_code("") == PlanParseError::Code::empty_program);
    CHECK(error_code("  # only a comment\n") == PlanParseError::Code::empty_program);
    CHECK(error_code(R"(push("cup"))") == PlanParseError::Code::unknown_function);
    CHECK(error_code(R"(lift("cup", "side"))") == PlanParseError::Code::arity);
    CHECK(error_code(R"(grasp("cup"))") == PlanParseError::Code::arity);
    CHECK(error_code("lift(\"cup\"))") == PlanParseError::Code::syntax);
    CHECK(error_code(R"(lift("cup)") == PlanParseError::Code::syntax);
    CHECK(error_code(R"(lift(cup))") == PlanParseError::Code::syntax);
    CHECK(error_code(R"(lift(""))") == PlanParseError::Code::syntax);
    CHECK(error_code("lift(\"cup\") @") == PlanParseError::Code::syntax);
    CHECK(to_string(PlanParseError::Code::empty_program) == "empty_program");
}

TEST_CASE("errors report line and column") {
    try {
        parse_plan("grasp(\"cup\", \"side\")\nlift(\"cup\")\n  reorient(\"cup\", \"sideways\")");
        FAIL("no error");
    } catch (const PlanParseError& e) {
        CHECK(e.code() == PlanParseError::Code::invalid_modifier);
        CHECK(e.line() == 3);
        CHECK(e.column() == 19);
    }
    try {
        parse_plan("lift(\"cup\")\nlift \"cup\")");
        FAIL("no error");
    } catch (const PlanParseError& e) {
        CHECK(e.code() == PlanParseError::Code::syntax);
        CHECK(e.line() == 2);
        CHECK(e.column() == 6);
    }
}

TEST_CASE("parse and render round trip on random plans") {
    std::mt19937_64 rng(17);
    const std::vector<std::string> names = {"cup", "pink cup", "a \"b\"", "back\\slash", "it's", "#hash", "(paren)",
                                            "semi;colon", "comma, here", "tab\there", "near", "杯子", "x"};
    std::uniform_int_distribution<std::size_t> name(0, names.size() - 1), len(1, 12);
    std::uniform_int_distribution<int> kind(0, 3), cls(0, 2), dir(0, 1);
    for (int i = 0; i < 1000; ++i) {
        std::vector<SkillCall> calls;
        for (std::size_t k = len(rng); k > 0; --k) {
            const std::string& obj = names[name(rng)];
            switch (kind(rng)) {
                case 0:
                    calls.push_back(SkillCall::grasp(obj, std::array{C::top_down, C::side, C::diagonal}[std::size_t(cls(rng))]));
                    break;
                case 1:
                    calls.push_back(SkillCall::reorient(obj, dir(rng) ? R::to_upright : R::to_horizontal));
                    break;
                case 2:
                    calls.push_back(SkillCall::lift(obj));
                    break;
                default:
                    calls.push_back(SkillCall::place(obj));
            }
        }
        const std::string text = to_dsl(calls);
        REQUIRE(parse_plan(text).calls == calls);
        for (const SkillCall& c : calls) {
            const auto parsed = oracle::parse_language(render_language(c));
            REQUIRE(parsed);
            CHECK(parsed->object == c.object);
            CHECK(parsed->skill == to_string(c.name));
            CHECK(parsed->modifier == c.modifier_text());
        }
    }
}

TEST_CASE("validate_plan") {
    const SceneState cup = reset("single_cup", 0);
    CHECK(validate_plan(pour_plan("cup"), cup).ok());
    CHECK(validate_plan(pour_plan("cup"), cup).warnings.empty());

    const ValidationReport lift_first = validate_plan({SkillCall::lift("cup")}, cup);
    REQUIRE(lift_first.errors.size() == 1);
    CHECK(lift_first.errors[0].call_index == 0);

    const ValidationReport mug = validate_plan({SkillCall::grasp("mug", C::side)}, cup);
    CHECK(mug.ok());
    REQUIRE(mug.warnings.size() == 1);
    CHECK(mug.warnings[0].message.find("mug") != std::string::npos);

    const ValidationReport twice = validate_plan({SkillCall::grasp("cup", C::side), SkillCall::grasp("cup", C::side)}, cup);
    REQUIRE(twice.errors.size() == 1);
    CHECK(twice.errors[0].call_index == 1);

    const ValidationReport other = validate_plan(
        {SkillCall::grasp("cup", C::side), SkillCall::place("cup"), SkillCall::reorient("cup", R::to_upright)}, cup);
    REQUIRE(other.errors.size() == 1);
    CHECK(other.errors[0].call_index == 2);
    CHECK_FALSE(other.summary().empty());
}

TEST_CASE("validate_plan starts from the scene's holding state") {
    SceneState s = reset("single_cup", 0);
    exec_grasp(s, "cup", C::side);
    CHECK(validate_plan({SkillCall::lift("cup"), SkillCall::place("cup")}, s).ok());
    CHECK_FALSE(validate_plan({SkillCall::grasp("cup", C::side)}, s).ok());
}

TEST_CASE("execute pour in single_cup") {
    SceneState s = reset("single_cup", 0);
    bool saw_horizontal = false;
    const ExecutionLog log = execute_plan({pour_plan("cup"), ""}, s, {}, [&](const SceneState& st) {
        saw_horizontal |= st.objects.at("cup").orientation == OrientationClass::horizontal;
    });
    CHECK(log.completed);
    CHECK_FALSE(log.halted_at());
    REQUIRE(log.entries.size() == 5);
    for (const ExecutionEntry& e : log.entries) {
        CHECK(e.success);
        CHECK(e.steps > 0);
    }
    CHECK(log.entries[2].state_after.objects.at("cup").orientation == OrientationClass::horizontal);
    CHECK(log.entries[0].language == "grasp the cup in a side grasp");
    CHECK(saw_horizontal);
    const ObjectState& cup = s.objects.at("cup");
    CHECK(cup.orientation == OrientationClass::upright);
    CHECK_FALSE(cup.held);
    CHECK(cup.position.z == s.table_height);
}

TEST_CASE("execution halts at the first failure") {
    SceneState s = reset("potted_plant", 0);
    int steps_after_failure = 0;
    bool failed = false;
    const Plan plan{{SkillCall::grasp("flower pot", C::top_down), SkillCall::lift("flower pot")}, ""};
    const ExecutionLog log = execute_plan(plan, s, {}, [&](const SceneState& st) {
        steps_after_failure += failed;
        (void)st;
    });
    failed = true;
    CHECK_FALSE(log.completed);
    REQUIRE(log.entries.size() == 1);
    CHECK(log.halted_at() == 0u);
    CHECK(log.entries[0].reason == "disturbed attachment");
    CHECK(steps_after_failure == 0);

    SceneState t = reset("single_cup", 0);
    const ExecutionLog rejected = execute_plan({{SkillCall::grasp("mug", C::side), SkillCall::lift("mug")}, ""}, t);
    REQUIRE(rejected.entries.size() == 1);
    CHECK_FALSE(rejected.entries[0].success);
    CHECK(rejected.entries[0].reason.find("mug") != std::string::npos);
    CHECK(t == reset("single_cup", 0));
}

TEST_CASE("unstack and flip in the stacked scenario") {
    SceneState s = reset("stacked", 0);
    const auto plan = unstack_flip_plan("top cup");
    CHECK(validate_plan(plan, s).ok());
    const ExecutionLog log = execute_plan({plan, ""}, s);
    CHECK(log.completed);
    CHECK(log.entries.size() == 4);
    const ObjectState& top = s.objects.at("top cup");
    CHECK(top.orientation == OrientationClass::upright);
    CHECK(top.position.z == s.table_height);
    CHECK_FALSE(top.held);
    const ObjectState& bottom = s.objects.at("bottom cup");
    const Vec3 gap = top.position - bottom.position;
    CHECK(std::hypot(gap.x, gap.y) >= 0.08);
}
