#pragma once

// Plan DSL: parsing, rendering back to text and language, precondition
// linting and open-loop execution against a simulated scene.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "steer/sim.hpp"
#include "steer/skill.hpp"

namespace steer {

struct Plan {
    std::vector<SkillCall> calls;
    std::string source_text;
};

class PlanParseError : public std::runtime_error {
public:
    enum class Code { syntax, empty_program, unknown_function, arity, invalid_modifier };

    PlanParseError(Code code, int line, int column, std::string message);

    Code code() const { return code_; }
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& message() const { return message_; }

private:
    Code code_;
    int line_;
    int column_;
    std::string message_;
};

std::string_view to_string(PlanParseError::Code code);

/// program := stmt+ ; stmt := name "(" string ["," string] ")" [";"]
/// Strings are double- or single-quoted with backslash escapes; "#" starts a
/// line comment. Reorient accepts "horizontal", "vertical" and "upright" as
/// synonyms of the canonical directions.
Plan parse_plan(std::string_view text);

/// One statement per line in canonical form; parse_plan(to_dsl(p)) == p.calls.
std::string to_dsl(const std::vector<SkillCall>& calls);
std::string to_dsl(const SkillCall& call);

struct PlanIssue {
    std::size_t call_index = 0;
    std::string message;

    friend bool operator==(const PlanIssue&, const PlanIssue&) = default;
};

struct ValidationReport {
    std::vector<PlanIssue> errors;
    std::vector<PlanIssue> warnings;

    bool ok() const { return errors.empty(); }
    std::string summary() const;
};

/// Order checks (reorient/lift/place only on the held object, no grasp while
/// holding) run stepwise from the scene's current holding state; objects
/// missing from the scene produce warnings.
ValidationReport validate_plan(const std::vector<SkillCall>& calls, const SceneState& scene);
inline ValidationReport validate_plan(const Plan& plan, const SceneState& scene) {
    return validate_plan(plan.calls, scene);
}

struct ExecutionEntry {
    std::size_t call_index = 0;
    SkillCall call;
    std::string language;
    bool success = false;
    std::string reason;
    std::size_t steps = 0;
    SceneState state_after;
};

struct ExecutionLog {
    std::vector<ExecutionEntry> entries;
    bool completed = false;  // every call succeeded

    std::optional<std::size_t> halted_at() const;
};

/// Dispatches calls in order; stops after the first failed or rejected call.
ExecutionLog execute_plan(const Plan& plan, SceneState& scene, const SimOptions& options = {},
                          const StepObserver& observer = {});

/// grasp(side), lift, reorient(to_horizontal), reorient(to_upright), place.
std::vector<SkillCall> pour_plan(const std::string& object);
/// grasp(side), lift, reorient(to_upright), place.
std::vector<SkillCall> unstack_flip_plan(const std::string& object);

}  // namespace steer
