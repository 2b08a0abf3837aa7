#pragma once

// The skill API vocabulary: grasp(object, approach), reorient(object, direction),
// lift(object), place(object).

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "steer/geometry.hpp"
#include "steer/language.hpp"
#include "steer/trajectory.hpp"

namespace steer {

struct SkillCall {
    SkillKind name = SkillKind::grasp;
    std::string object;
    std::optional<GraspApproachClass> approach;    // grasp only
    std::optional<ReorientDirection> direction;  // reorient only

    static SkillCall grasp(std::string object, GraspApproachClass approach);
    static SkillCall reorient(std::string object, ReorientDirection direction);
    static SkillCall lift(std::string object);
    static SkillCall place(std::string object);

    /// Modifier in DSL surface form ("top-down", "side", "diagonal",
    /// "to_horizontal", "to_upright"), if the skill takes one.
    std::optional<std::string> modifier_text() const;

    friend bool operator==(const SkillCall&, const SkillCall&) = default;
};

/// Throws std::invalid_argument when the modifier does not match the skill,
/// the object is empty, or the approach is upward.
void validate_call(const SkillCall& call);

/// Accepts "top-down", "side", "diagonal" (and the class names "top_down").
std::optional<GraspApproachClass> parse_grasp_modifier(std::string_view text);
/// Accepts "to_horizontal", "to_upright", "horizontal", "vertical", "upright".
std::optional<ReorientDirection> parse_reorient_modifier(std::string_view text);

/// Builds a call from a skill name and optional modifier text; throws
/// std::invalid_argument on an unknown name, arity or modifier problem.
SkillCall make_call(std::string_view name, std::string object, std::optional<std::string_view> modifier);

/// The templated instruction the low-level policy was trained on.
std::string render_language(const SkillCall& call);

}  // namespace steer
