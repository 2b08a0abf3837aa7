#include "steer/skill.hpp"

namespace steer {

SkillCall SkillCall::grasp(std::string object, GraspApproachClass approach) {
    return {SkillKind::grasp, std::move(object), approach, std::nullopt};
}

SkillCall SkillCall::reorient(std::string object, ReorientDirection direction) {
    return {SkillKind::reorient, std::move(object), std::nullopt, direction};
}

SkillCall SkillCall::lift(std::string object) { return {SkillKind::lift, std::move(object), std::nullopt, std::nullopt}; }

SkillCall SkillCall::place(std::string object) {
    return {SkillKind::place, std::move(object), std::nullopt, std::nullopt};
}

std::optional<std::string> SkillCall::modifier_text() const {
    if (approach) {
        return std::string(approach_surface(*approach));
    }
    if (direction) {
        return std::string(to_string(*direction));
    }
    return std::nullopt;
}

void validate_call(const SkillCall& call) {
    if (call.object.empty()) {
        throw std::invalid_argument("skill call has an empty object");
    }
    const bool wants_approach = call.name == SkillKind::grasp;
    const bool wants_direction = call.name == SkillKind::reorient;
    if (wants_approach != call.approach.has_value() || wants_direction != call.direction.has_value()) {
        throw std::invalid_argument("modifier does not match skill " + std::string(to_string(call.name)));
    }
    if (call.approach == GraspApproachClass::upward) {
        throw std::invalid_argument("upward is not a grasp approach");
    }
}

std::optional<GraspApproachClass> parse_grasp_modifier(std::string_view text) {
    if (text == "top-down" || text == "top_down") {
        return GraspApproachClass::top_down;
    }
    if (text == "side") {
        return GraspApproachClass::side;
    }
    if (text == "diagonal") {
        return GraspApproachClass::diagonal;
    }
    return std::nullopt;
}

std::optional<ReorientDirection> parse_reorient_modifier(std::string_view text) {
    if (text == "to_horizontal" || text == "horizontal") {
        return ReorientDirection::to_horizontal;
    }
    if (text == "to_upright" || text == "upright" || text == "vertical") {
        return ReorientDirection::to_upright;
    }
    return std::nullopt;
}

SkillCall make_call(std::string_view name, std::string object, std::optional<std::string_view> modifier) {
    SkillKind kind;
    try {
        kind = skill_kind_from_string(name);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("unknown skill: " + std::string(name));
    }
    const bool takes_modifier = kind == SkillKind::grasp || kind == SkillKind::reorient;
    if (takes_modifier != modifier.has_value()) {
        throw std::invalid_argument(std::string(name) + (takes_modifier ? " takes 2 arguments" : " takes 1 argument"));
    }
    SkillCall call{kind, std::move(object), std::nullopt, std::nullopt};
    if (kind == SkillKind::grasp) {
        call.approach = parse_grasp_modifier(*modifier);
        if (!call.approach) {
            throw std::invalid_argument("invalid grasp approach \"" + std::string(*modifier) + "\"");
        }
    } else if (kind == SkillKind::reorient) {
        call.direction = parse_reorient_modifier(*modifier);
        if (!call.direction) {
            throw std::invalid_argument("invalid reorient direction \"" + std::string(*modifier) + "\"");
        }
    }
    validate_call(call);
    return call;
}

std::string render_language(const SkillCall& call) {
    switch (call.name) {
        case SkillKind::grasp:
            return render_grasp(call.object, call.approach.value());
        case SkillKind::reorient:
            return render_reorient(call.object, call.direction.value());
        case SkillKind::lift:
            return render_lift(call.object);
        case SkillKind::place:
            return render_place(call.object);
    }
    return {};
}

}  // namespace steer
