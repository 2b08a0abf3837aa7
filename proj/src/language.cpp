#include "steer/language.hpp"

namespace steer {

std::string_view to_string(ReorientDirection d) {
    return d == ReorientDirection::to_horizontal ? "to_horizontal" : "to_upright";
}

ReorientDirection reorient_direction_from_string(std::string_view name) {
    if (name == "to_horizontal") {
        return ReorientDirection::to_horizontal;
    }
    if (name == "to_upright") {
        return ReorientDirection::to_upright;
    }
    throw std::invalid_argument("unknown reorient direction: " + std::string(name));
}

std::string_view approach_surface(GraspApproachClass c) {
    switch (c) {
        case GraspApproachClass::top_down:
            return "top-down";
        case GraspApproachClass::side:
            return "side";
        case GraspApproachClass::diagonal:
            return "diagonal";
        case GraspApproachClass::upward:
            break;
    }
    throw UnlabeledGraspMode();
}

std::string render_grasp(std::string_view object, GraspApproachClass c) {
    const std::string_view approach = approach_surface(c);
    std::string out = "grasp the ";
    out += object;
    out += " in a ";
    out += approach;
    out += " grasp";
    return out;
}

std::string render_reorient(std::string_view object, ReorientDirection d) {
    std::string out = "reorient the ";
    out += object;
    out += d == ReorientDirection::to_horizontal ? " to be horizontal" : " to be upright";
    return out;
}

std::string render_lift(std::string_view object) { return "hold and lift the " + std::string(object); }

std::string render_place(std::string_view object) { return "place the " + std::string(object); }

}  // namespace steer
