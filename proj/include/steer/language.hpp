#pragma once

// Instruction templates shared by the relabeler and the plan renderer.

#include <stdexcept>
#include <string>
#include <string_view>

#include "steer/geometry.hpp"

namespace steer {

enum class ReorientDirection { to_horizontal, to_upright };

/// "to_horizontal" / "to_upright".
std::string_view to_string(ReorientDirection d);
ReorientDirection reorient_direction_from_string(std::string_view name);

/// Thrown for the upward class, which has no instruction surface form.
class UnlabeledGraspMode : public std::invalid_argument {
public:
    UnlabeledGraspMode() : std::invalid_argument("unlabeled grasp mode") {}
};

/// "top-down" / "side" / "diagonal"; throws UnlabeledGraspMode for upward.
std::string_view approach_surface(GraspApproachClass c);

/// "grasp the <object> in a <approach> grasp"
std::string render_grasp(std::string_view object, GraspApproachClass c);
/// "reorient the <object> to be horizontal|upright"
std::string render_reorient(std::string_view object, ReorientDirection d);
/// "hold and lift the <object>"
std::string render_lift(std::string_view object);
/// "place the <object>"
std::string render_place(std::string_view object);

}  // namespace steer
