#pragma once

// JSON views of scene state, skill calls and execution results, shared by the
// gateway and the CLI.

#include <json.hpp>

#include "steer/orchestrator.hpp"
#include "steer/segmenter.hpp"
#include "steer/sim.hpp"

namespace steer {

using ojson = nlohmann::ordered_json;

ojson to_json(const Vec3& v);
ojson to_json(const Quaternion& q);
ojson to_json(const TimeStep& s);
/// {"id", "direction", "class"} with a unit direction.
ojson to_json(const Anchor& a);
ojson to_json(const SceneState& scene);
/// {"skill", "object", "modifier"?, "language"}
ojson to_json(const SkillCall& call);
/// Trajectory is summarized by its length unless `with_trajectory`.
ojson to_json(const SkillOutcome& outcome, bool with_trajectory = false);
ojson to_json(const ValidationReport& report);
ojson to_json(const ExecutionEntry& entry);
ojson to_json(const ExecutionLog& log);
/// {"code", "message", "line", "column"}
ojson to_json(const PlanParseError& error);

ojson to_json(const SegmenterConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected so typos do not
/// silently fall back. Throws std::invalid_argument.
SegmenterConfig segmenter_config_from_json(const nlohmann::json& j);

Vec3 vec3_from_json(const nlohmann::json& j);
/// Accepts {"skill", "object", "modifier"?}; throws std::invalid_argument.
SkillCall skill_call_from_json(const nlohmann::json& j);

}  // namespace steer
