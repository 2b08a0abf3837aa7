#include "steer/serialize.hpp"

namespace steer {

ojson to_json(const Vec3& v) { return ojson::array({v.x, v.y, v.z}); }

ojson to_json(const Quaternion& q) { return ojson::array({q.w, q.x, q.y, q.z}); }

ojson to_json(const TimeStep& s) {
    return {{"t", s.index},
            {"ee_pos", to_json(s.ee_position)},
            {"wrist_quat", to_json(s.wrist_orientation)},
            {"gripper", s.gripper_aperture}};
}

ojson to_json(const Anchor& a) {
    return {{"id", a.id}, {"direction", to_json(a.direction)}, {"class", std::string(to_string(a.semantic_class))}};
}

ojson to_json(const SceneState& scene) {
    ojson objects = ojson::object();
    for (const auto& [name, o] : scene.objects) {
        objects[name] = {{"position", to_json(o.position)},
                         {"orientation", std::string(to_string(o.orientation))},
                         {"held", o.held},
                         {"toppleable", o.toppleable}};
    }
    const auto held = scene.held_object();
    const GraspApproachClass wrist = approach_class(scene.gripper.wrist_orientation);
    return {{"scenario", scene.scenario},
            {"seed", scene.seed},
            {"step", scene.step},
            {"table_height", scene.table_height},
            {"gripper",
             {{"position", to_json(scene.gripper.position)},
              {"wrist_orientation", to_json(scene.gripper.wrist_orientation)},
              {"approach_class", std::string(to_string(wrist))},
              {"aperture", scene.gripper.aperture}}},
            {"objects", objects},
            {"held_object", held ? ojson(*held) : ojson(nullptr)}};
}

ojson to_json(const SkillCall& call) {
    ojson j = {{"skill", std::string(to_string(call.name))}, {"object", call.object}};
    if (const auto m = call.modifier_text()) {
        j["modifier"] = *m;
    }
    j["language"] = render_language(call);
    return j;
}

ojson to_json(const SkillOutcome& outcome, bool with_trajectory) {
    ojson j = {{"success", outcome.success}, {"reason", outcome.reason}, {"steps", outcome.trajectory.size()}};
    if (with_trajectory) {
        ojson t = ojson::array();
        for (const TimeStep& s : outcome.trajectory) {
            t.push_back(to_json(s));
        }
        j["trajectory"] = std::move(t);
    }
    return j;
}

namespace {

ojson issues(const std::vector<PlanIssue>& list) {
    ojson a = ojson::array();
    for (const PlanIssue& i : list) {
        a.push_back({{"call_index", i.call_index}, {"message", i.message}});
    }
    return a;
}

}  // namespace

ojson to_json(const ValidationReport& report) {
    return {{"ok", report.ok()}, {"errors", issues(report.errors)}, {"warnings", issues(report.warnings)}};
}

ojson to_json(const ExecutionEntry& entry) {
    return {{"call_index", entry.call_index}, {"call", to_json(entry.call)}, {"language", entry.language},
            {"success", entry.success},       {"reason", entry.reason},      {"steps", entry.steps}};
}

ojson to_json(const ExecutionLog& log) {
    ojson entries = ojson::array();
    for (const ExecutionEntry& e : log.entries) {
        entries.push_back(to_json(e));
    }
    const auto halted = log.halted_at();
    return {{"completed", log.completed},
            {"halted_at", halted ? ojson(*halted) : ojson(nullptr)},
            {"entries", entries}};
}

ojson to_json(const PlanParseError& error) {
    return {{"code", std::string(to_string(error.code()))},
            {"message", error.message()},
            {"line", error.line()},
            {"column", error.column()}};
}

ojson to_json(const SegmenterConfig& c) {
    return {{"open_threshold", c.open_threshold},
            {"closed_threshold", c.closed_threshold},
            {"reorient_dwell", c.reorient_dwell},
            {"lift_height", c.lift_height},
            {"smoothing_window", c.smoothing_window}};
}

SegmenterConfig segmenter_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("segmenter config must be an object");
    }
    SegmenterConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "open_threshold") {
                c.open_threshold = value.get<double>();
            } else if (key == "closed_threshold") {
                c.closed_threshold = value.get<double>();
            } else if (key == "reorient_dwell") {
                c.reorient_dwell = value.get<int>();
            } else if (key == "lift_height") {
                c.lift_height = value.get<double>();
            } else if (key == "smoothing_window") {
                c.smoothing_window = value.get<int>();
            } else {
                throw std::invalid_argument("unknown segmenter config key \"" + key + "\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("segmenter config: ") + e.what());
    }
    c.validate();
    return c;
}

Vec3 vec3_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument("expected [x, y, z]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

SkillCall skill_call_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("skill call must be an object");
    }
    if (!j.contains("skill") || !j["skill"].is_string()) {
        throw std::invalid_argument("missing string field \"skill\"");
    }
    if (!j.contains("object") || !j["object"].is_string()) {
        throw std::invalid_argument("missing string field \"object\"");
    }
    std::optional<std::string> modifier;
    if (j.contains("modifier") && !j["modifier"].is_null()) {
        if (!j["modifier"].is_string()) {
            throw std::invalid_argument("\"modifier\" must be a string");
        }
        modifier = j["modifier"].get<std::string>();
    }
    std::optional<std::string_view> mv;
    if (modifier) {
        mv = *modifier;
    }
    return make_call(j["skill"].get<std::string>(), j["object"].get<std::string>(), mv);
}

}  // namespace steer
