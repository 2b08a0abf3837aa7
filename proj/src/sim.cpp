#include "steer/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "steer/instruction.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace steer {

using nlohmann::json;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

/// Uniform [0, 1) with a platform-independent mapping from the engine output.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

Vec3 random_unit(std::mt19937_64& rng) {
    const double z = uniform(rng, -1.0, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(OrientationClass c) { return c == OrientationClass::upright ? "upright" : "horizontal"; }

OrientationClass orientation_class_from_string(std::string_view name) {
    if (name == "upright") {
        return OrientationClass::upright;
    }
    if (name == "horizontal") {
        return OrientationClass::horizontal;
    }
    throw std::invalid_argument("unknown orientation class: " + std::string(name));
}

std::optional<std::string> SceneState::held_object() const {
    for (const auto& [name, obj] : objects) {
        if (obj.held) {
            return name;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scenarios

std::string_view builtin_scenarios_json() {
    static constexpr std::string_view text = R"({
  "scenarios": [
    {
      "name": "single_cup",
      "description": "one cup standing upright on the table",
      "objects": [
        {"name": "cup", "position": [0.5, 0.0, 0.0], "height": 0.10}
      ]
    },
    {
      "name": "potted_plant",
      "description": "a flower pot with a plant growing out of its top",
      "objects": [
        {"name": "flower pot", "position": [0.5, 0.05, 0.0], "height": 0.15, "toppleable": false}
      ],
      "rules": [
        {"object": "flower pot", "allowed": ["side"], "reason": "disturbed attachment",
         "hint": "a plant grows out of the top of the flower pot; only a grasp around its body leaves the plant alone"}
      ]
    },
    {
      "name": "kettle",
      "description": "a kettle whose handle extends above it",
      "objects": [
        {"name": "kettle", "position": [0.5, -0.05, 0.0], "height": 0.20, "toppleable": false}
      ],
      "rules": [
        {"object": "kettle", "allowed": ["top_down"], "reason": "handle collision",
         "hint": "the kettle's handle arches over its top; grasp the handle from above"}
      ]
    },
    {
      "name": "clutter",
      "description": "an apple surrounded by other objects",
      "objects": [
        {"name": "apple", "position": [0.5, 0.0, 0.0], "height": 0.08},
        {"name": "coke can", "position": [0.5, 0.12, 0.0], "height": 0.12},
        {"name": "water bottle", "position": [0.5, -0.12, 0.0], "height": 0.20},
        {"name": "sponge", "position": [0.62, 0.0, 0.0], "height": 0.04, "toppleable": false}
      ],
      "rules": [
        {"object": "apple", "allowed": ["top_down"], "reason": "knocked over neighboring object",
         "topples": ["coke can", "water bottle"],
         "hint": "the apple is boxed in on every side; only the space above it is free"}
      ]
    },
    {
      "name": "stacked",
      "description": "a cup lying upside down on top of another cup",
      "objects": [
        {"name": "bottom cup", "position": [0.5, 0.0, 0.0], "height": 0.10},
        {"name": "top cup", "position": [0.5, 0.0, 0.10], "height": 0.10, "orientation": "horizontal"}
      ]
    }
  ]
})";
    return text;
}

namespace {

Vec3 vec3_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) {
        throw std::invalid_argument("expected a 3-vector");
    }
    return {v[0], v[1], v[2]};
}

ScenarioDefinition scenario_from_json(const json& j) {
    ScenarioDefinition def;
    def.name = j.at("name").get<std::string>();
    def.description = j.value("description", "");
    def.position_jitter = j.value("position_jitter", 0.02);
    for (const json& o : j.at("objects")) {
        ObjectSpec spec;
        spec.name = o.at("name").get<std::string>();
        spec.position = vec3_from(o.at("position"));
        spec.orientation = orientation_class_from_string(o.value("orientation", "upright"));
        spec.toppleable = o.value("toppleable", true);
        spec.height = o.value("height", 0.10);
        def.objects.push_back(std::move(spec));
    }
    if (const auto rules = j.find("rules"); rules != j.end()) {
        for (const json& r : *rules) {
            GraspRule rule;
            rule.object = r.at("object").get<std::string>();
            for (const json& a : r.at("allowed")) {
                rule.allowed.push_back(approach_class_from_string(a.get<std::string>()));
            }
            rule.reason = r.at("reason").get<std::string>();
            rule.topples = r.value("topples", std::vector<std::string>{});
            rule.hint = r.value("hint", "");
            def.rules.push_back(std::move(rule));
        }
    }
    return def;
}

}  // namespace

const ScenarioLibrary& ScenarioLibrary::builtin() {
    static const ScenarioLibrary library = from_json_text(builtin_scenarios_json());
    return library;
}

ScenarioLibrary ScenarioLibrary::from_json_text(std::string_view text) {
    ScenarioLibrary library;
    try {
        const json j = json::parse(text);
        for (const json& s : j.at("scenarios")) {
            library.add(scenario_from_json(s));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scenario file: ") + e.what());
    }
    return library;
}

ScenarioLibrary ScenarioLibrary::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open scenario file " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

void ScenarioLibrary::add(ScenarioDefinition def) {
    auto name = def.name;
    scenarios_.insert_or_assign(std::move(name), std::move(def));
}

const ScenarioDefinition* ScenarioLibrary::find(std::string_view name) const {
    const auto it = scenarios_.find(name);
    return it == scenarios_.end() ? nullptr : &it->second;
}

std::vector<std::string> ScenarioLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [name, def] : scenarios_) {
        out.push_back(name);
    }
    return out;
}

Quaternion wrist_for_class(GraspApproachClass c) {
    switch (c) {
        case GraspApproachClass::side:
            return {};
        case GraspApproachClass::diagonal:
            return Quaternion::from_axis_angle({1, 0, 0}, -45.0 * deg);
        case GraspApproachClass::top_down:
            return Quaternion::from_axis_angle({1, 0, 0}, -90.0 * deg);
        case GraspApproachClass::upward:
            return Quaternion::from_axis_angle({1, 0, 0}, 90.0 * deg);
    }
    return {};
}

SceneState reset(const std::vector<ObjectSpec>& objects, std::uint64_t seed, std::vector<GraspRule> rules) {
    SceneState s;
    s.scenario = "custom";
    s.seed = seed;
    s.gripper = {home_position, Quaternion{}, 1.0};
    int held = 0;
    for (const ObjectSpec& spec : objects) {
        if (spec.name.empty()) {
            throw SimError("object with an empty name");
        }
        ObjectState obj;
        obj.position = spec.position;
        obj.orientation = spec.orientation;
        obj.toppleable = spec.toppleable;
        obj.height = spec.height;
        obj.held = spec.held;
        if (spec.held) {
            ++held;
            obj.grasp_offset = {0.0, 0.0, -spec.height / 2.0};
            s.gripper.position = spec.position - obj.grasp_offset;
            s.gripper.aperture = 0.0;
        }
        if (!s.objects.emplace(spec.name, obj).second) {
            throw SimError("duplicate object \"" + spec.name + "\"");
        }
    }
    if (held > 1) {
        throw SimError("at most one object can be held");
    }
    s.rules = std::move(rules);
    return s;
}

SceneState reset(std::string_view scenario, std::uint64_t seed, const ScenarioLibrary& library) {
    const ScenarioDefinition* def = library.find(scenario);
    if (def == nullptr) {
        throw SimError("unknown scenario \"" + std::string(scenario) + "\"");
    }
    std::mt19937_64 rng(splitmix64(seed));
    const Vec3 jitter{uniform(rng, -def->position_jitter, def->position_jitter),
                      uniform(rng, -def->position_jitter, def->position_jitter), 0.0};
    std::vector<ObjectSpec> objects = def->objects;
    for (ObjectSpec& o : objects) {
        o.position = o.position + jitter;
    }
    SceneState s = reset(objects, seed, def->rules);
    s.scenario = def->name;
    return s;
}

// ---------------------------------------------------------------------------
// Controllers

TimeStep observe(const SceneState& state) {
    return {state.step, state.gripper.position, state.gripper.wrist_orientation, state.gripper.aperture};
}

namespace {

class StepRecorder {
public:
    StepRecorder(SceneState& state, const StepObserver& observer) : state_(state), observer_(observer) {}

    void step(const GripperState& g) {
        state_.gripper = g;
        ++state_.step;
        for (auto& [name, obj] : state_.objects) {
            if (obj.held) {
                obj.position = g.position + obj.grasp_offset;
            }
        }
        trajectory_.push_back(observe(state_));
        if (observer_) {
            observer_(state_);
        }
    }

    /// Linear position / spherical orientation / linear aperture interpolation.
    void move(const GripperState& target, int steps) {
        const GripperState start = state_.gripper;
        for (int k = 1; k <= steps; ++k) {
            const double t = static_cast<double>(k) / steps;
            step({lerp(start.position, target.position, t),
                  slerp(start.wrist_orientation, target.wrist_orientation, t),
                  start.aperture + t * (target.aperture - start.aperture)});
        }
    }

    std::vector<TimeStep> take() { return std::move(trajectory_); }

private:
    SceneState& state_;
    const StepObserver& observer_;
    std::vector<TimeStep> trajectory_;
};

ObjectState& require_object(SceneState& state, std::string_view name) {
    const auto it = state.objects.find(std::string(name));
    if (it == state.objects.end()) {
        throw SimError("unknown object \"" + std::string(name) + "\"");
    }
    return it->second;
}

ObjectState& require_held(SceneState& state, std::string_view name) {
    ObjectState& obj = require_object(state, name);
    if (!obj.held) {
        throw SimError("\"" + std::string(name) + "\" is not held");
    }
    return obj;
}

const GraspRule* rule_for(const SceneState& state, std::string_view object) {
    for (const GraspRule& r : state.rules) {
        if (r.object == object) {
            return &r;
        }
    }
    return nullptr;
}

/// 0 = side, 1 = diagonal, 2 = top_down; -1 for upward.
int verticality(GraspApproachClass c) {
    switch (c) {
        case GraspApproachClass::side:
            return 0;
        case GraspApproachClass::diagonal:
            return 1;
        case GraspApproachClass::top_down:
            return 2;
        case GraspApproachClass::upward:
            return -1;
    }
    return -1;
}

bool pitch_feasible(GraspApproachClass current, ReorientDirection d) {
    const int level = verticality(current);
    if (level < 0) {
        return false;
    }
    return d == ReorientDirection::to_horizontal ? level < 2 : level > 0;
}

}  // namespace

SkillOutcome exec_grasp(SceneState& state, std::string_view object, GraspApproachClass approach,
                        const SimOptions& options, const StepObserver& observer) {
    ObjectState& target = require_object(state, object);
    if (const auto held = state.held_object()) {
        throw SimError("already holding \"" + *held + "\"");
    }
    if (approach == GraspApproachClass::upward) {
        throw SimError("upward is not a grasp approach");
    }
    StepRecorder rec(state, observer);
    if (state.gripper.aperture < 1.0) {
        GripperState open = state.gripper;
        open.aperture = 1.0;
        rec.move(open, options.gripper_steps);
    }
    const Vec3 grasp_point = target.position + Vec3{0.0, 0.0, target.height / 2.0};
    rec.move({grasp_point, wrist_for_class(approach), 1.0}, options.steps_per_skill);

    SkillOutcome out;
    if (const GraspRule* rule = rule_for(state, object);
        rule != nullptr && std::find(rule->allowed.begin(), rule->allowed.end(), approach) == rule->allowed.end()) {
        for (const std::string& name : rule->topples) {
            if (auto it = state.objects.find(name); it != state.objects.end() && it->second.toppleable) {
                it->second.orientation = OrientationClass::horizontal;
            }
        }
        out.success = false;
        out.reason = rule->reason;
        out.trajectory = rec.take();
        return out;
    }
    GripperState closed = state.gripper;
    closed.aperture = 0.0;
    rec.move(closed, options.gripper_steps);
    target.held = true;
    target.grasp_offset = target.position - state.gripper.position;
    out.success = true;
    out.reason = "grasped";
    out.trajectory = rec.take();
    return out;
}

SkillOutcome exec_reorient(SceneState& state, std::string_view object, ReorientDirection direction,
                           const SimOptions& options, const StepObserver& observer) {
    ObjectState& obj = require_held(state, object);
    StepRecorder rec(state, observer);
    const Quaternion q = state.gripper.wrist_orientation;
    const GraspApproachClass current = approach_class(q);
    GripperState target = state.gripper;
    std::string how;
    if (pitch_feasible(current, direction)) {
        // Pitch about the world x axis moves the approach one class level.
        const double angle = direction == ReorientDirection::to_horizontal ? -45.0 : 45.0;
        target.wrist_orientation = (Quaternion::from_axis_angle({1, 0, 0}, angle * deg) * q).normalized();
        how = "pitched wrist";
    } else {
        // No class level left in that direction: roll about the approach axis.
        const double angle = direction == ReorientDirection::to_horizontal ? 90.0 : -90.0;
        target.wrist_orientation = (Quaternion::from_axis_angle(approach_vector(q), angle * deg) * q).normalized();
        how = "rolled wrist about the approach axis";
    }
    rec.move(target, options.steps_per_skill);
    obj.orientation =
        direction == ReorientDirection::to_horizontal ? OrientationClass::horizontal : OrientationClass::upright;
    return {true, "reoriented (" + how + ")", rec.take()};
}

SkillOutcome exec_lift(SceneState& state, std::string_view object, const SimOptions& options,
                       const StepObserver& observer) {
    require_held(state, object);
    StepRecorder rec(state, observer);
    GripperState target = state.gripper;
    target.position.z += options.lift_height;
    rec.move(target, options.steps_per_skill);
    return {true, "lifted", rec.take()};
}

SkillOutcome exec_place(SceneState& state, std::string_view object, const SimOptions& options,
                        const StepObserver& observer) {
    ObjectState& obj = require_held(state, object);
    const std::string name(object);
    Vec3 spot = obj.position;
    spot.z = state.table_height;
    // Shift along +y until no other object occupies the footprint.
    for (int attempt = 0; attempt < 16; ++attempt) {
        const bool blocked = std::any_of(state.objects.begin(), state.objects.end(), [&](const auto& kv) {
            if (kv.first == name) {
                return false;
            }
            const double dx = kv.second.position.x - spot.x;
            const double dy = kv.second.position.y - spot.y;
            return std::sqrt(dx * dx + dy * dy) < 0.08;
        });
        if (!blocked) {
            break;
        }
        spot.y += 0.15;
    }
    StepRecorder rec(state, observer);
    GripperState down = state.gripper;
    down.position = spot - obj.grasp_offset;
    rec.move(down, options.steps_per_skill);
    obj.held = false;
    obj.position = spot;
    GripperState open = state.gripper;
    open.aperture = 1.0;
    rec.move(open, options.gripper_steps);
    return {true, "placed", rec.take()};
}

SkillOutcome exec_call(SceneState& state, const SkillCall& call, const SimOptions& options,
                       const StepObserver& observer) {
    switch (call.name) {
        case SkillKind::grasp:
            return exec_grasp(state, call.object, call.approach.value(), options, observer);
        case SkillKind::reorient:
            return exec_reorient(state, call.object, call.direction.value(), options, observer);
        case SkillKind::lift:
            return exec_lift(state, call.object, options, observer);
        case SkillKind::place:
            return exec_place(state, call.object, options, observer);
    }
    throw SimError("unknown skill");
}

// ---------------------------------------------------------------------------
// Synthetic episodes

namespace {

TimeStep jitter(const TimeStep& s, const NoiseConfig& noise, std::mt19937_64& rng) {
    TimeStep out = s;
    if (noise.orientation_deg > 0.0) {
        const Vec3 axis = random_unit(rng);
        const double angle = uniform(rng, 0.0, noise.orientation_deg) * deg;
        out.wrist_orientation = (Quaternion::from_axis_angle(axis, angle) * s.wrist_orientation).normalized();
    }
    if (noise.position_m > 0.0) {
        const Vec3 dir = random_unit(rng);
        const double r = uniform(rng, 0.0, noise.position_m);
        out.ee_position = s.ee_position + r * dir;
    }
    if (noise.aperture > 0.0) {
        out.gripper_aperture = std::clamp(s.gripper_aperture + uniform(rng, -noise.aperture, noise.aperture), 0.0, 1.0);
    }
    return out;
}

std::string modifier_name(const SkillCall& call) {
    if (call.approach) {
        return std::string(to_string(*call.approach));
    }
    return std::string(to_string(*call.direction));
}

}  // namespace

Episode synth_episode(std::string episode_id, std::string_view instruction, const std::vector<SkillCall>& script,
                      std::uint64_t seed, const SynthOptions& options) {
    if (script.empty() || script.front().name != SkillKind::grasp) {
        throw std::invalid_argument("synth_episode: script must start with a grasp");
    }
    const ParsedInstruction parsed = parse_instruction(instruction);
    std::mt19937_64 rng(splitmix64(seed));
    std::vector<ObjectSpec> objects;
    objects.push_back({parsed.object_slot, {uniform(rng, 0.45, 0.60), uniform(rng, -0.15, 0.0), 0.0}});
    if (parsed.secondary_object_slot && *parsed.secondary_object_slot != parsed.object_slot) {
        objects.push_back({*parsed.secondary_object_slot, {uniform(rng, 0.45, 0.60), uniform(rng, 0.12, 0.25), 0.0}});
    }
    SceneState scene = reset(objects, seed);
    scene.scenario = "synth";

    Episode episode;
    episode.episode_id = std::move(episode_id);
    episode.instruction = std::string(instruction);
    episode.steps.push_back(observe(scene));
    std::vector<SkillSegment> truth;

    std::optional<GraspApproachClass> wrist_class;
    for (SkillCall call : script) {
        if (call.object.empty()) {
            call.object = parsed.object_slot;
        }
        validate_call(call);
        const bool holding = scene.held_object().has_value();
        if ((call.name == SkillKind::grasp) == holding) {
            throw std::invalid_argument("synth_episode: invalid script ordering at " +
                                        std::string(to_string(call.name)));
        }
        if (call.name == SkillKind::reorient && !pitch_feasible(*wrist_class, *call.direction)) {
            throw std::invalid_argument("synth_episode: reorientation " + std::string(to_string(*call.direction)) +
                                        " from a " + std::string(to_string(*wrist_class)) +
                                        " grasp does not change the approach class");
        }
        SkillOutcome outcome;
        try {
            outcome = exec_call(scene, call, options.sim);
        } catch (const SimError& e) {
            throw std::invalid_argument(std::string("synth_episode: ") + e.what());
        }
        if (!outcome.success) {
            throw std::invalid_argument("synth_episode: skill failed: " + outcome.reason);
        }
        if (call.name == SkillKind::grasp) {
            wrist_class = *call.approach;
        } else if (call.name == SkillKind::reorient) {
            const int level = verticality(*wrist_class) + (*call.direction == ReorientDirection::to_horizontal ? 1 : -1);
            wrist_class = level == 0 ? GraspApproachClass::side
                          : level == 1 ? GraspApproachClass::diagonal
                                       : GraspApproachClass::top_down;
        }
        const int start = static_cast<int>(episode.steps.size()) - (truth.empty() ? 1 : 0);
        episode.steps.insert(episode.steps.end(), outcome.trajectory.begin(), outcome.trajectory.end());
        const int end = static_cast<int>(episode.steps.size()) - 1;
        std::optional<std::string> modifier;
        if (call.name == SkillKind::grasp || call.name == SkillKind::reorient) {
            modifier = modifier_name(call);
        }
        truth.push_back({episode.episode_id, start, end, call.name, call.object, modifier, render_language(call)});
    }
    while (static_cast<int>(episode.steps.size()) < options.pad_to_steps) {
        TimeStep hold = episode.steps.back();
        hold.index = static_cast<int>(episode.steps.size());
        episode.steps.push_back(hold);
    }
    if (!truth.empty()) {
        truth.back().end_index = static_cast<int>(episode.steps.size()) - 1;
    }
    for (std::size_t i = 0; i < episode.steps.size(); ++i) {
        episode.steps[i] = jitter(episode.steps[i], options.noise, rng);
        episode.steps[i].index = static_cast<int>(i);
    }
    episode.ground_truth_segments = std::move(truth);
    return episode;
}

std::vector<SkillSegment> observable_ground_truth(const std::vector<SkillSegment>& truth) {
    std::vector<SkillSegment> out;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const SkillSegment& s = truth[i];
        const bool followed_by_more = i + 1 < truth.size() && truth[i + 1].kind != SkillKind::grasp;
        if (s.kind == SkillKind::lift && followed_by_more) {
            continue;
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpora

SynthSpec synth_spec_from_json_text(std::string_view text) {
    SynthSpec spec;
    try {
        const json j = json::parse(text);
        for (const json& s : j.at("scripts")) {
            ScriptSpec script;
            script.name = s.value("name", "");
            script.weight = s.value("weight", 1.0);
            script.instruction = s.at("instruction").get<std::string>();
            for (const json& c : s.at("calls")) {
                std::optional<std::string> modifier;
                if (const auto m = c.find("modifier"); m != c.end() && !m->is_null()) {
                    modifier = m->get<std::string>();
                }
                // Placeholder object; synth_episode substitutes the instruction's object.
                SkillCall call = make_call(c.at("skill").get<std::string>(), "_", modifier);
                call.object.clear();
                script.calls.push_back(std::move(call));
            }
            spec.scripts.push_back(std::move(script));
        }
        spec.objects = j.at("objects").get<std::vector<std::string>>();
        if (const auto n = j.find("noise"); n != j.end()) {
            spec.options.noise.orientation_deg = n->value("orientation_deg", 0.0);
            spec.options.noise.position_m = n->value("position_m", 0.0);
            spec.options.noise.aperture = n->value("aperture", 0.0);
        }
        spec.options.sim.steps_per_skill = j.value("steps_per_skill", spec.options.sim.steps_per_skill);
        spec.options.pad_to_steps = j.value("pad_to_steps", 0);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("synth spec: ") + e.what());
    }
    if (spec.scripts.empty() || spec.objects.empty()) {
        throw std::invalid_argument("synth spec: need at least one script and one object");
    }
    return spec;
}

SynthSpec synth_spec_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open synth spec " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return synth_spec_from_json_text(buf.str());
}

std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t count) {
    double total = 0.0;
    for (const double w : weights) {
        if (!(w >= 0.0)) {
            throw std::invalid_argument("apportion: negative weight");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("apportion: weights sum to zero");
    }
    std::vector<std::size_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] / total * static_cast<double>(count);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < count; ++k, ++assigned) {
        ++counts[remainders[k % remainders.size()].second];
    }
    return counts;
}

namespace {

std::string fill_template(std::string text, const std::string& object, const std::string& target) {
    for (const auto& [key, value] : {std::pair<std::string, const std::string&>{"{object}", object},
                                     std::pair<std::string, const std::string&>{"{target}", target}}) {
        for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
            text.replace(pos, key.size(), value);
        }
    }
    return text;
}

struct Assignment {
    std::vector<std::size_t> script_of;  // per episode
};

Assignment assign_scripts(const SynthSpec& spec, std::size_t count, std::uint64_t seed) {
    std::vector<double> weights;
    for (const ScriptSpec& s : spec.scripts) {
        weights.push_back(s.weight);
    }
    const std::vector<std::size_t> counts = apportion(weights, count);
    Assignment a;
    a.script_of.reserve(count);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        a.script_of.insert(a.script_of.end(), counts[i], i);
    }
    std::mt19937_64 rng(splitmix64(seed ^ 0x5eedULL));
    for (std::size_t i = a.script_of.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
        std::swap(a.script_of[i - 1], a.script_of[std::min(j, i - 1)]);
    }
    return a;
}

Episode make_corpus_episode(const SynthSpec& spec, const Assignment& a, std::size_t index, std::uint64_t seed) {
    const std::uint64_t episode_seed = splitmix64(seed * 0x100000001b3ULL + index);
    std::mt19937_64 rng(episode_seed);
    const ScriptSpec& script = spec.scripts[a.script_of[index]];
    const std::size_t n = spec.objects.size();
    const std::size_t oi = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
    std::size_t ti = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
    if (n > 1 && ti == oi) {
        ti = (ti + 1) % n;
    }
    char id[32];
    std::snprintf(id, sizeof(id), "ep%08zu", index);
    return synth_episode(id, fill_template(script.instruction, spec.objects[oi], spec.objects[ti]), script.calls,
                         episode_seed, spec.options);
}

}  // namespace

std::vector<Episode> synth_episodes(const SynthSpec& spec, std::size_t count, std::uint64_t seed, int workers) {
    const Assignment a = assign_scripts(spec, count, seed);
    std::vector<Episode> out(count);
    const auto n = static_cast<std::ptrdiff_t>(count);
#ifdef _OPENMP
    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads)
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = make_corpus_episode(spec, a, static_cast<std::size_t>(i), seed);
    }
    (void)workers;
    return out;
}

void synth_corpus(const SynthSpec& spec, std::size_t count, std::uint64_t seed, std::ostream& sink, int workers) {
    if (count < 1) {
        throw std::invalid_argument("synth_corpus: count must be >= 1");
    }
    const Assignment a = assign_scripts(spec, count, seed);
    constexpr std::size_t chunk = 2048;
    std::vector<std::string> lines;
    for (std::size_t begin = 0; begin < count; begin += chunk) {
        const std::size_t end = std::min(count, begin + chunk);
        lines.assign(end - begin, {});
        const auto n = static_cast<std::ptrdiff_t>(end - begin);
#ifdef _OPENMP
        const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
#endif
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            lines[k] = format_episode_line(make_corpus_episode(spec, a, begin + k, seed));
        }
        for (const std::string& line : lines) {
            sink << line << '\n';
        }
        if (!sink) {
            throw std::ios_base::failure("synth_corpus: write failed");
        }
    }
    (void)workers;
}

}  // namespace steer
