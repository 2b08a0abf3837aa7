#pragma once

// Deterministic kinematic tabletop world. Skill controllers produce
// interpolated wrist trajectories; failure modes are per-scenario rules.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "steer/geometry.hpp"
#include "steer/skill.hpp"
#include "steer/trajectory.hpp"

namespace steer {

enum class OrientationClass { upright, horizontal };

std::string_view to_string(OrientationClass c);
OrientationClass orientation_class_from_string(std::string_view name);

struct GripperState {
    Vec3 position;
    Quaternion wrist_orientation;
    double aperture = 1.0;

    friend bool operator==(const GripperState&, const GripperState&) = default;
};

struct ObjectState {
    Vec3 position;  // base center, meters
    OrientationClass orientation = OrientationClass::upright;
    bool held = false;
    bool toppleable = true;
    double height = 0.10;
    Vec3 grasp_offset;  // object position minus gripper position while held

    friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

/// Which approaches succeed on an object; anything else fails with `reason`
/// and knocks over the objects in `topples`.
struct GraspRule {
    std::string object;
    std::vector<GraspApproachClass> allowed;
    std::string reason;
    std::vector<std::string> topples;
    std::string hint;

    friend bool operator==(const GraspRule&, const GraspRule&) = default;
};

struct SceneState {
    std::string scenario;
    std::uint64_t seed = 0;
    int step = 0;
    double table_height = 0.0;
    GripperState gripper;
    std::map<std::string, ObjectState> objects;
    std::vector<GraspRule> rules;

    std::optional<std::string> held_object() const;

    friend bool operator==(const SceneState&, const SceneState&) = default;
};

struct SkillOutcome {
    bool success = false;
    std::string reason;
    std::vector<TimeStep> trajectory;
};

/// Precondition violations (unknown object, nothing held, ...). The scene is
/// left untouched when one is thrown.
class SimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimOptions {
    int steps_per_skill = 20;
    int gripper_steps = 4;
    double lift_height = 0.10;
};

/// Called after every simulated step with the scene at that step.
using StepObserver = std::function<void(const SceneState&)>;

struct ObjectSpec {
    std::string name;
    Vec3 position;
    OrientationClass orientation = OrientationClass::upright;
    bool toppleable = true;
    double height = 0.10;
    bool held = false;
};

struct ScenarioDefinition {
    std::string name;
    std::string description;
    std::vector<ObjectSpec> objects;
    std::vector<GraspRule> rules;
    double position_jitter = 0.02;  // seeded xy jitter per object, meters
};

class ScenarioLibrary {
public:
    /// single_cup, potted_plant, kettle, clutter, stacked.
    static const ScenarioLibrary& builtin();
    /// Parses a scenario file ({"scenarios": [...]}); throws std::invalid_argument.
    static ScenarioLibrary from_json_text(std::string_view text);
    static ScenarioLibrary from_file(const std::string& path);

    void add(ScenarioDefinition def);
    const ScenarioDefinition* find(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, ScenarioDefinition, std::less<>> scenarios_;
};

/// The text of the built-in scenario file.
std::string_view builtin_scenarios_json();

inline constexpr Vec3 home_position{0.30, 0.0, 0.35};

/// Wrist orientation whose approach vector is the canonical direction of `c`
/// in the y-z plane: side (0,1,0), diagonal (0,1,-1)/sqrt2, top_down (0,0,-1).
Quaternion wrist_for_class(GraspApproachClass c);

SceneState reset(std::string_view scenario, std::uint64_t seed, const ScenarioLibrary& library = ScenarioLibrary::builtin());
/// Scene from an explicit object list; throws SimError if more than one object is held.
SceneState reset(const std::vector<ObjectSpec>& objects, std::uint64_t seed, std::vector<GraspRule> rules = {});

SkillOutcome exec_grasp(SceneState& state, std::string_view object, GraspApproachClass approach,
                        const SimOptions& options = {}, const StepObserver& observer = {});
SkillOutcome exec_reorient(SceneState& state, std::string_view object, ReorientDirection direction,
                           const SimOptions& options = {}, const StepObserver& observer = {});
SkillOutcome exec_lift(SceneState& state, std::string_view object, const SimOptions& options = {},
                       const StepObserver& observer = {});
SkillOutcome exec_place(SceneState& state, std::string_view object, const SimOptions& options = {},
                        const StepObserver& observer = {});
SkillOutcome exec_call(SceneState& state, const SkillCall& call, const SimOptions& options = {},
                       const StepObserver& observer = {});

/// Current proprioceptive reading as a TimeStep.
TimeStep observe(const SceneState& state);

struct NoiseConfig {
    double orientation_deg = 0.0;  // max rotation angle about a random axis
    double position_m = 0.0;       // max position offset (ball radius)
    double aperture = 0.0;         // max absolute aperture offset
};

struct SynthOptions {
    SimOptions sim;
    NoiseConfig noise;
    int pad_to_steps = 0;  // hold the final pose until the episode has this many steps
};

/// Runs `script` in a fresh single-object scene built from the instruction and
/// records the trajectory plus per-call ground truth. Calls with an empty
/// object use the instruction's object. Throws std::invalid_argument for
/// scripts that do not start with a grasp, violate skill ordering, or contain
/// a reorientation the wrist cannot express as an approach-class change.
Episode synth_episode(std::string episode_id, std::string_view instruction, const std::vector<SkillCall>& script,
                      std::uint64_t seed, const SynthOptions& options = {});

/// The (kind, modifier) sequence a proprioceptive relabeler can observe:
/// lifts followed by further skills leave no gripper or wrist-class trace and
/// are dropped.
std::vector<SkillSegment> observable_ground_truth(const std::vector<SkillSegment>& truth);

struct ScriptSpec {
    std::string name;
    double weight = 1.0;
    std::string instruction;  // "{object}" and "{target}" placeholders
    std::vector<SkillCall> calls;
};

struct SynthSpec {
    std::vector<ScriptSpec> scripts;
    std::vector<std::string> objects;
    SynthOptions options;
};

SynthSpec synth_spec_from_json_text(std::string_view text);
SynthSpec synth_spec_from_file(const std::string& path);

/// Exact per-script counts (largest remainder of weight * count).
std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t count);

/// Deterministic corpus for (spec, seed), written in the Episode wire format.
void synth_corpus(const SynthSpec& spec, std::size_t count, std::uint64_t seed, std::ostream& sink, int workers = 0);
/// Same episodes in memory.
std::vector<Episode> synth_episodes(const SynthSpec& spec, std::size_t count, std::uint64_t seed, int workers = 0);

}  // namespace steer
