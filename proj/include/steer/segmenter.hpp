#pragma once

// Relabeling of a demonstration into grasp / reorient / lift / place
// sub-trajectories from proprioception alone.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steer/geometry.hpp"
#include "steer/instruction.hpp"
#include "steer/language.hpp"
#include "steer/trajectory.hpp"

namespace steer {

struct SegmenterConfig {
    double open_threshold = 0.95;
    double closed_threshold = 0.05;
    int reorient_dwell = 3;
    double lift_height = 0.05;  // meters
    int smoothing_window = 1;   // 1 = off

    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

struct GraspEvent {
    int step_index = 0;
    GraspApproachClass approach = GraspApproachClass::side;
    int anchor_id = 0;
};

struct ReorientEvent {
    int start_step = 0;  // first closed step after the previous boundary
    int end_step = 0;    // first step of the sustained new class
    GraspApproachClass from_class = GraspApproachClass::side;
    GraspApproachClass to_class = GraspApproachClass::side;
    ReorientDirection direction = ReorientDirection::to_horizontal;
};

enum class TerminalKind { lift, place, none };

std::string_view to_string(TerminalKind k);

enum class DiagnosticCode { no_grasp, unknown_template, unlabeled_grasp_mode, empty_slot, malformed_record };

std::string_view to_string(DiagnosticCode c);
DiagnosticCode diagnostic_code_from_string(std::string_view name);

struct Diagnostic {
    std::string episode_id;
    DiagnosticCode code = DiagnosticCode::no_grasp;
    std::string detail;

    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// Centered running median of the gripper aperture (window truncated at the ends).
std::vector<double> smoothed_aperture(const Episode& episode, int window);

/// One event per open -> closed transition with hysteresis: the aperture must
/// reach open_threshold before a step at/below closed_threshold counts.
std::vector<GraspEvent> detect_grasp_events(const Episode& episode, const SegmenterConfig& config = {});

/// First step at/above open_threshold after each grasp, if the gripper reopens.
std::vector<std::optional<int>> detect_releases(const Episode& episode, const std::vector<GraspEvent>& grasps,
                                                const SegmenterConfig& config = {});

/// Sustained wrist-class changes while the gripper stays closed after each grasp.
std::vector<ReorientEvent> detect_reorientations(const Episode& episode, const std::vector<GraspEvent>& grasps,
                                                 const SegmenterConfig& config = {});

TerminalKind detect_terminal(const Episode& episode, const std::vector<GraspEvent>& grasps,
                             const SegmenterConfig& config = {});

struct SegmentationResult {
    std::vector<SkillSegment> segments;
    std::optional<Diagnostic> diagnostic;
};

/// Partitions the episode into relabeled segments in temporal order.
SegmentationResult segment_episode(const Episode& episode, const ParsedInstruction& parsed,
                                   const SegmenterConfig& config = {});

/// Parses the episode's own instruction, then segments. Template failures
/// become diagnostics.
SegmentationResult relabel_episode(const Episode& episode, const SegmenterConfig& config = {});

}  // namespace steer
