#pragma once

// Demonstration data model and the line-delimited wire formats for episodes
// and relabeled segments.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "steer/math.hpp"

namespace steer {

struct TimeStep {
    int index = 0;
    Vec3 ee_position;
    Quaternion wrist_orientation;
    double gripper_aperture = 1.0;  // 0 = fully closed, 1 = fully open

    friend bool operator==(const TimeStep&, const TimeStep&) = default;
};

enum class SkillKind { grasp, reorient, lift, place };

std::string_view to_string(SkillKind k);
SkillKind skill_kind_from_string(std::string_view name);

struct SkillSegment {
    std::string episode_id;
    int start_index = 0;
    int end_index = 0;  // inclusive
    SkillKind kind = SkillKind::grasp;
    std::string object_slot;
    std::optional<std::string> modifier;
    std::string rendered_instruction;

    friend bool operator==(const SkillSegment&, const SkillSegment&) = default;
};

struct Episode {
    std::string episode_id;
    std::string instruction;
    std::vector<TimeStep> steps;
    std::optional<std::vector<SkillSegment>> ground_truth_segments;

    friend bool operator==(const Episode&, const Episode&) = default;
};

/// A record that failed to parse or validate. `line` is 1-based.
class RecordError : public std::runtime_error {
public:
    RecordError(std::size_t line, std::string reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line),
          reason_(std::move(reason)) {}

    std::size_t line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

/// Quaternions whose norm is within this band of 1 are renormalized on ingest.
inline constexpr double quaternion_ingest_tolerance = 1e-3;

/// Checks the Episode invariants; throws RecordError(line, reason).
void validate_episode(const Episode& episode, std::size_t line = 0);
/// Checks a segment against an episode of `episode_length` steps.
void validate_segment(const SkillSegment& segment, std::size_t episode_length, std::size_t line = 0);

/// Parses and validates one Episode record. Throws RecordError.
Episode parse_episode_line(std::string_view line, std::size_t line_number);
std::string format_episode_line(const Episode& episode);

SkillSegment parse_segment_line(std::string_view line, std::size_t line_number);
std::string format_segment_line(const SkillSegment& segment);

struct EpisodeReadResult {
    std::vector<Episode> episodes;
    std::vector<RecordError> errors;
};

/// Reads line-delimited Episode records. Blank lines are skipped; bad records
/// are reported per line and do not stop the read.
EpisodeReadResult read_episodes(std::istream& source);
void write_episodes(const std::vector<Episode>& episodes, std::ostream& sink);

struct SegmentReadResult {
    std::vector<SkillSegment> segments;
    std::vector<RecordError> errors;
};

SegmentReadResult read_segments(std::istream& source);
/// One record per line. Throws std::ios_base::failure if the sink goes bad.
void write_segments(const std::vector<SkillSegment>& segments, std::ostream& sink);

}  // namespace steer
