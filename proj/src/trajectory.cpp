#include "steer/trajectory.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>
#include <rapidjson/document.h>
#include <rapidjson/error/en.h>

namespace steer {

using nlohmann::json;

std::string_view to_string(SkillKind k) {
    switch (k) {
        case SkillKind::grasp:
            return "grasp";
        case SkillKind::reorient:
            return "reorient";
        case SkillKind::lift:
            return "lift";
        case SkillKind::place:
            return "place";
    }
    return "grasp";
}

SkillKind skill_kind_from_string(std::string_view name) {
    for (const auto k : {SkillKind::grasp, SkillKind::reorient, SkillKind::lift, SkillKind::place}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument("unknown skill kind: " + std::string(name));
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, end);
}

void append_int(std::string& out, long long v) {
    char buf[24];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, end);
}

void append_string(std::string& out, const std::string& s) { out += json(s).dump(); }

void append_segment(std::string& out, const SkillSegment& s) {
    out += "{\"episode_id\":";
    append_string(out, s.episode_id);
    out += ",\"start\":";
    append_int(out, s.start_index);
    out += ",\"end\":";
    append_int(out, s.end_index);
    out += ",\"kind\":\"";
    out += to_string(s.kind);
    out += "\",\"object\":";
    append_string(out, s.object_slot);
    out += ",\"modifier\":";
    if (s.modifier) {
        append_string(out, *s.modifier);
    } else {
        out += "null";
    }
    out += ",\"instruction\":";
    append_string(out, s.rendered_instruction);
    out += '}';
}

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

template <typename T>
T require(const json& j, const char* key, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw RecordError(line, std::string("missing field \"") + key + "\"");
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw RecordError(line, std::string("bad type for field \"") + key + "\"");
    }
}

SkillSegment segment_from_json(const json& j, std::size_t line) {
    if (!j.is_object()) {
        throw RecordError(line, "segment record is not an object");
    }
    SkillSegment s;
    s.episode_id = require<std::string>(j, "episode_id", line);
    s.start_index = require<int>(j, "start", line);
    s.end_index = require<int>(j, "end", line);
    try {
        s.kind = skill_kind_from_string(require<std::string>(j, "kind", line));
    } catch (const std::invalid_argument& e) {
        throw RecordError(line, e.what());
    }
    s.object_slot = require<std::string>(j, "object", line);
    if (const auto it = j.find("modifier"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw RecordError(line, "bad type for field \"modifier\"");
        }
        s.modifier = it->get<std::string>();
    }
    s.rendered_instruction = require<std::string>(j, "instruction", line);
    return s;
}

}  // namespace

void validate_segment(const SkillSegment& s, std::size_t episode_length, std::size_t line) {
    if (s.start_index < 0 || s.start_index > s.end_index ||
        static_cast<std::size_t>(s.end_index) >= episode_length) {
        throw RecordError(line, "segment span out of range");
    }
}

void validate_episode(const Episode& e, std::size_t line) {
    if (e.steps.size() < 2) {
        throw RecordError(line, "episode has fewer than 2 steps");
    }
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        const TimeStep& s = e.steps[i];
        if (s.index != static_cast<int>(i)) {
            throw RecordError(line, "step indices are not contiguous from 0");
        }
        if (!finite(s.ee_position)) {
            throw RecordError(line, "non-finite position");
        }
        if (!(s.gripper_aperture >= 0.0 && s.gripper_aperture <= 1.0)) {
            throw RecordError(line, "aperture out of range");
        }
        if (!(std::abs(s.wrist_orientation.norm() - 1.0) <= 1e-6)) {
            throw RecordError(line, "degenerate orientation");
        }
    }
    if (e.ground_truth_segments) {
        int previous_end = -1;
        for (const SkillSegment& seg : *e.ground_truth_segments) {
            validate_segment(seg, e.steps.size(), line);
            if (seg.start_index <= previous_end) {
                throw RecordError(line, "ground-truth segments overlap or are unordered");
            }
            previous_end = seg.end_index;
        }
    }
}

namespace {

// Episode lines are the bulk of a corpus, so they go through RapidJSON's DOM;
// full-precision number parsing keeps values identical to the writer's.
using RValue = rapidjson::Value;

const RValue& member(const RValue& obj, const char* key, std::size_t line) {
    const auto it = obj.FindMember(key);
    if (it == obj.MemberEnd()) {
        throw RecordError(line, std::string("missing field \"") + key + "\"");
    }
    return it->value;
}

[[noreturn]] void bad_type(const char* key, std::size_t line) {
    throw RecordError(line, std::string("bad type for field \"") + key + "\"");
}

std::string string_field(const RValue& obj, const char* key, std::size_t line) {
    const RValue& v = member(obj, key, line);
    if (!v.IsString()) {
        bad_type(key, line);
    }
    return {v.GetString(), v.GetStringLength()};
}

int int_field(const RValue& obj, const char* key, std::size_t line) {
    const RValue& v = member(obj, key, line);
    if (!v.IsInt()) {
        bad_type(key, line);
    }
    return v.GetInt();
}

double double_field(const RValue& obj, const char* key, std::size_t line) {
    const RValue& v = member(obj, key, line);
    if (!v.IsNumber()) {
        bad_type(key, line);
    }
    return v.GetDouble();
}

template <std::size_t N>
std::array<double, N> vector_field(const RValue& obj, const char* key, std::size_t line, const char* shape_error) {
    const RValue& v = member(obj, key, line);
    if (!v.IsArray()) {
        bad_type(key, line);
    }
    for (const RValue& x : v.GetArray()) {
        if (!x.IsNumber()) {
            bad_type(key, line);
        }
    }
    if (v.Size() != N) {
        throw RecordError(line, shape_error);
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = v[static_cast<rapidjson::SizeType>(i)].GetDouble();
    }
    return out;
}

SkillSegment segment_from_value(const RValue& v, std::size_t line) {
    if (!v.IsObject()) {
        throw RecordError(line, "segment record is not an object");
    }
    SkillSegment s;
    s.episode_id = string_field(v, "episode_id", line);
    s.start_index = int_field(v, "start", line);
    s.end_index = int_field(v, "end", line);
    try {
        s.kind = skill_kind_from_string(string_field(v, "kind", line));
    } catch (const std::invalid_argument& e) {
        throw RecordError(line, e.what());
    }
    s.object_slot = string_field(v, "object", line);
    if (const auto it = v.FindMember("modifier"); it != v.MemberEnd() && !it->value.IsNull()) {
        if (!it->value.IsString()) {
            bad_type("modifier", line);
        }
        s.modifier = std::string(it->value.GetString(), it->value.GetStringLength());
    }
    s.rendered_instruction = string_field(v, "instruction", line);
    return s;
}

}  // namespace

Episode parse_episode_line(std::string_view text, std::size_t line) {
    rapidjson::Document j;
    j.Parse<rapidjson::kParseFullPrecisionFlag>(text.data(), text.size());
    if (j.HasParseError()) {
        throw RecordError(line, std::string("malformed record: ") + rapidjson::GetParseError_En(j.GetParseError()) +
                                    " at offset " + std::to_string(j.GetErrorOffset()));
    }
    if (!j.IsObject()) {
        throw RecordError(line, "record is not an object");
    }
    Episode e;
    e.episode_id = string_field(j, "episode_id", line);
    e.instruction = string_field(j, "instruction", line);
    const auto steps = j.FindMember("steps");
    if (steps == j.MemberEnd() || !steps->value.IsArray()) {
        throw RecordError(line, "missing field \"steps\"");
    }
    e.steps.reserve(steps->value.Size());
    for (const RValue& s : steps->value.GetArray()) {
        if (!s.IsObject()) {
            throw RecordError(line, "step is not an object");
        }
        TimeStep t;
        t.index = int_field(s, "t", line);
        const auto pos = vector_field<3>(s, "ee_pos", line, "ee_pos must have 3 components");
        t.ee_position = {pos[0], pos[1], pos[2]};
        const auto quat = vector_field<4>(s, "wrist_quat", line, "wrist_quat must have 4 components");
        Quaternion q{quat[0], quat[1], quat[2], quat[3]};
        const double n = q.norm();
        if (!std::isfinite(n) || std::abs(n - 1.0) > quaternion_ingest_tolerance) {
            throw RecordError(line, "degenerate orientation");
        }
        if (std::abs(n - 1.0) > 1e-9) {
            q = q.normalized();
        }
        t.wrist_orientation = q;
        t.gripper_aperture = double_field(s, "gripper", line);
        e.steps.push_back(t);
    }
    if (const auto gt = j.FindMember("ground_truth_segments"); gt != j.MemberEnd() && !gt->value.IsNull()) {
        if (!gt->value.IsArray()) {
            throw RecordError(line, "ground_truth_segments must be an array");
        }
        std::vector<SkillSegment> segments;
        for (const RValue& s : gt->value.GetArray()) {
            segments.push_back(segment_from_value(s, line));
        }
        e.ground_truth_segments = std::move(segments);
    }
    validate_episode(e, line);
    return e;
}

std::string format_episode_line(const Episode& e) {
    std::string out;
    out.reserve(64 + e.steps.size() * 96);
    out += "{\"episode_id\":";
    append_string(out, e.episode_id);
    out += ",\"instruction\":";
    append_string(out, e.instruction);
    out += ",\"steps\":[";
    for (std::size_t i = 0; i < e.steps.size(); ++i) {
        const TimeStep& s = e.steps[i];
        if (i > 0) {
            out += ',';
        }
        out += "{\"t\":";
        append_int(out, s.index);
        out += ",\"ee_pos\":[";
        append_double(out, s.ee_position.x);
        out += ',';
        append_double(out, s.ee_position.y);
        out += ',';
        append_double(out, s.ee_position.z);
        out += "],\"wrist_quat\":[";
        append_double(out, s.wrist_orientation.w);
        out += ',';
        append_double(out, s.wrist_orientation.x);
        out += ',';
        append_double(out, s.wrist_orientation.y);
        out += ',';
        append_double(out, s.wrist_orientation.z);
        out += "],\"gripper\":";
        append_double(out, s.gripper_aperture);
        out += '}';
    }
    out += ']';
    if (e.ground_truth_segments) {
        out += ",\"ground_truth_segments\":[";
        for (std::size_t i = 0; i < e.ground_truth_segments->size(); ++i) {
            if (i > 0) {
                out += ',';
            }
            append_segment(out, (*e.ground_truth_segments)[i]);
        }
        out += ']';
    }
    out += '}';
    return out;
}

SkillSegment parse_segment_line(std::string_view text, std::size_t line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw RecordError(line, std::string("malformed record: ") + e.what());
    }
    SkillSegment s = segment_from_json(j, line);
    if (s.start_index < 0 || s.start_index > s.end_index) {
        throw RecordError(line, "segment span out of range");
    }
    return s;
}

std::string format_segment_line(const SkillSegment& segment) {
    std::string out;
    append_segment(out, segment);
    return out;
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

EpisodeReadResult read_episodes(std::istream& source) {
    EpisodeReadResult result;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(source, line)) {
        ++line_number;
        if (blank(line)) {
            continue;
        }
        try {
            result.episodes.push_back(parse_episode_line(line, line_number));
        } catch (const RecordError& e) {
            result.errors.push_back(e);
        }
    }
    return result;
}

void write_episodes(const std::vector<Episode>& episodes, std::ostream& sink) {
    for (const Episode& e : episodes) {
        sink << format_episode_line(e) << '\n';
    }
    if (!sink) {
        throw std::ios_base::failure("write_episodes: sink write failed");
    }
}

SegmentReadResult read_segments(std::istream& source) {
    SegmentReadResult result;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(source, line)) {
        ++line_number;
        if (blank(line)) {
            continue;
        }
        try {
            result.segments.push_back(parse_segment_line(line, line_number));
        } catch (const RecordError& e) {
            result.errors.push_back(e);
        }
    }
    return result;
}

void write_segments(const std::vector<SkillSegment>& segments, std::ostream& sink) {
    for (const SkillSegment& s : segments) {
        sink << format_segment_line(s) << '\n';
    }
    if (!sink) {
        throw std::ios_base::failure("write_segments: sink write failed");
    }
}

}  // namespace steer
