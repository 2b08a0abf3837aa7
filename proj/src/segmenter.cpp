#include "steer/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace steer {

void SegmenterConfig::validate() const {
    if (!(0.0 <= closed_threshold && closed_threshold < open_threshold && open_threshold <= 1.0)) {
        throw std::invalid_argument("segmenter config: need 0 <= closed_threshold < open_threshold <= 1");
    }
    if (reorient_dwell < 1) {
        throw std::invalid_argument("segmenter config: reorient_dwell must be >= 1");
    }
    if (!(lift_height > 0.0)) {
        throw std::invalid_argument("segmenter config: lift_height must be > 0");
    }
    if (smoothing_window < 1) {
        throw std::invalid_argument("segmenter config: smoothing_window must be >= 1");
    }
}

std::string_view to_string(TerminalKind k) {
    switch (k) {
        case TerminalKind::lift:
            return "lift";
        case TerminalKind::place:
            return "place";
        case TerminalKind::none:
            return "none";
    }
    return "none";
}

std::string_view to_string(DiagnosticCode c) {
    switch (c) {
        case DiagnosticCode::no_grasp:
            return "no_grasp";
        case DiagnosticCode::unknown_template:
            return "unknown_template";
        case DiagnosticCode::unlabeled_grasp_mode:
            return "unlabeled_grasp_mode";
        case DiagnosticCode::empty_slot:
            return "empty_slot";
        case DiagnosticCode::malformed_record:
            return "malformed_record";
    }
    return "no_grasp";
}

DiagnosticCode diagnostic_code_from_string(std::string_view name) {
    for (const auto c : {DiagnosticCode::no_grasp, DiagnosticCode::unknown_template,
                         DiagnosticCode::unlabeled_grasp_mode, DiagnosticCode::empty_slot,
                         DiagnosticCode::malformed_record}) {
        if (to_string(c) == name) {
            return c;
        }
    }
    throw std::invalid_argument("unknown diagnostic code: " + std::string(name));
}

std::vector<double> smoothed_aperture(const Episode& episode, int window) {
    std::vector<double> raw;
    raw.reserve(episode.steps.size());
    for (const TimeStep& s : episode.steps) {
        raw.push_back(s.gripper_aperture);
    }
    if (window <= 1) {
        return raw;
    }
    const auto n = static_cast<std::ptrdiff_t>(raw.size());
    const std::ptrdiff_t before = (window - 1) / 2;
    const std::ptrdiff_t after = window / 2;
    std::vector<double> out(raw.size());
    std::vector<double> buf;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - before);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + after);
        buf.assign(raw.begin() + lo, raw.begin() + hi + 1);
        const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
        std::nth_element(buf.begin(), mid, buf.end());
        double m = *mid;
        if (buf.size() % 2 == 0) {
            m = 0.5 * (m + *std::max_element(buf.begin(), mid));
        }
        out[static_cast<std::size_t>(i)] = m;
    }
    return out;
}

namespace {

struct Chain {
    GraspEvent grasp;
    std::optional<int> release;
    std::vector<ReorientEvent> reorients;
};

struct Transitions {
    std::vector<GraspEvent> grasps;
    std::vector<std::optional<int>> releases;
};

const Anchor& anchor_at(const Episode& e, int step) {
    return nearest_anchor(approach_vector(e.steps[static_cast<std::size_t>(step)].wrist_orientation),
                          default_anchors());
}

Transitions scan_gripper(const Episode& e, const std::vector<double>& aperture, const SegmenterConfig& c) {
    Transitions out;
    bool armed = false;
    bool holding = false;
    for (std::size_t i = 0; i < aperture.size(); ++i) {
        const double a = aperture[i];
        const int step = static_cast<int>(i);
        if (holding) {
            if (a >= c.open_threshold) {
                out.releases.back() = step;
                holding = false;
                armed = true;
            }
            continue;
        }
        if (a >= c.open_threshold) {
            armed = true;
        } else if (armed && a <= c.closed_threshold) {
            const Anchor& anchor = anchor_at(e, step);
            out.grasps.push_back({step, anchor.semantic_class, anchor.id});
            out.releases.emplace_back();
            holding = true;
            armed = false;
        }
    }
    return out;
}

std::vector<ReorientEvent> track_chain(const Episode& e, const std::vector<double>& aperture, const GraspEvent& g,
                                       const SegmenterConfig& c) {
    std::vector<ReorientEvent> events;
    const Anchor* stable = &anchor_at(e, g.step_index);
    int boundary = g.step_index;
    const Anchor* candidate = nullptr;
    int candidate_start = 0;
    int run = 0;
    for (int t = g.step_index + 1; t < static_cast<int>(aperture.size()); ++t) {
        if (aperture[static_cast<std::size_t>(t)] > c.closed_threshold) {
            break;
        }
        const Anchor& a = anchor_at(e, t);
        if (a.semantic_class == stable->semantic_class) {
            candidate = nullptr;
            run = 0;
            continue;
        }
        if (candidate != nullptr && candidate->semantic_class == a.semantic_class) {
            ++run;
        } else {
            candidate = &a;
            candidate_start = t;
            run = 1;
        }
        if (run >= c.reorient_dwell) {
            const bool more_vertical = std::abs(candidate->direction.z) > std::abs(stable->direction.z);
            events.push_back({boundary + 1, candidate_start, stable->semantic_class, candidate->semantic_class,
                              more_vertical ? ReorientDirection::to_horizontal : ReorientDirection::to_upright});
            boundary = candidate_start;
            stable = candidate;
            candidate = nullptr;
            run = 0;
        }
    }
    return events;
}

std::vector<Chain> analyze(const Episode& e, const std::vector<double>& aperture, const SegmenterConfig& c) {
    Transitions tr = scan_gripper(e, aperture, c);
    std::vector<Chain> chains;
    for (std::size_t i = 0; i < tr.grasps.size(); ++i) {
        chains.push_back({tr.grasps[i], tr.releases[i], track_chain(e, aperture, tr.grasps[i], c)});
    }
    return chains;
}

TerminalKind terminal_of(const Episode& e, const std::vector<double>& aperture, const Chain& last,
                         const SegmenterConfig& c) {
    if (last.release) {
        return TerminalKind::place;
    }
    const int boundary = last.reorients.empty() ? last.grasp.step_index : last.reorients.back().end_step;
    const double z_final = e.steps.back().ee_position.z;
    const double z_boundary = e.steps[static_cast<std::size_t>(boundary)].ee_position.z;
    if (aperture.back() <= c.closed_threshold && z_final - z_boundary >= c.lift_height) {
        return TerminalKind::lift;
    }
    return TerminalKind::none;
}

}  // namespace

std::vector<GraspEvent> detect_grasp_events(const Episode& episode, const SegmenterConfig& config) {
    config.validate();
    return scan_gripper(episode, smoothed_aperture(episode, config.smoothing_window), config).grasps;
}

std::vector<std::optional<int>> detect_releases(const Episode& episode, const std::vector<GraspEvent>& grasps,
                                                const SegmenterConfig& config) {
    config.validate();
    const std::vector<double> aperture = smoothed_aperture(episode, config.smoothing_window);
    std::vector<std::optional<int>> out;
    for (const GraspEvent& g : grasps) {
        std::optional<int> release;
        for (std::size_t t = static_cast<std::size_t>(g.step_index) + 1; t < aperture.size(); ++t) {
            if (aperture[t] >= config.open_threshold) {
                release = static_cast<int>(t);
                break;
            }
        }
        out.push_back(release);
    }
    return out;
}

std::vector<ReorientEvent> detect_reorientations(const Episode& episode, const std::vector<GraspEvent>& grasps,
                                                 const SegmenterConfig& config) {
    config.validate();
    const std::vector<double> aperture = smoothed_aperture(episode, config.smoothing_window);
    std::vector<ReorientEvent> out;
    for (const GraspEvent& g : grasps) {
        auto events = track_chain(episode, aperture, g, config);
        out.insert(out.end(), events.begin(), events.end());
    }
    return out;
}

TerminalKind detect_terminal(const Episode& episode, const std::vector<GraspEvent>& grasps,
                             const SegmenterConfig& config) {
    config.validate();
    if (grasps.empty()) {
        return TerminalKind::none;
    }
    const std::vector<double> aperture = smoothed_aperture(episode, config.smoothing_window);
    Chain last{grasps.back(), std::nullopt, track_chain(episode, aperture, grasps.back(), config)};
    last.release = detect_releases(episode, {grasps.back()}, config).front();
    return terminal_of(episode, aperture, last, config);
}

SegmentationResult segment_episode(const Episode& episode, const ParsedInstruction& parsed,
                                   const SegmenterConfig& config) {
    config.validate();
    SegmentationResult result;
    const std::vector<double> aperture = smoothed_aperture(episode, config.smoothing_window);
    const std::vector<Chain> chains = analyze(episode, aperture, config);
    if (chains.empty()) {
        result.diagnostic = Diagnostic{episode.episode_id, DiagnosticCode::no_grasp, "gripper never closed after opening"};
        return result;
    }
    const std::string& object = parsed.object_slot;
    const int last_step = static_cast<int>(episode.steps.size()) - 1;
    const auto emit = [&](int start, int end, SkillKind kind, std::optional<std::string> modifier, std::string text) {
        result.segments.push_back({episode.episode_id, start, end, kind, object, std::move(modifier), std::move(text)});
    };

    int boundary = -1;
    for (std::size_t i = 0; i < chains.size(); ++i) {
        const Chain& chain = chains[i];
        const bool last_chain = i + 1 == chains.size();
        if (chain.grasp.approach == GraspApproachClass::upward) {
            result.segments.clear();
            result.diagnostic = Diagnostic{episode.episode_id, DiagnosticCode::unlabeled_grasp_mode,
                                           "grasp at step " + std::to_string(chain.grasp.step_index) +
                                               " approaches from below"};
            return result;
        }
        emit(boundary + 1, chain.grasp.step_index, SkillKind::grasp, std::string(to_string(chain.grasp.approach)),
             render_grasp(object, chain.grasp.approach));
        boundary = chain.grasp.step_index;
        for (const ReorientEvent& r : chain.reorients) {
            emit(boundary + 1, r.end_step, SkillKind::reorient, std::string(to_string(r.direction)),
                 render_reorient(object, r.direction));
            boundary = r.end_step;
        }
        if (chain.release) {
            const int end = last_chain ? last_step : *chain.release;
            emit(boundary + 1, end, SkillKind::place, std::nullopt, render_place(object));
            boundary = end;
        } else if (last_chain && terminal_of(episode, aperture, chain, config) == TerminalKind::lift) {
            emit(boundary + 1, last_step, SkillKind::lift, std::nullopt, render_lift(object));
            boundary = last_step;
        }
    }
    return result;
}

SegmentationResult relabel_episode(const Episode& episode, const SegmenterConfig& config) {
    try {
        return segment_episode(episode, parse_instruction(episode.instruction), config);
    } catch (const InstructionError& e) {
        SegmentationResult result;
        result.diagnostic = Diagnostic{episode.episode_id,
                                       e.code() == InstructionError::Code::unknown_template
                                           ? DiagnosticCode::unknown_template
                                           : DiagnosticCode::empty_slot,
                                       e.what()};
        return result;
    }
}

}  // namespace steer
