#include "steer/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace steer {

CorpusReport::CorpusReport() {
    for (const auto k : {SkillKind::grasp, SkillKind::reorient, SkillKind::lift, SkillKind::place}) {
        per_kind[std::string(to_string(k))] = 0;
    }
    for (const auto c : all_approach_classes) {
        per_class[std::string(to_string(c))] = 0;
    }
}

bool CorpusReport::same_counts(const CorpusReport& o) const {
    return episodes_segmented == o.episodes_segmented && segments_out == o.segments_out && per_kind == o.per_kind &&
           per_class == o.per_class;
}

nlohmann::ordered_json report_to_json(const CorpusReport& r) {
    nlohmann::ordered_json j;
    j["episodes_in"] = r.episodes_in;
    j["episodes_segmented"] = r.episodes_segmented;
    j["segments_out"] = r.segments_out;
    j["per_kind"] = r.per_kind;
    j["per_class"] = r.per_class;
    auto diags = nlohmann::ordered_json::array();
    for (const Diagnostic& d : r.diagnostics) {
        diags.push_back({{"episode_id", d.episode_id}, {"code", to_string(d.code)}, {"detail", d.detail}});
    }
    j["diagnostics"] = std::move(diags);
    j["wall_time"] = r.wall_time;
    return j;
}

namespace {

struct EpisodeResult {
    std::string lines;  // formatted segment records, newline-terminated
    std::vector<SkillSegment> segments;
    std::optional<Diagnostic> diagnostic;
};

EpisodeResult process_line(const std::string& line, std::size_t line_number, const SegmenterConfig& config) {
    EpisodeResult r;
    try {
        const Episode episode = parse_episode_line(line, line_number);
        SegmentationResult seg = relabel_episode(episode, config);
        for (const SkillSegment& s : seg.segments) {
            r.lines += format_segment_line(s);
            r.lines += '\n';
        }
        r.segments = std::move(seg.segments);
        r.diagnostic = std::move(seg.diagnostic);
    } catch (const RecordError& e) {
        r.diagnostic = Diagnostic{"", DiagnosticCode::malformed_record, e.what()};
    }
    return r;
}

void accumulate(CorpusReport& report, EpisodeResult& r) {
    ++report.episodes_in;
    if (!r.segments.empty()) {
        ++report.episodes_segmented;
    }
    for (const SkillSegment& s : r.segments) {
        ++report.segments_out;
        ++report.per_kind[std::string(to_string(s.kind))];
        if (s.kind == SkillKind::grasp && s.modifier) {
            ++report.per_class[*s.modifier];
        }
    }
    if (r.diagnostic) {
        report.diagnostics.push_back(std::move(*r.diagnostic));
    }
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

void check_sink(const std::ostream& out) {
    if (!out) {
        throw PipelineError("annotate: output write failed");
    }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

CorpusReport annotate_stream(std::istream& input, std::ostream& output, const SegmenterConfig& config, int workers) {
    config.validate();
    if (workers < 0) {
        throw std::invalid_argument("annotate: workers must be >= 0");
    }
#ifdef _OPENMP
    if (workers == 0) {
        workers = omp_get_max_threads();
    }
#endif
    workers = std::max(workers, 1);
    const auto t0 = Clock::now();
    CorpusReport report;
    constexpr std::size_t chunk = 1024;
    std::vector<std::string> lines;
    std::vector<std::size_t> numbers;
    std::vector<EpisodeResult> results;
    std::size_t line_number = 0;
    std::string line;
    bool more = true;
    while (more) {
        // Reorder buffer: one chunk of input lines, results written back in order.
        lines.clear();
        numbers.clear();
        while (lines.size() < chunk && (more = static_cast<bool>(std::getline(input, line)))) {
            ++line_number;
            if (!blank(line)) {
                lines.push_back(std::move(line));
                numbers.push_back(line_number);
            }
        }
        results.assign(lines.size(), {});
        const auto n = static_cast<std::ptrdiff_t>(lines.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(workers)
#endif
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            results[k] = process_line(lines[k], numbers[k], config);
        }
        for (EpisodeResult& r : results) {
            output << r.lines;
            accumulate(report, r);
        }
        check_sink(output);
    }
    if (input.bad()) {
        throw PipelineError("annotate: input read failed");
    }
    output.flush();
    check_sink(output);
    report.wall_time = seconds_since(t0);
    return report;
}

CorpusReport annotate_stream_serial(std::istream& input, std::ostream& output, const SegmenterConfig& config) {
    config.validate();
    const auto t0 = Clock::now();
    CorpusReport report;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(input, line)) {
        ++line_number;
        if (blank(line)) {
            continue;
        }
        EpisodeResult r = process_line(line, line_number, config);
        output << r.lines;
        accumulate(report, r);
    }
    if (input.bad()) {
        throw PipelineError("annotate: input read failed");
    }
    output.flush();
    check_sink(output);
    report.wall_time = seconds_since(t0);
    return report;
}

CorpusReport annotate_corpus(const std::string& input_path, const std::string& output_path,
                             const SegmenterConfig& config, int workers) {
    std::ifstream in(input_path);
    if (!in) {
        throw PipelineError("cannot read input " + input_path);
    }
    std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw PipelineError("cannot write output " + output_path);
    }
    std::vector<char> buffer(1 << 20);
    out.rdbuf()->pubsetbuf(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    return annotate_stream(in, out, config, workers);
}

CorpusReport corpus_stats(std::istream& segments) {
    const auto t0 = Clock::now();
    CorpusReport report;
    std::string line;
    std::size_t line_number = 0;
    std::string current_episode;
    bool any = false;
    while (std::getline(segments, line)) {
        ++line_number;
        if (blank(line)) {
            continue;
        }
        SkillSegment s;
        try {
            s = parse_segment_line(line, line_number);
        } catch (const RecordError& e) {
            report.diagnostics.push_back({"", DiagnosticCode::malformed_record, e.what()});
            continue;
        }
        if (!any || s.episode_id != current_episode) {
            ++report.episodes_segmented;
            current_episode = s.episode_id;
            any = true;
        }
        ++report.segments_out;
        ++report.per_kind[std::string(to_string(s.kind))];
        if (s.kind == SkillKind::grasp && s.modifier) {
            ++report.per_class[*s.modifier];
        }
    }
    // The segment file only records episodes that produced segments.
    report.episodes_in = report.episodes_segmented;
    report.wall_time = seconds_since(t0);
    return report;
}

CorpusReport corpus_stats(const std::string& segments_path) {
    std::ifstream in(segments_path);
    if (!in) {
        throw PipelineError("cannot read " + segments_path);
    }
    return corpus_stats(in);
}

// ---------------------------------------------------------------------------
// Mixing

MixManifest build_mix(std::vector<MixSource> sources, RelabelMode mode) {
    if (sources.empty()) {
        throw std::invalid_argument("mix: at least one source is required");
    }
    double total = 0.0;
    for (const MixSource& s : sources) {
        if (!std::isfinite(s.weight) || s.weight < 0.0) {
            throw std::invalid_argument("mix: weight for " + s.path + " must be a non-negative number");
        }
        total += s.weight;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("mix: all weights are zero");
    }
    for (MixSource& s : sources) {
        s.weight /= total;
    }
    return {std::move(sources), mode};
}

nlohmann::ordered_json manifest_to_json(const MixManifest& m) {
    nlohmann::ordered_json j;
    auto sources = nlohmann::ordered_json::array();
    for (const MixSource& s : m.sources) {
        sources.push_back({{"path", s.path}, {"weight", s.weight}});
    }
    j["sources"] = std::move(sources);
    j["relabel_mode"] = m.mode == RelabelMode::augment ? "augment" : "replace";
    return j;
}

MixManifest manifest_from_json(const nlohmann::json& j) {
    std::vector<MixSource> sources;
    for (const auto& s : j.at("sources")) {
        sources.push_back({s.at("path").get<std::string>(), s.at("weight").get<double>()});
    }
    const std::string mode = j.value("relabel_mode", "augment");
    if (mode != "augment" && mode != "replace") {
        throw std::invalid_argument("mix: unknown relabel_mode " + mode);
    }
    return build_mix(std::move(sources), mode == "augment" ? RelabelMode::augment : RelabelMode::replace);
}

MixSource parse_mix_source(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw std::invalid_argument("mix source must be PATH:WEIGHT, got \"" + text + "\"");
    }
    std::size_t used = 0;
    double weight = 0.0;
    try {
        weight = std::stod(text.substr(colon + 1), &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() - colon - 1) {
        throw std::invalid_argument("bad weight in mix source \"" + text + "\"");
    }
    return {text.substr(0, colon), weight};
}

MixSampler::MixSampler(const MixManifest& manifest, std::uint64_t seed) : state_(seed) {
    double acc = 0.0;
    for (const MixSource& s : manifest.sources) {
        acc += s.weight;
        cumulative_.push_back(acc);
    }
}

std::size_t MixSampler::next() {
    // splitmix64 step
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53 * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
}

}  // namespace steer
