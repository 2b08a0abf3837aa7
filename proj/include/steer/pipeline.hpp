#pragma once

// Corpus-level relabeling: parse -> segment -> render over line-delimited
// episode files, plus statistics and dataset mixing manifests.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "steer/segmenter.hpp"

namespace steer {

struct CorpusReport {
    std::size_t episodes_in = 0;
    std::size_t episodes_segmented = 0;
    std::size_t segments_out = 0;
    std::map<std::string, std::size_t> per_kind;   // grasp / reorient / lift / place
    std::map<std::string, std::size_t> per_class;  // grasp segments by approach class
    std::vector<Diagnostic> diagnostics;
    double wall_time = 0.0;  // seconds

    CorpusReport();
    /// Same counts (wall time and diagnostics excluded).
    bool same_counts(const CorpusReport& other) const;
};

nlohmann::ordered_json report_to_json(const CorpusReport& report);

/// Unreadable input or unwritable output.
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relabels every episode read from `input`, writing segments to `output` in
/// input order. Episodes are processed in fixed-size chunks across `workers`
/// OpenMP threads (0 = runtime default); per-episode failures become
/// diagnostics.
CorpusReport annotate_stream(std::istream& input, std::ostream& output, const SegmenterConfig& config, int workers);
/// Serial reference implementation of annotate_stream.
CorpusReport annotate_stream_serial(std::istream& input, std::ostream& output, const SegmenterConfig& config);

CorpusReport annotate_corpus(const std::string& input_path, const std::string& output_path,
                             const SegmenterConfig& config, int workers);

/// Recomputes the counts of an annotate run from its segment file.
CorpusReport corpus_stats(std::istream& segments);
CorpusReport corpus_stats(const std::string& segments_path);

enum class RelabelMode { augment, replace };

struct MixSource {
    std::string path;
    double weight = 0.0;

    friend bool operator==(const MixSource&, const MixSource&) = default;
};

struct MixManifest {
    std::vector<MixSource> sources;  // weights sum to 1
    RelabelMode mode = RelabelMode::augment;
};

/// Normalizes the weights. Throws std::invalid_argument for no sources,
/// negative or non-finite weights, or weights that are all zero.
MixManifest build_mix(std::vector<MixSource> sources, RelabelMode mode = RelabelMode::augment);

nlohmann::ordered_json manifest_to_json(const MixManifest& manifest);
MixManifest manifest_from_json(const nlohmann::json& j);

/// Parses "PATH:WEIGHT" (split at the last colon).
MixSource parse_mix_source(const std::string& text);

/// Seeded draw of source indices in proportion to the manifest weights.
class MixSampler {
public:
    MixSampler(const MixManifest& manifest, std::uint64_t seed);
    std::size_t next();

private:
    std::vector<double> cumulative_;
    std::uint64_t state_;
};

}  // namespace steer
