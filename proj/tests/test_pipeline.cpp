#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "steer/pipeline.hpp"
#include "steer/sim.hpp"

using namespace steer;
using C = GraspApproachClass;

namespace {

SynthSpec spec_of(std::vector<ScriptSpec> scripts) {
    SynthSpec spec;
    spec.scripts = std::move(scripts);
    spec.objects = {"coke can", "apple", "pink cup", "sponge"};
    return spec;
}

const ScriptSpec pick_top{"pick", 1.0, "pick {object}", {SkillCall::grasp("", C::top_down), SkillCall::lift("")}};
const ScriptSpec pour{"pour",
                      1.0,
                      "move {object} near {target}",
                      {SkillCall::grasp("", C::side), SkillCall::lift(""),
                       SkillCall::reorient("", ReorientDirection::to_horizontal),
                       SkillCall::reorient("", ReorientDirection::to_upright), SkillCall::place("")}};

std::string corpus(const SynthSpec& spec, std::size_t n, std::uint64_t seed) {
    std::stringstream ss;
    synth_corpus(spec, n, seed, ss, 1);
    return ss.str();
}

std::pair<std::string, CorpusReport> annotate(const std::string& input, int workers) {
    std::istringstream in(input);
    std::ostringstream out;
    const CorpusReport r = workers == 0 ? annotate_stream_serial(in, out, {}) : annotate_stream(in, out, {}, workers);
    return {out.str(), r};
}

}  // namespace

TEST_CASE("output is identical for every worker count") {
    SynthSpec spec = spec_of({pick_top, pour});
    spec.options.noise = {2.0, 0.002, 0.02};
    const std::string input = corpus(spec, 500, 3) + "garbage line\n" + corpus(spec, 700, 4);
    const auto [reference, report] = annotate(input, 0);
    for (const int w : {1, 2, 4, 8}) {
        const auto [out, r] = annotate(input, w);
        CHECK(out == reference);
        CHECK(r.same_counts(report));
        CHECK(r.diagnostics == report.diagnostics);
    }
    CHECK(report.episodes_in == 1201);
    REQUIRE(report.diagnostics.size() >= 1);
    CHECK(report.diagnostics[0].code == DiagnosticCode::malformed_record);
}

TEST_CASE("pick corpus composition") {
    const auto [out, r] = annotate(corpus(spec_of({pick_top}), 100, 1), 4);
    CHECK(r.episodes_in == 100);
    CHECK(r.episodes_segmented == 100);
    CHECK(r.segments_out == 200);
    CHECK(r.per_kind.at("grasp") == 100);
    CHECK(r.per_kind.at("lift") == 100);
    CHECK(r.per_kind.at("reorient") == 0);
    CHECK(r.per_class.at("top_down") == 100);
    std::istringstream in(out);
    const CorpusReport stats = corpus_stats(in);
    CHECK(stats.same_counts(r));
}

TEST_CASE("pour corpus has two reorientations per episode") {
    const auto [out, r] = annotate(corpus(spec_of({pour}), 50, 2), 2);
    CHECK(r.per_kind.at("reorient") == 100);
    CHECK(r.per_kind.at("place") == 50);
    std::istringstream in(out);
    CHECK(corpus_stats(in).per_kind.at("reorient") == 100);
}

TEST_CASE("report invariants and diagnostics") {
    std::string input = corpus(spec_of({pick_top}), 10, 1);
    input += R"({"episode_id":"u","instruction":"open the drawer","steps":[{"t":0,"ee_pos":[0,0,0],"wrist_quat":[1,0,0,0],"gripper":1},{"t":1,"ee_pos":[0,0,0],"wrist_quat":[1,0,0,0],"gripper":0}]})";
    input += "\n";
    const auto [out, r] = annotate(input, 3);
    CHECK(r.episodes_in == 11);
    CHECK(r.episodes_segmented == 10);
    std::size_t sum = 0;
    for (const auto& [k, n] : r.per_kind) {
        sum += n;
    }
    CHECK(sum == r.segments_out);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].episode_id == "u");
    CHECK(r.diagnostics[0].code == DiagnosticCode::unknown_template);
    const auto j = report_to_json(r);
    CHECK(j["diagnostics"][0]["code"] == "unknown_template");
    CHECK(j.contains("wall_time"));
}

TEST_CASE("stats of an empty file and malformed segments") {
    std::istringstream empty("");
    const CorpusReport r = corpus_stats(empty);
    CHECK(r.segments_out == 0);
    CHECK(r.episodes_in == 0);
    CHECK(r.per_kind.at("grasp") == 0);
    std::istringstream bad("{not json}\n");
    const CorpusReport b = corpus_stats(bad);
    REQUIRE(b.diagnostics.size() == 1);
    CHECK(b.diagnostics[0].code == DiagnosticCode::malformed_record);
}

TEST_CASE("annotate_corpus on files") {
    const auto dir = std::filesystem::temp_directory_path() / "steer_pipeline_test";
    std::filesystem::create_directories(dir);
    const auto in = dir / "in.jsonl";
    std::ofstream(in) << corpus(spec_of({pick_top, pour}), 60, 9);
    const CorpusReport r = annotate_corpus(in.string(), (dir / "out.jsonl").string(), {}, 2);
    CHECK(r.episodes_in == 60);
    CHECK(corpus_stats((dir / "out.jsonl").string()).same_counts(r));
    CHECK_THROWS_AS(annotate_corpus((dir / "missing.jsonl").string(), (dir / "o.jsonl").string(), {}, 1), PipelineError);
    CHECK_THROWS_AS(annotate_corpus(in.string(), (dir / "no_dir" / "o.jsonl").string(), {}, 1), PipelineError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("build_mix") {
    const MixManifest even = build_mix({{"a", 1}, {"b", 1}});
    CHECK(even.sources[0].weight == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(even.sources[1].weight == doctest::Approx(0.5).epsilon(1e-12));
    const MixManifest sized = build_mix({{"rt1", 70000}, {"moo", 15000}});
    CHECK(std::abs(sized.sources[0].weight - 70000.0 / 85000.0) <= 1e-9);
    CHECK(std::abs(sized.sources[1].weight - 15000.0 / 85000.0) <= 1e-9);
    CHECK(build_mix({{"only", 3}}).sources[0].weight == 1.0);
    CHECK(even.mode == RelabelMode::augment);
    CHECK_THROWS_AS(build_mix({{"a", 0}, {"b", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(build_mix({{"a", -1}, {"b", 2}}), std::invalid_argument);
    CHECK_THROWS_AS(build_mix({}), std::invalid_argument);
    CHECK_THROWS_AS(build_mix({{"a", std::nan("")}}), std::invalid_argument);
}

TEST_CASE("manifest serialization and sources") {
    const MixManifest m = build_mix({{"a.jsonl", 70000}, {"b.jsonl", 15000}}, RelabelMode::replace);
    const MixManifest back = manifest_from_json(nlohmann::json::parse(manifest_to_json(m).dump()));
    CHECK(back.sources == m.sources);
    CHECK(back.mode == RelabelMode::replace);
    CHECK(parse_mix_source("data/a.jsonl:0.5") == MixSource{"data/a.jsonl", 0.5});
    CHECK(parse_mix_source("C:/x.jsonl:2") == MixSource{"C:/x.jsonl", 2.0});
    CHECK_THROWS_AS(parse_mix_source("nocolon"), std::invalid_argument);
    CHECK_THROWS_AS(parse_mix_source("a.jsonl:abc"), std::invalid_argument);
}

TEST_CASE("mix sampler draws in proportion and is seeded") {
    const MixManifest m = build_mix({{"a", 70000}, {"b", 15000}});
    MixSampler s1(m, 42), s2(m, 42);
    int a = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const std::size_t k = s1.next();
        CHECK(k == s2.next());
        a += k == 0;
    }
    CHECK(std::abs(a / double(n) - m.sources[0].weight) < 0.005);
}
