// steer: corpus relabeling, synthetic data, anchors, plans and the session
// gateway. Exit codes: 0 success, 1 fatal error, 2 usage error.

#include <pthread.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "steer/gateway.hpp"
#include "steer/orchestrator.hpp"
#include "steer/pipeline.hpp"
#include "steer/planner.hpp"
#include "steer/serialize.hpp"
#include "steer/sim.hpp"

using namespace steer;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
}

std::size_t count_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        n += line.find_first_not_of(" \t\r") != std::string::npos;
    }
    return n;
}

std::shared_ptr<Planner> make_planner(const std::string& kind, const std::string& url, double timeout) {
    if (kind == "none" || kind == "interactive") {
        return nullptr;
    }
    if (kind == "scripted") {
        return std::make_shared<ScriptedPlanner>();
    }
    if (kind == "remote") {
        if (!url.empty()) {
            return std::make_shared<RemotePlanner>(url, timeout);
        }
        if (auto env = RemotePlanner::from_env()) {
            return std::make_shared<RemotePlanner>(std::move(*env));
        }
        throw std::runtime_error("remote planner needs --planner-url or STEER_PLANNER_URL");
    }
    throw std::runtime_error("unknown planner kind " + kind);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skill relabeling, steering and simulation tools"};
    app.require_subcommand(1);

    // annotate
    auto* annotate = app.add_subcommand("annotate", "Relabel an episode corpus into skill segments");
    std::string in_path, out_path, config_path, report_path;
    int workers = 0;
    bool serial = false;
    annotate->add_option("--input", in_path, "Episode records, one per line")->required();
    annotate->add_option("--output", out_path, "Segment records, one per line")->required();
    annotate->add_option("--config", config_path, "Segmenter config (JSON); flags override it");
    annotate->add_option("--workers", workers, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    annotate->add_option("--report", report_path, "Write the corpus report here instead of stdout");
    annotate->add_flag("--serial", serial, "Use the single-threaded reference path");
    std::optional<double> open_threshold, closed_threshold, lift_height;
    std::optional<int> dwell, smoothing;
    annotate->add_option("--open-threshold", open_threshold);
    annotate->add_option("--closed-threshold", closed_threshold);
    annotate->add_option("--dwell", dwell, "Steps a new approach class must persist");
    annotate->add_option("--lift-height", lift_height, "Minimum rise (m) for a trailing lift");
    annotate->add_option("--smoothing", smoothing, "Median window on the aperture signal (odd)");

    // stats
    auto* stats = app.add_subcommand("stats", "Summarize a segment file");
    std::string stats_input;
    stats->add_option("--input", stats_input, "Segment records")->required();

    // mix
    auto* mix = app.add_subcommand("mix", "Write a dataset mixing manifest");
    std::vector<std::string> mix_sources;
    std::string mix_output, mix_mode = "augment";
    bool by_size = false;
    mix->add_option("--source", mix_sources, "PATH:WEIGHT (or PATH with --by-size)")->required();
    mix->add_option("--output", mix_output, "Manifest path (- for stdout)")->default_val("-");
    mix->add_option("--mode", mix_mode, "Relabeled data augments or replaces the original labels")
        ->check(CLI::IsMember({"augment", "replace"}));
    mix->add_flag("--by-size", by_size, "Weight each source by its record count");

    // anchors
    auto* anchors = app.add_subcommand("anchors", "Print the approach anchor set");
    std::string anchors_output = "-";
    anchors->add_option("--output", anchors_output);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic episode corpus");
    std::string spec_path, synth_output;
    std::size_t synth_count = 100;
    std::uint64_t synth_seed = 0;
    int synth_workers = 0;
    synth->add_option("--spec", spec_path, "Synthesis spec (JSON)")->required();
    synth->add_option("--count", synth_count)->required();
    synth->add_option("--seed", synth_seed);
    synth->add_option("--output", synth_output)->required();
    synth->add_option("--workers", synth_workers)->check(CLI::NonNegativeNumber);

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "Validate or execute a skill program in a scenario");
    std::string scenario = "single_cup", program_path, task, planner_kind = "scripted", planner_url;
    std::uint64_t plan_seed = 0;
    bool execute = false;
    double planner_timeout = 30.0;
    plan_cmd->add_option("--scenario", scenario);
    plan_cmd->add_option("--seed", plan_seed);
    auto* program_opt = plan_cmd->add_option("--program", program_path, "Program file (- for stdin)");
    plan_cmd->add_option("--task", task, "Ask the planner for a program")->excludes(program_opt);
    plan_cmd->add_option("--planner", planner_kind)->check(CLI::IsMember({"scripted", "remote"}));
    plan_cmd->add_option("--planner-url", planner_url);
    plan_cmd->add_option("--planner-timeout", planner_timeout);
    plan_cmd->add_flag("--execute", execute, "Run the plan instead of only validating it");

    // prompt
    auto* prompt = app.add_subcommand("prompt", "Print the planner system prompt");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the session gateway");
    unsigned short port = 8080;
    std::string address = "127.0.0.1", persist_dir, serve_planner = "scripted", prompt_path;
    serve->add_option("--port", port);
    serve->add_option("--address", address);
    serve->add_option("--persist", persist_dir, "Append session histories to DIR/<id>.jsonl");
    serve->add_option("--planner", serve_planner)->check(CLI::IsMember({"scripted", "remote", "interactive", "none"}));
    serve->add_option("--planner-url", planner_url);
    serve->add_option("--planner-timeout", planner_timeout);
    serve->add_option("--system-prompt", prompt_path, "Prompt file sent to the planner");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*annotate) {
            SegmenterConfig config;
            if (!config_path.empty()) {
                config = segmenter_config_from_json(json::parse(read_file(config_path)));
            }
            if (open_threshold) config.open_threshold = *open_threshold;
            if (closed_threshold) config.closed_threshold = *closed_threshold;
            if (dwell) config.reorient_dwell = *dwell;
            if (lift_height) config.lift_height = *lift_height;
            if (smoothing) config.smoothing_window = *smoothing;
            try {
                config.validate();
            } catch (const std::invalid_argument& e) {
                std::cerr << "steer annotate: " << e.what() << "\n";
                return 2;
            }
            CorpusReport report;
            if (serial) {
                std::ifstream in(in_path);
                std::ofstream out(out_path);
                if (!in || !out) {
                    throw PipelineError("cannot open " + std::string(!in ? in_path : out_path));
                }
                report = annotate_stream_serial(in, out, config);
            } else {
                report = annotate_corpus(in_path, out_path, config, workers);
            }
            write_text(report_path, report_to_json(report).dump(2) + "\n");
            std::cerr << "annotated " << report.episodes_in << " episodes into " << report.segments_out
                      << " segments (" << report.diagnostics.size() << " diagnostics) in " << report.wall_time
                      << " s\n";
        } else if (*stats) {
            std::cout << report_to_json(corpus_stats(stats_input)).dump(2) << "\n";
        } else if (*mix) {
            std::vector<MixSource> sources;
            for (const std::string& s : mix_sources) {
                if (by_size) {
                    sources.push_back({s, static_cast<double>(count_records(s))});
                } else {
                    try {
                        sources.push_back(parse_mix_source(s));
                    } catch (const std::invalid_argument& e) {
                        std::cerr << "steer mix: " << e.what() << "\n";
                        return 2;
                    }
                }
            }
            const MixManifest m =
                build_mix(std::move(sources), mix_mode == "augment" ? RelabelMode::augment : RelabelMode::replace);
            write_text(mix_output, manifest_to_json(m).dump(2) + "\n");
        } else if (*anchors) {
            ojson out = ojson::array();
            for (const Anchor& a : default_anchors()) {
                out.push_back(to_json(a));
            }
            write_text(anchors_output, out.dump(2) + "\n");
        } else if (*synth) {
            const SynthSpec spec = synth_spec_from_file(spec_path);
            std::ofstream out(synth_output);
            if (!out) {
                throw std::runtime_error("cannot write " + synth_output);
            }
            synth_corpus(spec, synth_count, synth_seed, out, synth_workers);
            if (!out.flush()) {
                throw std::runtime_error("write failed: " + synth_output);
            }
        } else if (*plan_cmd) {
            SceneState scene = reset(scenario, plan_seed);
            Plan plan;
            ojson out;
            if (!task.empty()) {
                auto planner = make_planner(planner_kind, planner_url, planner_timeout);
                ProposeResult r = propose_plan(*planner, build_request(task, scene), scene);
                plan = std::move(r.plan);
                out["planner"] = {{"kind", std::string(planner->kind())}, {"attempts", r.attempts}, {"rejected", r.rejected}};
            } else if (!program_path.empty()) {
                const std::string text =
                    program_path == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {}) : read_file(program_path);
                try {
                    plan = parse_plan(text);
                } catch (const PlanParseError& e) {
                    std::cout << ojson{{"parse_error", to_json(e)}}.dump(2) << "\n";
                    return 1;
                }
            } else {
                std::cerr << "steer plan: give --program or --task\n";
                return 2;
            }
            const ValidationReport report = validate_plan(plan, scene);
            out["program"] = to_dsl(plan.calls);
            out["validation"] = to_json(report);
            if (execute) {
                if (!report.ok()) {
                    std::cout << out.dump(2) << "\n";
                    return 1;
                }
                const ExecutionLog log = execute_plan(plan, scene);
                out["log"] = to_json(log);
                out["state"] = to_json(scene);
                std::cout << out.dump(2) << "\n";
                return log.completed ? 0 : 1;
            }
            std::cout << out.dump(2) << "\n";
            return report.ok() ? 0 : 1;
        } else if (*prompt) {
            std::cout << default_system_prompt();
        } else if (*serve) {
            // Block the stop signals before any thread exists; the main thread waits for them.
            sigset_t stop_signals;
            sigemptyset(&stop_signals);
            sigaddset(&stop_signals, SIGINT);
            sigaddset(&stop_signals, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
            GatewayOptions options;
            options.persist_dir = persist_dir;
            if (!prompt_path.empty()) {
                options.system_prompt = load_system_prompt(prompt_path);
            }
            SessionManager sessions(options, make_planner(serve_planner, planner_url, planner_timeout));
            GatewayServer server(sessions, address, port);
            std::cerr << "steer gateway listening on " << address << ":" << server.port() << "\n";
            server.start();
            int sig = 0;
            sigwait(&stop_signals, &sig);
            std::cerr << "steer gateway stopping\n";
            server.stop();
        }
    } catch (const std::exception& e) {
        std::cerr << "steer: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
