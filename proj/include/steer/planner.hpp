#pragma once

// High-level planners that turn a task plus a scene summary into a skill
// program, and the memory of past successes used as in-context examples.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "steer/orchestrator.hpp"
#include "steer/sim.hpp"

namespace steer {

struct PlannerRequest {
    std::string system_prompt;
    std::string scene_summary;
    std::string task;
    std::vector<std::string> examples;  // programs that succeeded on this task before
};

/// {"system_prompt", "scene_summary", "task", "examples": [program, ...]}
std::string request_to_json(const PlannerRequest& request);
PlannerRequest request_from_json(std::string_view text);

class PlannerError : public std::runtime_error {
public:
    enum class Code { unreachable, malformed_response, retries_exhausted, no_program };

    PlannerError(Code code, std::string message);
    Code code() const { return code_; }

private:
    Code code_;
};

std::string_view to_string(PlannerError::Code code);

class Planner {
public:
    virtual ~Planner() = default;
    /// Raw program text; throws PlannerError.
    virtual std::string propose(const PlannerRequest& request) = 0;
    virtual std::string_view kind() const = 0;
};

/// Fixed task -> program table (exact, case-insensitive task match).
class ScriptedPlanner : public Planner {
public:
    ScriptedPlanner();  // built-in table
    explicit ScriptedPlanner(std::map<std::string, std::string> table);

    void set(std::string task, std::string program);
    std::string propose(const PlannerRequest& request) override;
    std::string_view kind() const override { return "scripted"; }

private:
    std::map<std::string, std::string> table_;
};

/// POSTs the request JSON to an HTTP endpoint that answers {"program": "..."}.
class RemotePlanner : public Planner {
public:
    RemotePlanner(std::string url, double timeout_s = 30.0);
    /// STEER_PLANNER_URL (required) and STEER_PLANNER_TIMEOUT_S.
    static std::optional<RemotePlanner> from_env();

    std::string propose(const PlannerRequest& request) override;
    std::string_view kind() const override { return "remote"; }
    const std::string& url() const { return url_; }

private:
    std::string url_;
    double timeout_s_;
};

/// Programs supplied by a human: either a callback or a queue fed with submit().
class InteractivePlanner : public Planner {
public:
    using Callback = std::function<std::string(const PlannerRequest&)>;

    explicit InteractivePlanner(std::chrono::milliseconds wait = std::chrono::seconds(60));
    explicit InteractivePlanner(Callback callback);

    void submit(std::string program);
    std::string propose(const PlannerRequest& request) override;
    std::string_view kind() const override { return "interactive"; }

private:
    Callback callback_;
    std::chrono::milliseconds wait_{0};
    std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<std::string> queue_;
};

struct ProposeOptions {
    int max_retries = 2;  // re-queries after the first attempt
};

struct ProposeResult {
    Plan plan;
    int attempts = 0;
    std::vector<std::string> rejected;  // error text of each discarded attempt
};

/// Queries the planner and parses + validates the reply against `scene`.
/// Parse or validation failures are fed back by appending the error to the
/// task and re-querying; an unreachable planner fails immediately.
ProposeResult propose_plan(Planner& planner, const PlannerRequest& request, const SceneState& scene,
                           const ProposeOptions& options = {});

struct MemoryEntry {
    std::string task;
    std::string program;
    bool succeeded = false;
    std::uint64_t sequence = 0;
};

/// Thread-safe record of executed plans and their outcomes.
class PlannerMemory {
public:
    void record(std::string task, std::string program, bool succeeded);
    /// Up to k most recent succeeded programs for the exact task, newest first.
    std::vector<std::string> retrieve(std::string_view task, std::size_t k = 3) const;
    std::vector<MemoryEntry> entries() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<MemoryEntry> entries_;
    std::uint64_t next_ = 0;
};

/// Skill API documentation and conventions for the planner. Our own wording,
/// not a canonical prompt.
std::string default_system_prompt();
/// Reads a prompt file; throws std::runtime_error when missing.
std::string load_system_prompt(const std::string& path);

/// Objects, their orientation and position, and the held object, one per line.
std::string scene_summary(const SceneState& scene);

PlannerRequest build_request(std::string task, const SceneState& scene, const PlannerMemory* memory = nullptr,
                             std::size_t k = 3, std::string system_prompt = default_system_prompt());

}  // namespace steer
