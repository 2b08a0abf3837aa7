#pragma once

// Session service: simulated scenes, skill and plan execution, per-session
// event streams and planner memory. SessionManager holds all behavior;
// GatewayServer exposes it over HTTP plus a websocket stream.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "steer/orchestrator.hpp"
#include "steer/planner.hpp"
#include "steer/serialize.hpp"
#include "steer/sim.hpp"

namespace steer {

/// An error answered with HTTP `status` and {code, message, detail}.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, std::string message, ojson detail = nullptr);

    int status() const { return status_; }
    const std::string& code() const { return code_; }
    const ojson& detail() const { return detail_; }
    ojson body() const;

private:
    int status_;
    std::string code_;
    ojson detail_;
};

struct GatewayOptions {
    SimOptions sim;
    std::string persist_dir;  // empty: history stays in memory
    ProposeOptions propose;
    std::size_t memory_k = 3;
    std::string system_prompt = default_system_prompt();
};

struct Session;

class SessionManager {
public:
    /// `planner` may be null; plans must then be posted as program text.
    SessionManager(GatewayOptions options = {}, std::shared_ptr<Planner> planner = nullptr,
                   std::shared_ptr<PlannerMemory> memory = nullptr,
                   const ScenarioLibrary& library = ScenarioLibrary::builtin());
    ~SessionManager();

    /// {"scenario", "seed"?} -> {"session_id", "created_at", "state"}
    ojson create_session(const nlohmann::json& body);
    ojson state(const std::string& id) const;
    /// {"skill", "object", "modifier"?} -> {"call", "language", "outcome", "state"}
    ojson post_skill(const std::string& id, const nlohmann::json& body);
    /// {"program" | "task", "mode": "validate_only" | "execute"}
    ojson post_plan(const std::string& id, const nlohmann::json& body);
    ojson history(const std::string& id) const;
    /// {"task"?, "succeeded"}: records the session's last executed program.
    ojson post_outcome(const std::string& id, const nlohmann::json& body);

    /// Cursor positioned after the newest event; throws ApiError 404.
    std::uint64_t subscribe(const std::string& id) const;
    /// Serialized events with seq > cursor, waiting up to `wait` for the first
    /// one. Advances the cursor. Empty on timeout or shutdown.
    std::vector<std::string> next_events(const std::string& id, std::uint64_t& cursor,
                                         std::chrono::milliseconds wait) const;
    /// {"type": "snapshot", "seq", "step", "scene"} for a new subscriber.
    ojson snapshot(const std::string& id) const;

    std::vector<std::string> scenario_names() const;
    PlannerMemory& memory() { return *memory_; }
    const GatewayOptions& options() const { return options_; }

    /// Wakes every waiting stream; subsequent waits return immediately.
    void shutdown();
    bool stopping() const { return stopping_.load(); }

private:
    std::shared_ptr<Session> find(const std::string& id) const;

    GatewayOptions options_;
    std::shared_ptr<Planner> planner_;
    std::shared_ptr<PlannerMemory> memory_;
    const ScenarioLibrary& library_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::atomic<std::uint64_t> next_id_{1};
    std::atomic<bool> stopping_{false};
};

/// Re-executes the calls of a history document (as returned by
/// SessionManager::history or read from a persisted session file) on a fresh
/// scene with the same scenario and seed.
SceneState replay_history(const nlohmann::json& history, const ScenarioLibrary& library = ScenarioLibrary::builtin(),
                          const SimOptions& options = {});
/// Reads a persisted session file (header line, then one entry per line).
nlohmann::json read_session_file(const std::string& path);

class GatewayServer {
public:
    /// Port 0 picks a free port; see port().
    GatewayServer(SessionManager& sessions, const std::string& address, unsigned short port);
    ~GatewayServer();

    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    unsigned short port() const { return port_; }
    /// Accepts connections until stop().
    void run();
    /// run() on a background thread.
    void start();
    /// Closes the listener and every open connection, then joins their threads.
    void stop();

private:
    struct Impl;

    SessionManager& sessions_;
    std::unique_ptr<Impl> impl_;
    unsigned short port_ = 0;
};

}  // namespace steer
