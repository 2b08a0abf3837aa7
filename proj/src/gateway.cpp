#include "steer/gateway.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>

namespace steer {

using nlohmann::json;

ApiError::ApiError(int status, std::string code, std::string message, ojson detail)
    : std::runtime_error(std::move(message)), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}

ojson ApiError::body() const { return {{"code", code_}, {"message", what()}, {"detail", detail_}}; }

struct Session {
    std::string id;
    std::string scenario;
    std::uint64_t seed = 0;
    std::string created_at;

    std::mutex command;  // one skill or plan at a time
    SceneState scene;    // guarded by command

    mutable std::mutex data;  // everything below
    std::condition_variable data_changed;
    SceneState published;
    std::vector<ojson> history;
    std::vector<std::string> events;  // events[i] has seq i + 1
    ojson last_outcome = nullptr;
    std::optional<std::string> last_program;
    std::optional<std::string> last_task;
    std::ofstream persist;
};

namespace {

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const json& require_object(const json& body) {
    if (!body.is_object()) {
        throw ApiError(400, "bad_request", "request body must be a JSON object");
    }
    return body;
}

std::string require_string(const json& body, const char* field) {
    const auto it = body.find(field);
    if (it == body.end() || !it->is_string()) {
        throw ApiError(400, "bad_request", std::string("missing string field \"") + field + "\"");
    }
    return it->get<std::string>();
}

SkillCall call_from_body(const json& body) {
    try {
        return skill_call_from_json(body);
    } catch (const std::invalid_argument& e) {
        throw ApiError(422, "invalid_call", e.what());
    } catch (const json::exception& e) {
        throw ApiError(400, "bad_request", e.what());
    }
}

ojson outcome_json(const SkillCall& call, const std::string& language, bool success, const std::string& reason,
                   std::size_t steps) {
    return {{"call", to_json(call)}, {"language", language}, {"success", success}, {"reason", reason}, {"steps", steps}};
}

/// Runs one call on a copy of the session scene; SimError leaves the session
/// untouched. Returns the per-step scenes with the final one reflecting the
/// post-skill scene.
struct CallResult {
    SkillOutcome outcome;
    std::vector<SceneState> steps;
};

CallResult run_call(Session& s, const SkillCall& call, const SimOptions& options) {
    CallResult r;
    SceneState work = s.scene;
    r.outcome = exec_call(work, call, options, [&r](const SceneState& st) { r.steps.push_back(st); });
    if (!r.steps.empty()) {
        r.steps.back() = work;
    } else if (!(work == s.scene)) {
        r.steps.push_back(work);
    }
    s.scene = std::move(work);
    return r;
}

/// Appends the history entry and the step events; must hold s.command.
void publish(Session& s, const std::string& source, const SkillCall& call, const std::string& language,
             const CallResult& r) {
    const ojson outcome = outcome_json(call, language, r.outcome.success, r.outcome.reason, r.outcome.trajectory.size());
    std::lock_guard lock(s.data);
    ojson entry = {{"index", s.history.size()},
                   {"source", source},
                   {"call", to_json(call)},
                   {"language", language},
                   {"success", r.outcome.success},
                   {"reason", r.outcome.reason},
                   {"steps", r.outcome.trajectory.size()},
                   {"step", s.scene.step}};
    if (s.persist.is_open()) {
        s.persist << entry.dump() << '\n';
        s.persist.flush();
    }
    s.history.push_back(std::move(entry));
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        if (i + 1 == r.steps.size()) {
            s.last_outcome = outcome;
        }
        const ojson event = {{"type", "event"},
                             {"seq", s.events.size() + 1},
                             {"session_id", s.id},
                             {"step", r.steps[i].step},
                             {"scene", to_json(r.steps[i])},
                             {"last_outcome", s.last_outcome}};
        s.events.push_back(event.dump());
    }
    s.last_outcome = outcome;
    s.published = s.scene;
    s.data_changed.notify_all();
}

ojson calls_json(const std::vector<SkillCall>& calls) {
    ojson a = ojson::array();
    for (const SkillCall& c : calls) {
        a.push_back(to_json(c));
    }
    return a;
}

}  // namespace

SessionManager::SessionManager(GatewayOptions options, std::shared_ptr<Planner> planner,
                               std::shared_ptr<PlannerMemory> memory, const ScenarioLibrary& library)
    : options_(std::move(options)),
      planner_(std::move(planner)),
      memory_(memory ? std::move(memory) : std::make_shared<PlannerMemory>()),
      library_(library) {
    if (!options_.persist_dir.empty()) {
        std::filesystem::create_directories(options_.persist_dir);
    }
}

SessionManager::~SessionManager() { shutdown(); }

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw ApiError(404, "session_not_found", "no session \"" + id + "\"");
    }
    return it->second;
}

ojson SessionManager::create_session(const json& body) {
    require_object(body);
    const std::string scenario = require_string(body, "scenario");
    std::uint64_t seed = 0;
    if (const auto it = body.find("seed"); it != body.end()) {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
            throw ApiError(400, "bad_request", "\"seed\" must be a non-negative integer");
        }
        seed = it->get<std::uint64_t>();
    }
    if (library_.find(scenario) == nullptr) {
        throw ApiError(400, "unknown_scenario", "unknown scenario \"" + scenario + "\"",
                       {{"available", library_.names()}});
    }
    auto s = std::make_shared<Session>();
    char id[32];
    std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(next_id_.fetch_add(1)));
    s->id = id;
    s->scenario = scenario;
    s->seed = seed;
    s->created_at = utc_now();
    s->scene = reset(scenario, seed, library_);
    s->published = s->scene;
    if (!options_.persist_dir.empty()) {
        const auto path = std::filesystem::path(options_.persist_dir) / (s->id + ".jsonl");
        s->persist.open(path, std::ios::app);
        if (!s->persist) {
            throw ApiError(500, "persist_failed", "cannot open " + path.string());
        }
        const ojson header = {
            {"session_id", s->id}, {"scenario", scenario}, {"seed", seed}, {"created_at", s->created_at}};
        s->persist << header.dump() << '\n';
        s->persist.flush();
    }
    ojson out = {{"session_id", s->id}, {"created_at", s->created_at}, {"state", to_json(s->scene)}};
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(s->id, std::move(s));
    return out;
}

ojson SessionManager::state(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->data);
    return to_json(s->published);
}

ojson SessionManager::post_skill(const std::string& id, const json& body) {
    const auto s = find(id);
    require_object(body);
    const SkillCall call = call_from_body(body);
    const std::string language = render_language(call);
    std::lock_guard command(s->command);
    CallResult r;
    try {
        r = run_call(*s, call, options_.sim);
    } catch (const SimError& e) {
        throw ApiError(409, "skill_rejected", e.what(), {{"call", to_json(call)}, {"language", language}});
    }
    publish(*s, "skill", call, language, r);
    return {{"call", to_json(call)},
            {"language", language},
            {"outcome", to_json(r.outcome)},
            {"state", to_json(s->scene)}};
}

ojson SessionManager::post_plan(const std::string& id, const json& body) {
    const auto s = find(id);
    require_object(body);
    const std::string mode = body.value("mode", std::string("validate_only"));
    if (mode != "validate_only" && mode != "execute") {
        throw ApiError(400, "bad_request", "\"mode\" must be \"validate_only\" or \"execute\"");
    }
    std::optional<std::string> task;
    if (const auto it = body.find("task"); it != body.end() && !it->is_null()) {
        task = require_string(body, "task");
    }
    std::lock_guard command(s->command);

    ojson out = {{"mode", mode}};
    Plan plan;
    if (const auto it = body.find("program"); it != body.end() && !it->is_null()) {
        try {
            plan = parse_plan(require_string(body, "program"));
        } catch (const PlanParseError& e) {
            throw ApiError(400, "parse_error", e.what(), to_json(e));
        }
    } else if (task) {
        if (!planner_) {
            throw ApiError(400, "bad_request", "no planner configured; post a \"program\"");
        }
        const PlannerRequest request =
            build_request(*task, s->scene, memory_.get(), options_.memory_k, options_.system_prompt);
        try {
            ProposeResult proposed = propose_plan(*planner_, request, s->scene, options_.propose);
            plan = std::move(proposed.plan);
            out["planner"] = {{"kind", std::string(planner_->kind())},
                              {"attempts", proposed.attempts},
                              {"rejected", proposed.rejected},
                              {"examples", request.examples}};
        } catch (const PlannerError& e) {
            const int status = e.code() == PlannerError::Code::unreachable ? 502 : 422;
            throw ApiError(status, std::string(to_string(e.code())), e.what());
        }
    } else {
        throw ApiError(400, "bad_request", "plan needs a \"program\" or a \"task\"");
    }

    const std::string program = to_dsl(plan.calls);
    const ValidationReport report = validate_plan(plan, s->scene);
    out["program"] = program;
    out["calls"] = calls_json(plan.calls);
    out["validation"] = to_json(report);
    if (mode == "validate_only") {
        return out;
    }
    if (!report.ok()) {
        throw ApiError(422, "plan_invalid", "plan failed validation: " + report.summary(), to_json(report));
    }

    ExecutionLog log;
    for (std::size_t i = 0; i < plan.calls.size(); ++i) {
        const SkillCall& call = plan.calls[i];
        ExecutionEntry entry;
        entry.call_index = i;
        entry.call = call;
        entry.language = render_language(call);
        CallResult r;
        try {
            r = run_call(*s, call, options_.sim);
            entry.success = r.outcome.success;
            entry.reason = r.outcome.reason;
            entry.steps = r.outcome.trajectory.size();
        } catch (const SimError& e) {
            entry.success = false;
            entry.reason = e.what();
            r.outcome.reason = e.what();
        }
        entry.state_after = s->scene;
        publish(*s, "plan", call, entry.language, r);
        const bool ok = entry.success;
        log.entries.push_back(std::move(entry));
        if (!ok) {
            break;
        }
    }
    log.completed = log.entries.size() == plan.calls.size() && log.entries.back().success;
    {
        std::lock_guard lock(s->data);
        s->last_program = program;
        s->last_task = task;
    }
    out["log"] = to_json(log);
    out["state"] = to_json(s->scene);
    return out;
}

ojson SessionManager::history(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->data);
    ojson entries = ojson::array();
    for (const ojson& e : s->history) {
        entries.push_back(e);
    }
    return {{"session_id", s->id},
            {"scenario", s->scenario},
            {"seed", s->seed},
            {"created_at", s->created_at},
            {"entries", entries}};
}

ojson SessionManager::post_outcome(const std::string& id, const json& body) {
    const auto s = find(id);
    require_object(body);
    const auto it = body.find("succeeded");
    if (it == body.end() || !it->is_boolean()) {
        throw ApiError(400, "bad_request", "missing boolean field \"succeeded\"");
    }
    const bool succeeded = it->get<bool>();
    std::string program;
    std::optional<std::string> task;
    {
        std::lock_guard lock(s->data);
        if (!s->last_program) {
            throw ApiError(409, "no_executed_plan", "session \"" + id + "\" has not executed a plan");
        }
        program = *s->last_program;
        task = s->last_task;
    }
    if (const auto t = body.find("task"); t != body.end() && !t->is_null()) {
        task = require_string(body, "task");
    }
    if (!task) {
        throw ApiError(400, "bad_request", "no task given and the executed plan had none");
    }
    memory_->record(*task, program, succeeded);
    return {{"recorded", true}, {"task", *task}, {"program", program}, {"succeeded", succeeded}};
}

std::uint64_t SessionManager::subscribe(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->data);
    return s->events.size();
}

std::vector<std::string> SessionManager::next_events(const std::string& id, std::uint64_t& cursor,
                                                     std::chrono::milliseconds wait) const {
    const auto s = find(id);
    std::unique_lock lock(s->data);
    s->data_changed.wait_for(lock, wait, [&] { return stopping_.load() || s->events.size() > cursor; });
    std::vector<std::string> out(s->events.begin() + static_cast<std::ptrdiff_t>(std::min<std::uint64_t>(cursor, s->events.size())),
                                 s->events.end());
    cursor = s->events.size();
    return out;
}

ojson SessionManager::snapshot(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->data);
    return {{"type", "snapshot"},
            {"seq", s->events.size()},
            {"session_id", s->id},
            {"step", s->published.step},
            {"scene", to_json(s->published)},
            {"last_outcome", s->last_outcome}};
}

std::vector<std::string> SessionManager::scenario_names() const { return library_.names(); }

void SessionManager::shutdown() {
    stopping_ = true;
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, s] : sessions_) {
        std::lock_guard data(s->data);
        s->data_changed.notify_all();
    }
}

SceneState replay_history(const json& history, const ScenarioLibrary& library, const SimOptions& options) {
    SceneState scene = reset(history.at("scenario").get<std::string>(), history.at("seed").get<std::uint64_t>(), library);
    for (const json& entry : history.at("entries")) {
        const SkillCall call = skill_call_from_json(entry.at("call"));
        try {
            exec_call(scene, call, options);
        } catch (const SimError&) {
            // Recorded as a halting entry; it did not change the scene then either.
        }
    }
    return scene;
}

json read_session_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read session file " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty session file " + path);
    }
    json doc = json::parse(line);
    doc["entries"] = json::array();
    while (std::getline(in, line)) {
        if (!line.empty()) {
            doc["entries"].push_back(json::parse(line));
        }
    }
    return doc;
}

}  // namespace steer
