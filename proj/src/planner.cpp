#include "steer/planner.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace steer {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

std::string request_to_json(const PlannerRequest& request) {
    const nlohmann::ordered_json j = {{"system_prompt", request.system_prompt},
                                      {"scene_summary", request.scene_summary},
                                      {"task", request.task},
                                      {"examples", request.examples}};
    return j.dump();
}

PlannerRequest request_from_json(std::string_view text) {
    const json j = json::parse(text);
    PlannerRequest r;
    r.system_prompt = j.value("system_prompt", "");
    r.scene_summary = j.value("scene_summary", "");
    r.task = j.at("task").get<std::string>();
    if (j.contains("examples")) {
        r.examples = j.at("examples").get<std::vector<std::string>>();
    }
    return r;
}

PlannerError::PlannerError(Code code, std::string message) : std::runtime_error(std::move(message)), code_(code) {}

std::string_view to_string(PlannerError::Code code) {
    switch (code) {
        case PlannerError::Code::unreachable:
            return "planner_unreachable";
        case PlannerError::Code::malformed_response:
            return "malformed_response";
        case PlannerError::Code::retries_exhausted:
            return "retries_exhausted";
        case PlannerError::Code::no_program:
            return "no_program";
    }
    return "planner_error";
}

ScriptedPlanner::ScriptedPlanner() {
    set("pour from the pink cup", to_dsl(pour_plan("pink cup")));
    set("pour from the cup", to_dsl(pour_plan("cup")));
    set("pick up the flower pot",
        to_dsl({SkillCall::grasp("flower pot", GraspApproachClass::side), SkillCall::lift("flower pot")}));
    set("pick up the kettle",
        to_dsl({SkillCall::grasp("kettle", GraspApproachClass::top_down), SkillCall::lift("kettle")}));
    set("pick up the apple",
        to_dsl({SkillCall::grasp("apple", GraspApproachClass::top_down), SkillCall::lift("apple")}));
    set("flip the top cup upright", to_dsl(unstack_flip_plan("top cup")));
}

ScriptedPlanner::ScriptedPlanner(std::map<std::string, std::string> table) {
    for (auto& [task, program] : table) {
        set(task, std::move(program));
    }
}

void ScriptedPlanner::set(std::string task, std::string program) {
    table_[lower(trim(task))] = std::move(program);
}

std::string ScriptedPlanner::propose(const PlannerRequest& request) {
    // Feedback from a rejected attempt is appended after a blank line.
    const std::string first = request.task.substr(0, request.task.find('\n'));
    const auto it = table_.find(lower(trim(first)));
    if (it == table_.end()) {
        throw PlannerError(PlannerError::Code::no_program, "no scripted program for task \"" + trim(first) + "\"");
    }
    return it->second;
}

RemotePlanner::RemotePlanner(std::string url, double timeout_s) : url_(std::move(url)), timeout_s_(timeout_s) {
    if (url_.rfind("http://", 0) != 0 && url_.rfind("https://", 0) != 0) {
        throw std::invalid_argument("planner url must start with http:// or https://: " + url_);
    }
    if (!(timeout_s_ > 0.0)) {
        throw std::invalid_argument("planner timeout must be positive");
    }
}

std::optional<RemotePlanner> RemotePlanner::from_env() {
    const char* url = std::getenv("STEER_PLANNER_URL");
    if (url == nullptr || *url == '\0') {
        return std::nullopt;
    }
    double timeout = 30.0;
    if (const char* t = std::getenv("STEER_PLANNER_TIMEOUT_S"); t != nullptr && *t != '\0') {
        timeout = std::stod(t);
    }
    return RemotePlanner(url, timeout);
}

std::string RemotePlanner::propose(const PlannerRequest& request) {
    const std::size_t scheme_end = url_.find("://") + 3;
    const std::size_t path_start = url_.find('/', scheme_end);
    const std::string base = url_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);

    httplib::Client client(base);
    const auto usec = std::chrono::microseconds(static_cast<long long>(timeout_s_ * 1e6));
    client.set_connection_timeout(usec);
    client.set_read_timeout(usec);
    client.set_write_timeout(usec);
    const auto res = client.Post(path, request_to_json(request), "application/json");
    if (!res) {
        throw PlannerError(PlannerError::Code::unreachable,
                           "planner at " + url_ + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw PlannerError(PlannerError::Code::malformed_response,
                           "planner answered HTTP " + std::to_string(res->status));
    }
    try {
        const json j = json::parse(res->body);
        return j.at("program").get<std::string>();
    } catch (const json::exception& e) {
        throw PlannerError(PlannerError::Code::malformed_response,
                           std::string("planner response is not {\"program\": string}: ") + e.what());
    }
}

InteractivePlanner::InteractivePlanner(std::chrono::milliseconds wait) : wait_(wait) {}

InteractivePlanner::InteractivePlanner(Callback callback) : callback_(std::move(callback)) {}

void InteractivePlanner::submit(std::string program) {
    {
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(program));
    }
    ready_.notify_one();
}

std::string InteractivePlanner::propose(const PlannerRequest& request) {
    if (callback_) {
        return callback_(request);
    }
    std::unique_lock lock(mutex_);
    if (!ready_.wait_for(lock, wait_, [this] { return !queue_.empty(); })) {
        throw PlannerError(PlannerError::Code::no_program, "no program was submitted in time");
    }
    std::string program = std::move(queue_.front());
    queue_.pop_front();
    return program;
}

ProposeResult propose_plan(Planner& planner, const PlannerRequest& request, const SceneState& scene,
                           const ProposeOptions& options) {
    ProposeResult result;
    PlannerRequest attempt = request;
    for (int i = 0; i <= options.max_retries; ++i) {
        ++result.attempts;
        std::string error;
        try {
            std::string text = planner.propose(attempt);
            Plan plan = parse_plan(text);
            const ValidationReport report = validate_plan(plan, scene);
            if (report.ok()) {
                result.plan = std::move(plan);
                return result;
            }
            error = report.summary();
        } catch (const PlannerError& e) {
            if (e.code() != PlannerError::Code::malformed_response) {
                throw;
            }
            error = e.what();
        } catch (const PlanParseError& e) {
            error = e.what();
        }
        result.rejected.push_back(trim(error));
        attempt.task = request.task + "\n\nThe previous program was rejected: " + trim(error) +
                       "\nReturn a corrected program.";
    }
    throw PlannerError(PlannerError::Code::retries_exhausted,
                       "no valid program after " + std::to_string(result.attempts) +
                           " attempts; last error: " + result.rejected.back());
}

void PlannerMemory::record(std::string task, std::string program, bool succeeded) {
    std::lock_guard lock(mutex_);
    entries_.push_back({std::move(task), std::move(program), succeeded, next_++});
}

std::vector<std::string> PlannerMemory::retrieve(std::string_view task, std::size_t k) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (auto it = entries_.rbegin(); it != entries_.rend() && out.size() < k; ++it) {
        if (it->succeeded && it->task == task) {
            out.push_back(it->program);
        }
    }
    return out;
}

std::vector<MemoryEntry> PlannerMemory::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t PlannerMemory::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::string default_system_prompt() {
    std::string p =
        "You control a robot arm through four skills. Write a program that solves the task, one call per line.\n"
        "\n"
        "Skills:\n"
        "  grasp(\"<object>\", \"<approach>\")     approach is \"top-down\", \"side\" or \"diagonal\"\n"
        "  reorient(\"<object>\", \"<direction>\") direction is \"horizontal\" or \"upright\"; the object must be held\n"
        "  lift(\"<object>\")                    raise the held object\n"
        "  place(\"<object>\")                   set the held object down and release it\n"
        "\n"
        "Rules:\n"
        "  Only one object can be held at a time. Grasp before reorient, lift or place, and place before\n"
        "  grasping something else. Use object names exactly as they appear in the scene.\n"
        "  Choose the grasp approach from what you know about the object: attachments, handles and\n"
        "  neighbouring objects decide which approach is safe.\n"
        "  Reply with the program only.\n"
        "\n"
        "Each call is executed by a policy that was trained on these instructions:\n";
    const std::vector<SkillCall> examples = {SkillCall::grasp("cup", GraspApproachClass::side),
                                             SkillCall::reorient("cup", ReorientDirection::to_horizontal),
                                             SkillCall::lift("cup"), SkillCall::place("cup")};
    for (const SkillCall& c : examples) {
        p += "  " + to_dsl(c) + "  ->  \"" + render_language(c) + "\"\n";
    }
    p += "\nExample, pouring from a cup:\n";
    for (const SkillCall& c : pour_plan("cup")) {
        p += "  " + to_dsl(c) + "\n";
    }
    return p;
}

std::string load_system_prompt(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read system prompt file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string scene_summary(const SceneState& scene) {
    std::string s = "scenario: " + scene.scenario + "\n";
    s += "objects:\n";
    for (const auto& [name, obj] : scene.objects) {
        s += "  - " + name + ": " + std::string(to_string(obj.orientation)) + " at (" + fmt3(obj.position.x) + ", " +
             fmt3(obj.position.y) + ", " + fmt3(obj.position.z) + ")" + (obj.held ? ", held" : "") + "\n";
    }
    const auto held = scene.held_object();
    s += "gripper: " + std::string(scene.gripper.aperture > 0.5 ? "open" : "closed") + ", holding " +
         (held ? *held : std::string("nothing")) + "\n";
    bool any = false;
    for (const GraspRule& r : scene.rules) {
        if (!r.hint.empty() && scene.objects.contains(r.object)) {
            if (!any) {
                s += "observations:\n";
                any = true;
            }
            s += "  - " + r.hint + "\n";
        }
    }
    return s;
}

PlannerRequest build_request(std::string task, const SceneState& scene, const PlannerMemory* memory, std::size_t k,
                             std::string system_prompt) {
    PlannerRequest r;
    r.system_prompt = std::move(system_prompt);
    r.scene_summary = scene_summary(scene);
    if (memory != nullptr) {
        r.examples = memory->retrieve(task, k);
    }
    r.task = std::move(task);
    return r;
}

}  // namespace steer
