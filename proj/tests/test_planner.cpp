#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "steer/planner.hpp"

using namespace steer;
using C = GraspApproachClass;

namespace {

/// Local HTTP planner that answers from a list of canned replies.
class MockPlannerServer {
public:
    explicit MockPlannerServer(std::vector<std::pair<int, std::string>> replies) : replies_(std::move(replies)) {
        server_.Post("/plan", [this](const httplib::Request& req, httplib::Response& res) {
            requests_.push_back(nlohmann::json::parse(req.body));
            const std::size_t i = std::min(calls_++, replies_.size() - 1);
            res.status = replies_[i].first;
            res.set_content(replies_[i].second, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockPlannerServer() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/plan"; }
    std::size_t calls() const { return calls_; }
    const std::vector<nlohmann::json>& requests() const { return requests_; }

private:
    httplib::Server server_;
    std::vector<std::pair<int, std::string>> replies_;
    std::vector<nlohmann::json> requests_;
    std::atomic<std::size_t> calls_{0};
    int port_ = 0;
    std::thread thread_;
};

std::string program_reply(const std::string& program) { return nlohmann::json{{"program", program}}.dump(); }

PlannerError::Code planner_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const PlannerError& e) {
        return e.code();
    }
    FAIL("expected a planner error");
    return PlannerError::Code::no_program;
}

}  // namespace

TEST_CASE("scripted planner yields the pour program") {
    ScriptedPlanner planner;
    const SceneState scene = reset("single_cup", 0);
    const ProposeResult r = propose_plan(planner, build_request("Pour from the cup", scene), scene);
    CHECK(r.plan.calls == pour_plan("cup"));
    CHECK(r.attempts == 1);
    CHECK(r.rejected.empty());
    CHECK(planner_error([&] { planner.propose(build_request("juggle", scene)); }) == PlannerError::Code::no_program);
    CHECK(planner_error([&] { propose_plan(planner, build_request("juggle", scene), scene); }) ==
          PlannerError::Code::no_program);
}

TEST_CASE("invalid plans are fed back and retried") {
    int calls = 0;
    std::vector<std::string> tasks;
    InteractivePlanner planner([&](const PlannerRequest& r) {
        tasks.push_back(r.task);
        return ++calls == 1 ? std::string(R"(grasp("cup", "sideways"))") : to_dsl(pour_plan("cup"));
    });
    const SceneState scene = reset("single_cup", 0);
    const ProposeResult r = propose_plan(planner, build_request("pour", scene), scene);
    CHECK(r.attempts == 2);
    REQUIRE(r.rejected.size() == 1);
    CHECK(r.rejected[0].find("invalid_modifier") != std::string::npos);
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0] == "pour");
    CHECK(tasks[1].rfind("pour\n\n", 0) == 0);
    CHECK(tasks[1].find("sideways") != std::string::npos);
}

TEST_CASE("validation errors are retried too and the budget is bounded") {
    int calls = 0;
    InteractivePlanner planner([&](const PlannerRequest&) {
        ++calls;
        return std::string(R"(lift("cup"))");
    });
    const SceneState scene = reset("single_cup", 0);
    CHECK(planner_error([&] { propose_plan(planner, build_request("pour", scene), scene); }) ==
          PlannerError::Code::retries_exhausted);
    CHECK(calls == 3);
    calls = 0;
    CHECK(planner_error([&] { propose_plan(planner, build_request("pour", scene), scene, {0}); }) ==
          PlannerError::Code::retries_exhausted);
    CHECK(calls == 1);
}

TEST_CASE("remote planner over HTTP") {
    const SceneState scene = reset("single_cup", 0);
    PlannerMemory memory;
    memory.record("pour", to_dsl(pour_plan("cup")), true);

    SUBCASE("recovers after one invalid modifier") {
        MockPlannerServer mock({{200, program_reply(R"(grasp("cup", "sideways"))")},
                                {200, program_reply(to_dsl(pour_plan("cup")))}});
        RemotePlanner planner(mock.url(), 5.0);
        const ProposeResult r = propose_plan(planner, build_request("pour", scene, &memory), scene);
        CHECK(r.plan.calls == pour_plan("cup"));
        CHECK(r.attempts == 2);
        REQUIRE(mock.requests().size() == 2);
        const nlohmann::json& first = mock.requests()[0];
        CHECK(first.at("task") == "pour");
        CHECK(first.at("examples") == nlohmann::json::array({to_dsl(pour_plan("cup"))}));
        CHECK(first.at("system_prompt") == default_system_prompt());
        CHECK(first.at("scene_summary") == scene_summary(scene));
        CHECK(first.size() == 4);
    }
    SUBCASE("gives up after three malformed replies") {
        MockPlannerServer mock({{200, R"({"plan": 1})"}});
        RemotePlanner planner(mock.url(), 5.0);
        CHECK(planner_error([&] { propose_plan(planner, build_request("pour", scene), scene); }) ==
              PlannerError::Code::retries_exhausted);
        CHECK(mock.calls() == 3);
    }
    SUBCASE("server errors count as malformed") {
        MockPlannerServer mock({{500, "oops"}});
        RemotePlanner planner(mock.url(), 5.0);
        CHECK(planner_error([&] { planner.propose(build_request("pour", scene)); }) ==
              PlannerError::Code::malformed_response);
    }
    SUBCASE("unreachable fails without retry") {
        httplib::Server probe;
        const int port = probe.bind_to_any_port("127.0.0.1");
        probe.stop();
        RemotePlanner planner("http://127.0.0.1:" + std::to_string(port) + "/plan", 1.0);
        CHECK(planner_error([&] { propose_plan(planner, build_request("pour", scene), scene); }) ==
              PlannerError::Code::unreachable);
    }
}

TEST_CASE("remote planner configuration") {
    CHECK_THROWS_AS(RemotePlanner("ftp://x", 1.0), std::invalid_argument);
    CHECK_THROWS_AS(RemotePlanner("http://x", 0.0), std::invalid_argument);
    ::unsetenv("STEER_PLANNER_URL");
    CHECK_FALSE(RemotePlanner::from_env());
    ::setenv("STEER_PLANNER_URL", "http://localhost:9/plan", 1);
    ::setenv("STEER_PLANNER_TIMEOUT_S", "2.5", 1);
    const auto p = RemotePlanner::from_env();
    REQUIRE(p);
    CHECK(p->url() == "http://localhost:9/plan");
    CHECK(p->kind() == "remote");
    ::unsetenv("STEER_PLANNER_URL");
    ::unsetenv("STEER_PLANNER_TIMEOUT_S");
}

TEST_CASE("request JSON round trip") {
    const PlannerRequest r{"sys", "scene", "task \"x\"", {"lift(\"a\")\n", "place(\"a\")\n"}};
    const nlohmann::json j = nlohmann::json::parse(request_to_json(r));
    CHECK(j.size() == 4);
    CHECK(j.at("examples").is_array());
    const PlannerRequest back = request_from_json(request_to_json(r));
    CHECK(back.system_prompt == r.system_prompt);
    CHECK(back.scene_summary == r.scene_summary);
    CHECK(back.task == r.task);
    CHECK(back.examples == r.examples);
}

TEST_CASE("memory retrieval") {
    PlannerMemory m;
    m.record("pour", "a", true);
    m.record("pour", "b", false);
    m.record("other", "c", true);
    m.record("pour", "d", true);
    m.record("pour", "e", true);
    m.record("pour", "f", true);
    CHECK(m.retrieve("pour") == std::vector<std::string>{"f", "e", "d"});
    CHECK(m.retrieve("pour", 10) == std::vector<std::string>{"f", "e", "d", "a"});
    CHECK(m.retrieve("Pour").empty());
    CHECK(m.size() == 6);
    CHECK(m.entries()[1].succeeded == false);

    const SceneState scene = reset("single_cup", 0);
    CHECK(build_request("pour", scene, &m, 2).examples == std::vector<std::string>{"f", "e"});
    CHECK(build_request("pour", scene).examples.empty());
}

TEST_CASE("interactive planner queue") {
    InteractivePlanner waiting(std::chrono::milliseconds(20));
    CHECK(planner_error([&] { waiting.propose({}); }) == PlannerError::Code::no_program);
    InteractivePlanner planner(std::chrono::seconds(5));
    std::thread feeder([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        planner.submit("first");
        planner.submit("second");
    });
    CHECK(planner.propose({}) == "first");
    feeder.join();
    CHECK(planner.propose({}) == "second");
    CHECK(planner.kind() == "interactive");
}

TEST_CASE("system prompt") {
    const std::string p = default_system_prompt();
    for (const char* s : {"grasp(", "reorient(", "lift(", "place(", "top-down", "diagonal", "horizontal",
                          "grasp the cup in a side grasp", "hold and lift the cup"}) {
        CHECK_MESSAGE(p.find(s) != std::string::npos, s);
    }
    CHECK(load_system_prompt(STEER_SOURCE_DIR "/data/system_prompt.txt") == p);
    CHECK_THROWS(load_system_prompt("/nonexistent/prompt.txt"));
}

TEST_CASE("scene summary") {
    const std::string plant = scene_summary(reset("potted_plant", 0));
    CHECK(plant.find("flower pot") != std::string::npos);
    CHECK(plant.find("holding nothing") != std::string::npos);
    CHECK(plant.find("observations:") != std::string::npos);
    SceneState s = reset("single_cup", 0);
    CHECK(scene_summary(s).find("observations:") == std::string::npos);
    exec_grasp(s, "cup", C::side);
    CHECK(scene_summary(s).find("holding cup") != std::string::npos);
    CHECK(scene_summary(s).find("upright") != std::string::npos);
}
