#include <doctest.h>

#include <filesystem>
#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <httplib.h>

#include "steer/gateway.hpp"

using namespace steer;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

int api_status(const std::function<void()>& f, std::string* code = nullptr) {
    try {
        f();
    } catch (const ApiError& e) {
        if (code != nullptr) {
            *code = e.code();
        }
        return e.status();
    }
    FAIL("expected an API error");
    return 0;
}

std::string new_session(SessionManager& m, const std::string& scenario = "single_cup", int seed = 0) {
    return m.create_session({{"scenario", scenario}, {"seed", seed}})["session_id"].get<std::string>();
}

json skill(const std::string& name, const std::string& object, const std::string& modifier = "") {
    json j = {{"skill", name}, {"object", object}};
    if (!modifier.empty()) {
        j["modifier"] = modifier;
    }
    return j;
}

std::vector<json> drain(const SessionManager& m, const std::string& id, std::uint64_t& cursor) {
    std::vector<json> out;
    for (const std::string& e : m.next_events(id, cursor, 0ms)) {
        out.push_back(json::parse(e));
    }
    return out;
}

}  // namespace

TEST_CASE("sessions start from reset") {
    SessionManager m;
    const ojson created = m.create_session({{"scenario", "single_cup"}, {"seed", 7}});
    const std::string id = created["session_id"];
    CHECK(created["state"] == to_json(reset("single_cup", 7)));
    CHECK(m.state(id) == to_json(reset("single_cup", 7)));
    CHECK(new_session(m) != id);

    std::string code;
    CHECK(api_status([&] { m.create_session({{"scenario", "moon"}}); }, &code) == 400);
    CHECK(code == "unknown_scenario");
    CHECK(api_status([&] { m.create_session({{"seed", 1}}); }) == 400);
    CHECK(api_status([&] { m.create_session({{"scenario", "single_cup"}, {"seed", -1}}); }) == 400);
    CHECK(api_status([&] { m.create_session(json::array()); }) == 400);
    CHECK(api_status([&] { m.state("s999999"); }, &code) == 404);
    CHECK(code == "session_not_found");
}

TEST_CASE("posting skills") {
    SessionManager m;
    const std::string id = new_session(m);
    const ojson r = m.post_skill(id, skill("grasp", "cup", "side"));
    CHECK(r["language"] == "grasp the cup in a side grasp");
    CHECK(r["outcome"]["success"] == true);
    CHECK(r["state"]["held_object"] == "cup");
    CHECK(m.state(id) == r["state"]);

    std::string code;
    const std::string other = new_session(m);
    const ojson before = m.state(other);
    CHECK(api_status([&] { m.post_skill(other, skill("lift", "cup")); }, &code) == 409);
    CHECK(code == "skill_rejected");
    CHECK(m.state(other) == before);
    CHECK(api_status([&] { m.post_skill(other, skill("grasp", "cup", "sideways")); }, &code) == 422);
    CHECK(code == "invalid_call");
    CHECK(api_status([&] { m.post_skill(other, skill("grasp", "cup")); }) == 422);
    CHECK(api_status([&] { m.post_skill(other, {{"object", "cup"}}); }) == 422);
    CHECK(api_status([&] { m.post_skill("nope", skill("lift", "cup")); }) == 404);
    CHECK(m.history(other)["entries"].empty());
}

TEST_CASE("plans") {
    SessionManager m(GatewayOptions{}, std::make_shared<ScriptedPlanner>());
    const std::string id = new_session(m);
    const ojson v = m.post_plan(id, {{"program", to_dsl(pour_plan("cup"))}, {"mode", "validate_only"}});
    CHECK(v["validation"]["ok"] == true);
    CHECK(v["validation"]["errors"].empty());
    CHECK(v["calls"].size() == 5);
    CHECK_FALSE(v.contains("log"));
    CHECK(m.state(id) == to_json(reset("single_cup", 0)));

    std::string code;
    try {
        m.post_plan(id, {{"program", R"(grasp("cup", "sideways"))"}});
        FAIL("no error");
    } catch (const ApiError& e) {
        CHECK(e.status() == 400);
        CHECK(e.code() == "parse_error");
        CHECK(e.detail()["code"] == "invalid_modifier");
        CHECK(e.detail()["line"] == 1);
    }
    CHECK(api_status([&] { m.post_plan(id, {{"program", R"(lift("cup"))"}, {"mode", "execute"}}); }, &code) == 422);
    CHECK(code == "plan_invalid");
    CHECK(api_status([&] { m.post_plan(id, {{"program", "lift(\"cup\")"}, {"mode", "run"}}); }) == 400);
    CHECK(api_status([&] { m.post_plan(id, json::object()); }) == 400);
    CHECK(api_status([&] { m.post_plan(id, {{"task", "juggle"}}); }, &code) == 422);
    CHECK(code == "no_program");
    CHECK(api_status([&] { m.post_outcome(id, {{"succeeded", true}}); }, &code) == 409);
    CHECK(code == "no_executed_plan");

    const ojson x = m.post_plan(id, {{"task", "pour from the cup"}, {"mode", "execute"}});
    CHECK(x["planner"]["kind"] == "scripted");
    CHECK(x["log"]["completed"] == true);
    CHECK(x["log"]["entries"].size() == 5);
    CHECK(x["state"]["objects"]["cup"]["orientation"] == "upright");
    CHECK(m.history(id)["entries"].size() == 5);
}

TEST_CASE("plan without a planner needs a program") {
    SessionManager m;
    const std::string id = new_session(m);
    CHECK(api_status([&] { m.post_plan(id, {{"task", "pour from the cup"}}); }) == 400);
}

TEST_CASE("failed plans halt") {
    SessionManager m;
    const std::string id = new_session(m, "potted_plant");
    const ojson x = m.post_plan(
        id, {{"program", R"(grasp("flower pot", "top-down") lift("flower pot"))"}, {"mode", "execute"}});
    CHECK(x["log"]["completed"] == false);
    CHECK(x["log"]["halted_at"] == 0);
    CHECK(x["log"]["entries"].size() == 1);
    CHECK(x["log"]["entries"][0]["reason"] == "disturbed attachment");
}

TEST_CASE("outcomes feed planner memory") {
    SessionManager m(GatewayOptions{}, std::make_shared<ScriptedPlanner>());
    const std::string id = new_session(m);
    m.post_plan(id, {{"task", "pour from the cup"}, {"mode", "execute"}});
    const ojson o = m.post_outcome(id, {{"succeeded", true}});
    CHECK(o["task"] == "pour from the cup");
    CHECK(o["program"] == to_dsl(pour_plan("cup")));

    const std::string next = new_session(m);
    const ojson p = m.post_plan(next, {{"task", "pour from the cup"}});
    CHECK(p["planner"]["examples"] == ojson::array({to_dsl(pour_plan("cup"))}));

    const std::string third = new_session(m);
    m.post_plan(third, {{"program", to_dsl(pour_plan("cup"))}, {"mode", "execute"}});
    CHECK(api_status([&] { m.post_outcome(third, {{"succeeded", true}}); }) == 400);
    m.post_outcome(third, {{"succeeded", false}, {"task", "pour from the cup"}});
    CHECK(m.memory().retrieve("pour from the cup").size() == 1);
    CHECK(api_status([&] { m.post_outcome(third, {{"succeeded", "yes"}}); }) == 400);
}

TEST_CASE("replay reproduces the final state") {
    const auto dir = std::filesystem::temp_directory_path() / ("steer_gateway_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    GatewayOptions options;
    options.persist_dir = dir.string();
    SessionManager m(options);
    const std::string id = new_session(m, "clutter", 3);
    m.post_skill(id, skill("grasp", "apple", "top-down"));
    m.post_skill(id, skill("lift", "apple"));
    try {
        m.post_skill(id, skill("grasp", "sponge", "side"));
    } catch (const ApiError&) {
    }
    m.post_skill(id, skill("place", "apple"));
    const ojson final_state = m.state(id);
    CHECK(to_json(replay_history(json::parse(m.history(id).dump()))) == final_state);
    const json persisted = read_session_file((dir / (id + ".jsonl")).string());
    CHECK(persisted["entries"].size() == m.history(id)["entries"].size());
    CHECK(to_json(replay_history(persisted)) == final_state);
    std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent commands are serialized") {
    SessionManager m;
    const std::string id = new_session(m);
    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&] {
            for (int k = 0; k < 5; ++k) {
                try {
                    m.post_skill(id, skill("grasp", "cup", "side"));
                    m.post_skill(id, skill("place", "cup"));
                } catch (const ApiError&) {
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    const ojson h = m.history(id);
    int step = 0;
    for (const auto& e : h["entries"]) {
        step += e["steps"].get<int>();
        CHECK(e["step"] == step);
    }
    CHECK(m.state(id)["step"] == step);
}

TEST_CASE("event stream") {
    SessionManager m;
    const std::string id = new_session(m);
    std::uint64_t a = m.subscribe(id);
    std::uint64_t b = m.subscribe(id);
    CHECK(a == 0);
    const ojson r = m.post_skill(id, skill("grasp", "cup", "side"));
    const ojson r2 = m.post_skill(id, skill("lift", "cup"));
    const std::vector<json> events = drain(m, id, a);
    const std::size_t n = r["outcome"]["steps"].get<std::size_t>() + r2["outcome"]["steps"].get<std::size_t>();
    REQUIRE(events.size() == n);
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i]["type"] == "event");
        CHECK(events[i]["seq"] == i + 1);
        CHECK(events[i]["step"] == i + 1);
    }
    const std::size_t first = r["outcome"]["steps"].get<std::size_t>();
    CHECK(events[0]["last_outcome"].is_null());
    CHECK(events[first - 1]["last_outcome"]["language"] == "grasp the cup in a side grasp");
    CHECK(events[first]["last_outcome"]["language"] == "grasp the cup in a side grasp");
    CHECK(events.back()["last_outcome"]["language"] == "hold and lift the cup");
    CHECK(events.back()["scene"] == json::parse(m.state(id).dump()));
    CHECK(drain(m, id, b) == events);
    CHECK(drain(m, id, a).empty());

    const ojson snap = m.snapshot(id);
    CHECK(snap["type"] == "snapshot");
    CHECK(snap["seq"] == n);
    CHECK(snap["scene"] == m.state(id));
    CHECK(api_status([&] { m.subscribe("s999999"); }) == 404);

    std::uint64_t c = m.subscribe(id);
    std::thread later([&] {
        std::this_thread::sleep_for(30ms);
        m.post_skill(id, skill("place", "cup"));
    });
    CHECK_FALSE(m.next_events(id, c, 5s).empty());
    later.join();
}

TEST_CASE("HTTP and websocket server") {
    namespace beast = boost::beast;
    namespace websocket = beast::websocket;
    using tcp = boost::asio::ip::tcp;

    SessionManager m(GatewayOptions{}, std::make_shared<ScriptedPlanner>());
    GatewayServer server(m, "127.0.0.1", 0);
    server.start();
    const int port = server.port();
    httplib::Client http("127.0.0.1", port);

    auto res = http.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
    res = http.Get("/anchors");
    REQUIRE(res);
    CHECK(json::parse(res->body).size() == 26);
    res = http.Get("/scenarios");
    CHECK(json::parse(res->body)["scenarios"].size() == 5);

    res = http.Post("/sessions", R"({"scenario": "single_cup"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    const std::string id = json::parse(res->body)["session_id"];

    res = http.Post("/sessions", "{not json", "application/json");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["code"] == "bad_request");
    res = http.Get("/sessions");
    CHECK(res->status == 405);
    res = http.Get("/sessions/" + id + "/skill");
    CHECK(res->status == 405);
    res = http.Get("/nowhere");
    CHECK(res->status == 404);
    res = http.Get("/sessions/s999999/state");
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["code"] == "session_not_found");
    CHECK(json::parse(res->body).contains("detail"));
    res = http.Get("/sessions/" + id + "/stream");
    CHECK(res->status == 426);
    res = http.Options("/sessions");
    CHECK(res->status == 204);

    boost::asio::io_context ioc;
    tcp::resolver resolver(ioc);
    websocket::stream<tcp::socket> ws(ioc);
    boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/sessions/" + id + "/stream");
    beast::flat_buffer buf;
    ws.read(buf);
    const json snap = json::parse(beast::buffers_to_string(buf.data()));
    buf.consume(buf.size());
    CHECK(snap["type"] == "snapshot");
    CHECK(snap["seq"] == 0);

    res = http.Post("/sessions/" + id + "/skill", R"({"skill": "grasp", "object": "cup", "modifier": "side"})",
                    "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const std::size_t steps = json::parse(res->body)["outcome"]["steps"];
    res = http.Post("/sessions/" + id + "/skill", R"({"skill": "lift", "object": "mug"})", "application/json");
    CHECK(res->status == 409);

    for (std::size_t i = 1; i <= steps; ++i) {
        ws.read(buf);
        const json e = json::parse(beast::buffers_to_string(buf.data()));
        buf.consume(buf.size());
        CHECK(e["seq"] == i);
    }

    res = http.Post("/sessions/" + id + "/plan", R"j({"program": "place(\"cup\")", "mode": "execute"})j",
                    "application/json");
    CHECK(res->status == 200);
    res = http.Get("/sessions/" + id + "/history");
    CHECK(json::parse(res->body)["entries"].size() == 2);

    server.stop();
    beast::error_code ec;
    // Remaining frames, then the close frame.
    while (!ec) {
        ws.read(buf, ec);
        buf.consume(buf.size());
    }
    // The server's close frame arrived; the transport error after it is the
    // client's own teardown.
    CHECK(ec);
    CHECK(ws.reason().code == websocket::close_code::going_away);
}
