#include <poll.h>
#include <sys/socket.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "steer/gateway.hpp"

namespace steer {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

struct GatewayServer::Impl {
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::atomic<bool> stopped{false};
    std::thread runner;

    std::mutex mutex;  // guards the connection bookkeeping below
    std::map<std::uint64_t, std::thread> threads;
    std::map<std::uint64_t, int> fds;
    std::vector<std::uint64_t> finished;
    std::uint64_t next = 0;

    void reap() {
        std::vector<std::thread> done;
        {
            std::lock_guard lock(mutex);
            for (const std::uint64_t id : finished) {
                done.push_back(std::move(threads.at(id)));
                threads.erase(id);
            }
            finished.clear();
        }
        for (std::thread& t : done) {
            t.join();
        }
    }
};

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

std::vector<std::string> split_path(std::string_view target) {
    target = target.substr(0, target.find('?'));
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < target.size()) {
        const std::size_t j = target.find('/', i);
        const std::size_t end = j == std::string_view::npos ? target.size() : j;
        if (end > i) {
            parts.emplace_back(target.substr(i, end - i));
        }
        i = end + 1;
    }
    return parts;
}

Response make_response(const Request& req, http::status status, const std::string& body) {
    Response res{status, req.version()};
    res.set(http::field::server, "steer");
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body;
    res.prepare_payload();
    return res;
}

json parse_body(const Request& req) {
    if (req.body().empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body());
    } catch (const json::exception& e) {
        throw ApiError(400, "bad_request", "request body is not valid JSON", {{"parser", e.what()}});
    }
}

void require_method(const Request& req, http::verb verb) {
    if (req.method() != verb) {
        throw ApiError(405, "method_not_allowed",
                       std::string(req.method_string()) + " not allowed on " + std::string(req.target()));
    }
}

Response route(SessionManager& sessions, const Request& req) {
    if (req.method() == http::verb::options) {
        Response res = make_response(req, http::status::no_content, "");
        res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
        return res;
    }
    try {
        const std::vector<std::string> p = split_path(std::string_view(req.target().data(), req.target().size()));
        ojson out;
        http::status status = http::status::ok;
        if (p.size() == 1 && p[0] == "health") {
            require_method(req, http::verb::get);
            out = {{"ok", true}};
        } else if (p.size() == 1 && p[0] == "scenarios") {
            require_method(req, http::verb::get);
            out = {{"scenarios", sessions.scenario_names()}};
        } else if (p.size() == 1 && p[0] == "anchors") {
            require_method(req, http::verb::get);
            out = ojson::array();
            for (const Anchor& a : default_anchors()) {
                out.push_back(to_json(a));
            }
        } else if (p.size() == 1 && p[0] == "sessions") {
            require_method(req, http::verb::post);
            out = sessions.create_session(parse_body(req));
            status = http::status::created;
        } else if (p.size() == 3 && p[0] == "sessions") {
            const std::string& id = p[1];
            const std::string& what = p[2];
            if (what == "state") {
                require_method(req, http::verb::get);
                out = sessions.state(id);
            } else if (what == "history") {
                require_method(req, http::verb::get);
                out = sessions.history(id);
            } else if (what == "skill") {
                require_method(req, http::verb::post);
                out = sessions.post_skill(id, parse_body(req));
            } else if (what == "plan") {
                require_method(req, http::verb::post);
                out = sessions.post_plan(id, parse_body(req));
            } else if (what == "outcome") {
                require_method(req, http::verb::post);
                out = sessions.post_outcome(id, parse_body(req));
            } else if (what == "stream") {
                sessions.subscribe(id);  // 404 for unknown sessions
                throw ApiError(426, "upgrade_required", "the stream is a websocket endpoint");
            } else {
                throw ApiError(404, "not_found", "no route for " + std::string(req.target()));
            }
        } else {
            throw ApiError(404, "not_found", "no route for " + std::string(req.target()));
        }
        return make_response(req, status, out.dump());
    } catch (const ApiError& e) {
        return make_response(req, static_cast<http::status>(e.status()), e.body().dump());
    } catch (const std::exception& e) {
        const ApiError internal(500, "internal_error", e.what());
        return make_response(req, http::status::internal_server_error, internal.body().dump());
    }
}

bool readable(int fd) {
    pollfd pfd{fd, POLLIN, 0};
    return ::poll(&pfd, 1, 0) > 0;
}

void serve_stream(SessionManager& sessions, tcp::socket socket, const Request& req, const std::string& id) {
    const int fd = socket.native_handle();
    websocket::stream<tcp::socket> ws(std::move(socket));
    // Cursor is fixed before the handshake so no event between the snapshot
    // and the first wait is lost or repeated.
    const ojson snapshot = sessions.snapshot(id);
    std::uint64_t cursor = snapshot["seq"].get<std::uint64_t>();
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) {
        return;
    }
    ws.text(true);
    ws.write(asio::buffer(snapshot.dump()), ec);
    beast::flat_buffer incoming;
    const auto going_away = [&] {
        // The read side may already be shut down; the close frame still goes out.
        beast::error_code ignored;
        ws.close(websocket::close_code::going_away, ignored);
    };
    while (!ec) {
        for (const std::string& event : sessions.next_events(id, cursor, std::chrono::milliseconds(100))) {
            ws.write(asio::buffer(event), ec);
            if (ec) {
                return;
            }
        }
        if (sessions.stopping()) {
            going_away();
            return;
        }
        // Client frames are ignored, but reading them processes close and ping.
        while (!ec && readable(fd)) {
            ws.read(incoming, ec);
            incoming.consume(incoming.size());
        }
        if (ec && sessions.stopping()) {
            going_away();
        }
    }
}

void serve_http(SessionManager& sessions, tcp::socket socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    while (true) {
        Request req;
        http::read(socket, buffer, req, ec);
        if (ec) {
            break;
        }
        if (websocket::is_upgrade(req)) {
            const std::vector<std::string> p = split_path(std::string_view(req.target().data(), req.target().size()));
            if (p.size() == 3 && p[0] == "sessions" && p[2] == "stream") {
                try {
                    sessions.subscribe(p[1]);
                } catch (const ApiError& e) {
                    http::write(socket, make_response(req, static_cast<http::status>(e.status()), e.body().dump()), ec);
                    break;
                }
                serve_stream(sessions, std::move(socket), req, p[1]);
                return;
            }
            const ApiError e(404, "not_found", "no stream at " + std::string(req.target()));
            http::write(socket, make_response(req, http::status::not_found, e.body().dump()), ec);
            break;
        }
        const Response res = route(sessions, req);
        http::write(socket, res, ec);
        if (ec || !res.keep_alive()) {
            break;
        }
    }
    socket.shutdown(tcp::socket::shutdown_both, ec);
}

}  // namespace

GatewayServer::GatewayServer(SessionManager& sessions, const std::string& address, unsigned short port)
    : sessions_(sessions), impl_(std::make_unique<Impl>()) {
    const tcp::endpoint endpoint(asio::ip::make_address(address), port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    port_ = impl_->acceptor.local_endpoint().port();
}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::run() {
    while (!impl_->stopped) {
        tcp::socket socket(impl_->ioc);
        beast::error_code ec;
        impl_->acceptor.accept(socket, ec);
        impl_->reap();
        if (ec) {
            if (impl_->stopped) {
                break;
            }
            continue;
        }
        std::lock_guard lock(impl_->mutex);
        const std::uint64_t id = impl_->next++;
        impl_->fds[id] = socket.native_handle();
        impl_->threads[id] = std::thread([this, id, s = std::move(socket)]() mutable {
            serve_http(sessions_, std::move(s));
            std::lock_guard done(impl_->mutex);
            impl_->fds.erase(id);
            impl_->finished.push_back(id);
        });
    }
}

void GatewayServer::start() {
    impl_->runner = std::thread([this] { run(); });
}

void GatewayServer::stop() {
    if (impl_->stopped.exchange(true)) {
        return;
    }
    sessions_.shutdown();
    // shutdown(2) wakes the blocking accept and every blocking read. Only the
    // read side of connections is closed so streams can still send a close frame.
    ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
    {
        std::lock_guard lock(impl_->mutex);
        for (const auto& [id, fd] : impl_->fds) {
            ::shutdown(fd, SHUT_RD);
        }
    }
    if (impl_->runner.joinable()) {
        impl_->runner.join();
    }
    std::map<std::uint64_t, std::thread> threads;
    {
        std::lock_guard lock(impl_->mutex);
        threads.swap(impl_->threads);
    }
    for (auto& [id, t] : threads) {
        t.join();
    }
    beast::error_code ec;
    impl_->acceptor.close(ec);
}

}  // namespace steer
