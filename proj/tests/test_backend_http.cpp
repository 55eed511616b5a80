#include "doctest.h"

#include "slicetype/backend.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

using namespace slicetype;
using json = nlohmann::json;

namespace {

/// Local chat-completion stub bound to an ephemeral port.
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};

    StubServer() {
        server.Post("/v1/chat/completions", [this](const httplib::Request &req,
                                                   httplib::Response &res) {
            ++requests;
            json body = json::parse(req.body);
            std::string prompt = body["messages"][0]["content"];
            json reply = {
                {"choices",
                 json::array({json{{"message", json{{"role", "assistant"},
                                                    {"content", "Echo:" + body["model"].get<std::string>()}}}}})},
            };
            res.set_content(reply.dump(), "application/json");
        });
        server.Post("/v1/broken/chat/completions",
                    [](const httplib::Request &, httplib::Response &res) {
                        res.set_content("not json", "text/plain");
                    });
        server.Post("/v1/flaky/chat/completions",
                    [](const httplib::Request &, httplib::Response &res) { res.status = 503; });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
};

} // namespace

TEST_SUITE("backend_http") {

TEST_CASE("the http backend posts a chat completion and reads the content") {
    StubServer stub;
    REQUIRE(stub.port > 0);
    HttpBackend backend("http://127.0.0.1:" + std::to_string(stub.port) + "/v1", "key", "test-model");
    SamplingConfig config;
    std::string out = backend.complete("what type?", config);
    CHECK(out == "Echo:test-model");
    CHECK(stub.requests.load() == 1);
}

TEST_CASE("http error statuses and malformed bodies map to typed errors") {
    StubServer stub;
    SamplingConfig config;
    SUBCASE("5xx raises a retriable backend error") {
        HttpBackend backend("http://127.0.0.1:" + std::to_string(stub.port) + "/v1/flaky", "", "m");
        CHECK_THROWS_AS(backend.complete("p", config), BackendError);
    }
    SUBCASE("non-JSON bodies raise a format error") {
        HttpBackend backend("http://127.0.0.1:" + std::to_string(stub.port) + "/v1/broken", "", "m");
        CHECK_THROWS_AS(backend.complete("p", config), FormatError);
    }
    SUBCASE("unreachable hosts raise a backend error") {
        HttpBackend backend("http://127.0.0.1:1", "", "m");
        CHECK_THROWS_AS(backend.complete("p", config), BackendError);
    }
}

TEST_CASE("backend selection: flags beat the environment, environment beats nothing") {
    ::setenv("SLICETYPE_API_BASE", "http://env-host:1234/v1", 1);
    ::setenv("SLICETYPE_MODEL", "env-model", 1);
    auto from_env = make_backend("http");
    CHECK(from_env->name() == "http");
    auto from_flags = make_backend("http", "", "http://flag-host:9/v1", "k", "flag-model");
    CHECK(from_flags->name() == "http");
    ::unsetenv("SLICETYPE_API_BASE");
    ::unsetenv("SLICETYPE_MODEL");
    CHECK_THROWS_AS(make_backend("http"), Error);
    CHECK_THROWS_AS(make_backend("nope"), Error);
    CHECK_THROWS_AS(make_backend("mock"), Error); // needs a mock file
}

} // TEST_SUITE
