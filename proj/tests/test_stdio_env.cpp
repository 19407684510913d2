#include <unistd.h>

#include <thread>

#include "doctest.h"
#include "promptdag/miniforage.hpp"
#include "promptdag/stdio_env.hpp"

using namespace promptdag;

namespace {

struct Pipe {
    int fds[2] = {-1, -1};
    Pipe() { REQUIRE(pipe(fds) == 0); }
    ~Pipe() {
        for (int fd : fds)
            if (fd >= 0) close(fd);
    }
    int read_end() { return fds[0]; }
    int write_end() { return fds[1]; }
    void release(int fd) {
        if (fds[0] == fd) fds[0] = -1;
        if (fds[1] == fd) fds[1] = -1;
    }
};

}  // namespace

TEST_CASE("frames round-trip, including empty and multi-kilobyte payloads") {
    Pipe p;
    for (const std::string payload : {std::string{}, std::string{"{\"op\":\"reset\"}"}}) {
        write_frame(p.write_end(), payload);
        CHECK(read_frame(p.read_end()) == payload);
    }
    // Larger than the pipe buffer: writer must run concurrently.
    const std::string big(256 * 1024, 'x');
    std::thread writer([&] { write_frame(p.write_end(), big); });
    CHECK(read_frame(p.read_end()) == big);
    writer.join();
}

TEST_CASE("reading a frame from a closed pipe reports the hangup") {
    Pipe p;
    close(p.write_end());
    p.release(p.fds[1]);
    CHECK_THROWS_AS(read_frame(p.read_end()), EnvironmentError);
}

TEST_CASE("a malformed header is rejected") {
    Pipe p;
    const char junk[] = "not-a-len\n";
    REQUIRE(write(p.write_end(), junk, sizeof junk - 1) == sizeof junk - 1);
    CHECK_THROWS_AS(read_frame(p.read_end()), EnvironmentError);
}

TEST_CASE("served environment speaks the full protocol") {
    Pipe to_server, from_server;
    MiniForage env(0);
    std::thread server([&] { serve_env(env, to_server.read_end(), from_server.write_end()); });

    auto request = [&](const Json& body) {
        write_frame(to_server.write_end(), body.dump());
        return Json::parse(read_frame(from_server.read_end()));
    };

    Json reset = request(Json{{"op", "reset"}});
    REQUIRE(reset.contains("observation"));
    CHECK(reset["observation"].get<std::string>().find("tree 2 steps west") !=
          std::string::npos);

    Json acts = request(Json{{"op", "actions"}});
    CHECK(acts["actions"].size() == 9);

    Json manual = request(Json{{"op", "manual"}});
    CHECK(manual["manual"].get<std::string>().find("MiniForage") != std::string::npos);

    Json step = request(Json{{"op", "step"}, {"action", "move_west"}, {"repeats", 2}});
    CHECK(step["info"]["applied"] == 1);
    CHECK(step["info"]["blocked"] == true);
    CHECK(step["reward"] == 0.0);
    CHECK(step["done"] == false);

    // Faults come back as error payloads and leave the session alive.
    Json fault = request(Json{{"op", "step"}, {"action", "fly"}, {"repeats", 1}});
    REQUIRE(fault.contains("error"));
    CHECK(fault["error"].get<std::string>().find("fly") != std::string::npos);

    Json unknown_op = request(Json{{"op", "dance"}});
    CHECK(unknown_op.contains("error"));

    Json still_alive = request(Json{{"op", "step"}, {"action", "do"}, {"repeats", 1}});
    CHECK(still_alive["reward"] == 1.0);  // first wood: the session survived the faults

    Json quit = request(Json{{"op", "quit"}});
    CHECK(quit["ok"] == true);
    server.join();
}

TEST_CASE("server returns when the peer hangs up") {
    Pipe to_server, from_server;
    MiniForage env(0);
    std::thread server([&] { serve_env(env, to_server.read_end(), from_server.write_end()); });
    close(to_server.write_end());
    to_server.release(to_server.fds[1]);
    server.join();  // EOF must end the loop, not spin or throw
    CHECK(true);
}

TEST_CASE("stdio client adapter drives a served environment end to end") {
    Pipe to_server, from_server;
    MiniForage env(0);
    std::thread server([&] { serve_env(env, to_server.read_end(), from_server.write_end()); });

    {
        StdioEnvClient client(from_server.read_end(), to_server.write_end());
        from_server.release(from_server.fds[0]);
        to_server.release(to_server.fds[1]);

        std::string obs = client.reset();
        CHECK(obs.find("You see") != std::string::npos);
        CHECK(client.actions().size() == 9);
        CHECK(client.manual().find("survival manual") != std::string::npos);

        StepOutcome out = client.step("move_west", 2);
        CHECK(out.info["applied"] == 1);
        CHECK(out.reward == doctest::Approx(0.0));

        CHECK_THROWS_AS(client.step("fly", 1), EnvironmentError);
    }  // destructor sends quit
    server.join();
}

#ifdef PROMPTDAG_CLI_PATH
TEST_CASE("spawned env-serve child process hosts a full exchange") {
    StdioEnvClient client =
        StdioEnvClient::spawn(std::string(PROMPTDAG_CLI_PATH) + " env-serve --env miniforage:0");
    std::string obs = client.reset();
    CHECK(obs.find("tree 2 steps west") != std::string::npos);
    StepOutcome out = client.step("move_west", 2);
    CHECK(out.info["blocked"] == true);
    CHECK(client.actions().size() == 9);
}
#endif
