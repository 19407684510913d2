#pragma once

#include <string>

#include "promptdag/episode.hpp"

namespace promptdag {

// Length-prefixed text framing over file descriptors: an 8-digit ASCII
// payload length, a newline, then the payload bytes. Example frame:
//   "00000014\n{\"op\":\"reset\"}"
void write_frame(int fd, const std::string& payload);

// Reads one frame; throws EnvironmentError on EOF or a malformed header.
std::string read_frame(int fd);

// Serves an environment over the framed protocol until a {"op":"quit"}
// request or EOF. Requests/responses are JSON objects:
//   {"op":"reset"}                          -> {"observation": …}
//   {"op":"step","action":…,"repeats":…}    -> {"observation","reward","done","info"}
//   {"op":"actions"}                        -> {"actions":[…]}
//   {"op":"manual"}                         -> {"manual": …}
//   {"op":"quit"}                           -> {"ok":true}
// Environment faults are reported as {"error": message} without closing the
// session.
void serve_env(EnvAdapter& env, int in_fd, int out_fd);

// Environment adapter speaking the framed protocol to a remote server, e.g.
// a child process running `promptdag env-serve`.
class StdioEnvClient : public EnvAdapter {
public:
    // Takes ownership of both descriptors.
    StdioEnvClient(int in_fd, int out_fd);

    // Spawns `command` via the shell with the protocol on its stdin/stdout.
    static StdioEnvClient spawn(const std::string& command);

    StdioEnvClient(StdioEnvClient&& other) noexcept;
    StdioEnvClient& operator=(StdioEnvClient&&) = delete;
    StdioEnvClient(const StdioEnvClient&) = delete;
    ~StdioEnvClient() override;

    std::string reset() override;
    StepOutcome step(const std::string& action, int repeats) override;
    std::vector<std::string> actions() const override;
    std::string manual() const override;

private:
    Json request(Json body) const;
    void close_fds();

    int in_fd_ = -1;
    int out_fd_ = -1;
    long child_pid_ = -1;  // waited on at destruction when >= 0
};

}  // namespace promptdag
