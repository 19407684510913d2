#include "promptdag/stdio_env.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>

namespace promptdag {

namespace {

constexpr int kHeaderDigits = 8;
constexpr std::size_t kMaxFrame = 64u * 1024u * 1024u;

void write_all(int fd, const char* data, std::size_t size) {
    while (size > 0) {
        ssize_t n = ::write(fd, data, size);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw EnvironmentError(std::string("frame write failed: ") + std::strerror(errno));
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

// False only on clean EOF at the first byte.
bool read_all(int fd, char* data, std::size_t size) {
    std::size_t got = 0;
    while (got < size) {
        ssize_t n = ::read(fd, data + got, size - got);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw EnvironmentError(std::string("frame read failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            if (got == 0) return false;
            throw EnvironmentError("frame truncated mid-payload");
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

void write_frame(int fd, const std::string& payload) {
    char header[kHeaderDigits + 2];
    std::snprintf(header, sizeof(header), "%08zu\n", payload.size());
    write_all(fd, header, kHeaderDigits + 1);
    write_all(fd, payload.data(), payload.size());
}

std::string read_frame(int fd) {
    char header[kHeaderDigits + 1];
    if (!read_all(fd, header, kHeaderDigits + 1))
        throw EnvironmentError("frame stream closed");
    if (header[kHeaderDigits] != '\n')
        throw EnvironmentError("malformed frame header: missing newline");
    std::size_t size = 0;
    for (int i = 0; i < kHeaderDigits; ++i) {
        if (header[i] < '0' || header[i] > '9')
            throw EnvironmentError("malformed frame header: non-digit length");
        size = size * 10 + static_cast<std::size_t>(header[i] - '0');
    }
    if (size > kMaxFrame) throw EnvironmentError("frame exceeds size limit");
    std::string payload(size, '\0');
    if (size > 0 && !read_all(fd, payload.data(), size))
        throw EnvironmentError("frame stream closed");
    return payload;
}

void serve_env(EnvAdapter& env, int in_fd, int out_fd) {
    while (true) {
        std::string raw;
        try {
            raw = read_frame(in_fd);
        } catch (const EnvironmentError&) {
            return;  // peer hung up
        }
        Json request = Json::parse(raw, nullptr, false);
        Json response;
        if (request.is_discarded() || !request.is_object() || !request.contains("op") ||
            !request.at("op").is_string()) {
            response = Json{{"error", "request must be a JSON object with a string 'op'"}};
            write_frame(out_fd, response.dump());
            continue;
        }
        std::string op = request.at("op").get<std::string>();
        if (op == "quit") {
            write_frame(out_fd, Json{{"ok", true}}.dump());
            return;
        }
        try {
            if (op == "reset") {
                response = Json{{"observation", env.reset()}};
            } else if (op == "actions") {
                response = Json{{"actions", env.actions()}};
            } else if (op == "manual") {
                response = Json{{"manual", env.manual()}};
            } else if (op == "step") {
                if (!request.contains("action") || !request.at("action").is_string() ||
                    !request.contains("repeats") || !request.at("repeats").is_number_integer())
                    throw EnvironmentError("step needs a string 'action' and integer 'repeats'");
                StepOutcome out = env.step(request.at("action").get<std::string>(),
                                           request.at("repeats").get<int>());
                response = Json{{"observation", out.observation},
                                {"reward", out.reward},
                                {"done", out.done},
                                {"info", out.info}};
            } else {
                response = Json{{"error", "unknown op '" + op + "'"}};
            }
        } catch (const std::exception& e) {
            response = Json{{"error", e.what()}};
        }
        write_frame(out_fd, response.dump());
    }
}

// ---------------------------------------------------------------------------
// Client

StdioEnvClient::StdioEnvClient(int in_fd, int out_fd) : in_fd_(in_fd), out_fd_(out_fd) {}

StdioEnvClient::StdioEnvClient(StdioEnvClient&& other) noexcept
    : in_fd_(other.in_fd_), out_fd_(other.out_fd_), child_pid_(other.child_pid_) {
    other.in_fd_ = -1;
    other.out_fd_ = -1;
    other.child_pid_ = -1;
}

StdioEnvClient StdioEnvClient::spawn(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
        throw EnvironmentError(std::string("pipe failed: ") + std::strerror(errno));
    pid_t pid = ::fork();
    if (pid < 0) throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    StdioEnvClient client(from_child[0], to_child[1]);
    client.child_pid_ = pid;
    return client;
}

void StdioEnvClient::close_fds() {
    if (out_fd_ >= 0) ::close(out_fd_);
    if (in_fd_ >= 0) ::close(in_fd_);
    out_fd_ = -1;
    in_fd_ = -1;
}

StdioEnvClient::~StdioEnvClient() {
    if (out_fd_ >= 0) {
        try {
            write_frame(out_fd_, Json{{"op", "quit"}}.dump());
            read_frame(in_fd_);
        } catch (const std::exception&) {
            // Peer already gone; nothing to clean up beyond the descriptors.
        }
    }
    close_fds();
    if (child_pid_ >= 0) {
        int status = 0;
        ::waitpid(static_cast<pid_t>(child_pid_), &status, 0);
    }
}

Json StdioEnvClient::request(Json body) const {
    write_frame(out_fd_, body.dump());
    Json response = Json::parse(read_frame(in_fd_), nullptr, false);
    if (response.is_discarded() || !response.is_object())
        throw EnvironmentError("environment server sent malformed JSON");
    if (auto err = response.find("error"); err != response.end())
        throw EnvironmentError("environment server error: " + render_value_text(*err));
    return response;
}

std::string StdioEnvClient::reset() {
    return request(Json{{"op", "reset"}}).at("observation").get<std::string>();
}

StepOutcome StdioEnvClient::step(const std::string& action, int repeats) {
    Json response =
        request(Json{{"op", "step"}, {"action", action}, {"repeats", repeats}});
    StepOutcome out;
    out.observation = response.value("observation", std::string{});
    out.reward = response.value("reward", 0.0);
    out.done = response.value("done", false);
    out.info = response.value("info", Json::object());
    return out;
}

std::vector<std::string> StdioEnvClient::actions() const {
    return request(Json{{"op", "actions"}}).at("actions").get<std::vector<std::string>>();
}

std::string StdioEnvClient::manual() const {
    return request(Json{{"op", "manual"}}).at("manual").get<std::string>();
}

}  // namespace promptdag
