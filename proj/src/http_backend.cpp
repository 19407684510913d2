#include <algorithm>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "promptdag/backend.hpp"
#include "promptdag/errors.hpp"

namespace promptdag {

namespace {

// "scheme://host[:port]/path" -> (scheme://host[:port], /path)
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("endpoint must include a scheme: " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string env_or_empty(const std::string& name) {
    const char* value = std::getenv(name.c_str());
    return value ? std::string(value) : std::string();
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

bool timeout_error(httplib::Error err) {
    return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
           err == httplib::Error::Write;
}

}  // namespace

HttpBackend::HttpBackend(PriceTable table) : table_(std::move(table)) {}

int HttpBackend::last_attempts() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return last_attempts_;
}

void HttpBackend::rate_limit(const BackendProfile& profile) {
    if (profile.requests_per_second <= 0.0) return;
    using clock = std::chrono::steady_clock;
    std::unique_lock<std::mutex> lock(mutex_);
    Bucket& bucket = buckets_[profile.id];
    auto now = clock::now();
    if (bucket.last.time_since_epoch().count() == 0) {
        bucket.last = now;
        bucket.tokens = 1.0;
    }
    const double capacity = std::max(1.0, profile.requests_per_second);
    const double elapsed = std::chrono::duration<double>(now - bucket.last).count();
    bucket.tokens = std::min(capacity, bucket.tokens + elapsed * profile.requests_per_second);
    bucket.last = now;
    if (bucket.tokens < 1.0) {
        const double wait_s = (1.0 - bucket.tokens) / profile.requests_per_second;
        bucket.tokens = 0.0;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        return;
    }
    bucket.tokens -= 1.0;
}

std::pair<std::string, Usage> HttpBackend::complete(const std::vector<Message>& messages,
                                                    const BackendProfile& profile,
                                                    const CallContext&) {
    if (messages.empty()) throw Error("complete() requires at least one message");
    profile.check();

    std::string endpoint = profile.endpoint;
    if (!profile.base_url_env.empty()) {
        std::string base = env_or_empty(profile.base_url_env);
        if (!base.empty()) {
            while (!base.empty() && base.back() == '/') base.pop_back();
            endpoint = base + "/chat/completions";
        }
    }
    const std::string api_key = env_or_empty(profile.api_key_env);
    if (api_key.empty()) {
        throw MissingCredentialsError(profile.api_key_env);
    }

    Json body;
    body["model"] = profile.model;
    body["temperature"] = profile.temperature;
    body["max_tokens"] = profile.max_output_tokens;
    body["messages"] = Json::array();
    for (const auto& m : messages) {
        body["messages"].push_back(Json{{"role", m.role}, {"content", m.content}});
    }
    const std::string payload = body.dump();

    auto [base, path] = split_url(endpoint);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key}};

    int last_status = 0;
    std::string last_body;
    httplib::Error last_err = httplib::Error::Success;

    for (int attempt = 1; attempt <= profile.max_attempts; ++attempt) {
        rate_limit(profile);
        httplib::Client client(base);
        client.set_connection_timeout(0, profile.timeout_ms * 1000LL);
        client.set_read_timeout(0, profile.timeout_ms * 1000LL);
        client.set_write_timeout(0, profile.timeout_ms * 1000LL);

        auto res = client.Post(path, headers, payload, "application/json");
        if (res) {
            if (res->status == 200) {
                Json parsed;
                try {
                    parsed = Json::parse(res->body);
                } catch (const Json::exception& e) {
                    throw BackendError(res->status,
                                       std::string("unparseable response body: ") + e.what());
                }
                if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
                    parsed["choices"].empty()) {
                    throw BackendError(res->status, "response carries no choices");
                }
                const Json& choice = parsed["choices"][0];
                if (!choice.contains("message") || !choice["message"].contains("content")) {
                    throw BackendError(res->status, "first choice carries no message content");
                }
                std::string text = choice["message"]["content"].get<std::string>();

                Usage usage;
                if (parsed.contains("usage") && parsed["usage"].is_object()) {
                    const Json& u = parsed["usage"];
                    usage.prompt_tokens = u.value("prompt_tokens", std::int64_t{0});
                    usage.completion_tokens = u.value("completion_tokens", std::int64_t{0});
                } else {
                    usage.prompt_tokens = estimate_tokens(payload);
                    usage.completion_tokens = estimate_tokens(text);
                }
                usage.cost = table_.empty()
                                 ? 0.0
                                 : estimate_cost(usage.prompt_tokens, usage.completion_tokens,
                                                 profile.model, table_);
                {
                    std::lock_guard<std::mutex> lock(mutex_);
                    last_attempts_ = attempt;
                }
                return {std::move(text), usage};
            }
            if (!retryable_status(res->status)) {
                std::lock_guard<std::mutex> lock(mutex_);
                last_attempts_ = attempt;
                throw BackendError(res->status, res->body);
            }
            last_status = res->status;
            last_body = res->body;
        } else {
            last_err = res.error();
            last_status = 0;
            last_body = httplib::to_string(last_err);
        }
        if (attempt < profile.max_attempts) {
            auto delay = std::chrono::milliseconds(
                static_cast<long long>(profile.backoff_ms) * (1LL << (attempt - 1)));
            delay = std::min(delay, std::chrono::milliseconds(10000));
            std::this_thread::sleep_for(delay);
        }
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        last_attempts_ = profile.max_attempts;
    }
    if (last_status == 0 && timeout_error(last_err)) {
        throw TimeoutError("request timed out after " + std::to_string(profile.max_attempts) +
                           " attempts: " + last_body);
    }
    throw BackendError(last_status, last_body);
}

}  // namespace promptdag
