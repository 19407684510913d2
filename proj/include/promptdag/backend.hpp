#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "promptdag/trace.hpp"

namespace promptdag {

struct Message {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
    bool operator==(const Message& other) const = default;
};

// Identifies one model call for scripted matching and trace bookkeeping.
struct CallContext {
    std::string node_id;
    int pass_index = 1;
    int attempt = 1;  // 1-based attempt at this node (after-query retries)
};

// Per-node model settings: which endpoint/model to call and how.
struct BackendProfile {
    std::string id = "default";
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4";
    double temperature = 0.0;
    int max_output_tokens = 1024;
    int timeout_ms = 30000;
    int max_attempts = 3;   // total transport attempts, >= 1
    int backoff_ms = 250;   // base backoff, doubled per retry
    double requests_per_second = 0.0;  // 0 = unlimited
    std::string api_key_env = "OPENAI_API_KEY";
    std::string base_url_env = "OPENAI_BASE_URL";  // optional endpoint override

    void check() const;  // throws Error on invariant violations
    Json to_json() const;
    static BackendProfile from_json(const Json& j);
};

// Named profiles; "default" always resolves.
class ProfileSet {
public:
    ProfileSet() { profiles_["default"] = BackendProfile{}; }

    void put(BackendProfile profile);
    const BackendProfile& resolve(const std::string& id) const;  // throws Error when unknown
    bool has(const std::string& id) const { return profiles_.count(id) > 0; }

    static ProfileSet from_json(const Json& j);

private:
    std::map<std::string, BackendProfile> profiles_;
};

// ---------------------------------------------------------------------------
// Cost accounting

struct ModelRate {
    double input_per_1k = 0.0;
    double output_per_1k = 0.0;
};

class PriceTable {
public:
    PriceTable() = default;

    void put(const std::string& model, ModelRate rate);
    bool empty() const { return rates_.empty(); }
    bool has(const std::string& model) const { return rates_.count(model) > 0; }
    const ModelRate& rate(const std::string& model) const;  // throws UnknownModelRateError

    static PriceTable from_json(const Json& j);
    static PriceTable load(const std::string& path);

private:
    std::map<std::string, ModelRate> rates_;
};

// cost = prompt/1000 * input_rate + completion/1000 * output_rate.
double estimate_cost(std::int64_t prompt_tokens, std::int64_t completion_tokens,
                     const std::string& model, const PriceTable& table);

// Scripted token estimate: ceil(characters / 4); internally consistent, not
// a real tokenizer.
std::int64_t estimate_tokens(const std::string& text);

// ---------------------------------------------------------------------------
// Backend interface

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::pair<std::string, Usage> complete(const std::vector<Message>& messages,
                                                   const BackendProfile& profile,
                                                   const CallContext& ctx = {}) = 0;
};

// One canned response with optional matchers; all present matchers must hold.
struct ScriptRule {
    std::optional<std::string> node;      // exact node id
    std::optional<std::string> contains;  // substring of the concatenated messages
    std::optional<int> ordinal;           // 1-based call ordinal across the run
    std::optional<int> pass;              // pass index
    std::optional<int> attempt;           // 1-based attempt at the node
    std::string response;

    Json to_json() const;
    static ScriptRule from_json(const Json& j);
};

// Deterministic backend for tests and offline runs: ordered rules, first
// match wins, an unmatched call is a ScriptError. Pure: the same script and
// call sequence always produce the same answers and usages.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules, PriceTable table = {});

    static ScriptedBackend from_json(const Json& j, PriceTable table = {});
    static ScriptedBackend load(const std::string& path, PriceTable table = {});
    // Rule list alone, for callers that construct the backend in place.
    static std::vector<ScriptRule> load_rules(const std::string& path);

    std::pair<std::string, Usage> complete(const std::vector<Message>& messages,
                                           const BackendProfile& profile,
                                           const CallContext& ctx = {}) override;

    int calls() const;
    void reset();  // rewind the ordinal counter

private:
    std::vector<ScriptRule> rules_;
    PriceTable table_;
    mutable std::mutex mutex_;
    int calls_ = 0;
};

// Live client for OpenAI-compatible chat-completion endpoints. Retries only
// transport failures, 5xx, and 429 (with exponential backoff); other 4xx
// fail immediately. The API key is read from the profile's environment
// variable at call time — never from graph files.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(PriceTable table = {});

    std::pair<std::string, Usage> complete(const std::vector<Message>& messages,
                                           const BackendProfile& profile,
                                           const CallContext& ctx = {}) override;

    // Attempts consumed by the most recent call (1 = no retry).
    int last_attempts() const;

private:
    void rate_limit(const BackendProfile& profile);

    PriceTable table_;
    mutable std::mutex mutex_;
    int last_attempts_ = 0;
    struct Bucket {
        double tokens = 1.0;
        std::chrono::steady_clock::time_point last;
    };
    std::map<std::string, Bucket> buckets_;
};

}  // namespace promptdag
