#include "promptdag/backend.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "promptdag/errors.hpp"

namespace promptdag {

// ---------------------------------------------------------------------------
// BackendProfile / ProfileSet

void BackendProfile::check() const {
    if (id.empty()) throw Error("backend profile id must be non-empty");
    if (temperature < 0.0) throw Error("profile '" + id + "': temperature must be >= 0");
    if (max_attempts < 1) throw Error("profile '" + id + "': max attempts must be >= 1");
    if (max_output_tokens < 1) throw Error("profile '" + id + "': max output tokens must be >= 1");
    if (timeout_ms < 1) throw Error("profile '" + id + "': timeout must be positive");
}

Json BackendProfile::to_json() const {
    return Json{{"endpoint", endpoint},
                {"model", model},
                {"temperature", temperature},
                {"max_output_tokens", max_output_tokens},
                {"timeout_ms", timeout_ms},
                {"max_attempts", max_attempts},
                {"backoff_ms", backoff_ms},
                {"requests_per_second", requests_per_second},
                {"api_key_env", api_key_env},
                {"base_url_env", base_url_env}};
}

BackendProfile BackendProfile::from_json(const Json& j) {
    BackendProfile p;
    if (!j.is_object()) throw Error("backend profile must be a JSON object");
    if (j.contains("id")) p.id = j.at("id").get<std::string>();
    if (j.contains("endpoint")) p.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("model")) p.model = j.at("model").get<std::string>();
    if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
    if (j.contains("max_output_tokens")) p.max_output_tokens = j.at("max_output_tokens").get<int>();
    if (j.contains("timeout_ms")) p.timeout_ms = j.at("timeout_ms").get<int>();
    if (j.contains("max_attempts")) p.max_attempts = j.at("max_attempts").get<int>();
    if (j.contains("backoff_ms")) p.backoff_ms = j.at("backoff_ms").get<int>();
    if (j.contains("requests_per_second"))
        p.requests_per_second = j.at("requests_per_second").get<double>();
    if (j.contains("api_key_env")) p.api_key_env = j.at("api_key_env").get<std::string>();
    if (j.contains("base_url_env")) p.base_url_env = j.at("base_url_env").get<std::string>();
    p.check();
    return p;
}

void ProfileSet::put(BackendProfile profile) {
    profile.check();
    profiles_[profile.id] = std::move(profile);
}

const BackendProfile& ProfileSet::resolve(const std::string& id) const {
    auto it = profiles_.find(id);
    if (it == profiles_.end()) {
        throw Error("unknown backend profile: " + id);
    }
    return it->second;
}

ProfileSet ProfileSet::from_json(const Json& j) {
    ProfileSet set;
    if (!j.is_object()) throw Error("profile set must be a JSON object keyed by profile id");
    for (const auto& [id, body] : j.items()) {
        BackendProfile p = BackendProfile::from_json(body);
        p.id = id;
        set.put(std::move(p));
    }
    return set;
}

// ---------------------------------------------------------------------------
// PriceTable

void PriceTable::put(const std::string& model, ModelRate rate) {
    if (rate.input_per_1k < 0.0 || rate.output_per_1k < 0.0) {
        throw Error("price rates must be >= 0 for model: " + model);
    }
    rates_[model] = rate;
}

const ModelRate& PriceTable::rate(const std::string& model) const {
    auto it = rates_.find(model);
    if (it == rates_.end()) throw UnknownModelRateError(model);
    return it->second;
}

PriceTable PriceTable::from_json(const Json& j) {
    PriceTable table;
    if (!j.is_object()) throw Error("price table must be a JSON object keyed by model name");
    for (const auto& [model, body] : j.items()) {
        if (!body.is_object() || !body.contains("input_per_1k") ||
            !body.contains("output_per_1k")) {
            throw Error("price entry for '" + model +
                        "' must carry input_per_1k and output_per_1k");
        }
        table.put(model, ModelRate{body.at("input_per_1k").get<double>(),
                                   body.at("output_per_1k").get<double>()});
    }
    return table;
}

PriceTable PriceTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open price table: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw StorageError("price table '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

double estimate_cost(std::int64_t prompt_tokens, std::int64_t completion_tokens,
                     const std::string& model, const PriceTable& table) {
    if (prompt_tokens < 0 || completion_tokens < 0) {
        throw Error("token counts must be >= 0");
    }
    const ModelRate& r = table.rate(model);
    return static_cast<double>(prompt_tokens) / 1000.0 * r.input_per_1k +
           static_cast<double>(completion_tokens) / 1000.0 * r.output_per_1k;
}

std::int64_t estimate_tokens(const std::string& text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

// ---------------------------------------------------------------------------
// ScriptedBackend

Json ScriptRule::to_json() const {
    Json j = Json::object();
    if (node) j["node"] = *node;
    if (contains) j["contains"] = *contains;
    if (ordinal) j["ordinal"] = *ordinal;
    if (pass) j["pass"] = *pass;
    if (attempt) j["attempt"] = *attempt;
    j["response"] = response;
    return j;
}

ScriptRule ScriptRule::from_json(const Json& j) {
    if (!j.is_object() || !j.contains("response") || !j.at("response").is_string()) {
        throw ScriptError("script rule must be an object with a string 'response'");
    }
    ScriptRule rule;
    for (const auto& [key, value] : j.items()) {
        if (key == "response") {
            rule.response = value.get<std::string>();
        } else if (key == "node") {
            rule.node = value.get<std::string>();
        } else if (key == "contains") {
            rule.contains = value.get<std::string>();
        } else if (key == "ordinal") {
            rule.ordinal = value.get<int>();
        } else if (key == "pass") {
            rule.pass = value.get<int>();
        } else if (key == "attempt") {
            rule.attempt = value.get<int>();
        } else {
            throw ScriptError("script rule has unknown field '" + key + "'");
        }
    }
    return rule;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, PriceTable table)
    : rules_(std::move(rules)), table_(std::move(table)) {}

ScriptedBackend ScriptedBackend::from_json(const Json& j, PriceTable table) {
    if (!j.is_array()) throw ScriptError("script must be a JSON array of rules");
    std::vector<ScriptRule> rules;
    rules.reserve(j.size());
    for (const auto& entry : j) rules.push_back(ScriptRule::from_json(entry));
    return ScriptedBackend(std::move(rules), std::move(table));
}

ScriptedBackend ScriptedBackend::load(const std::string& path, PriceTable table) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open script: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw StorageError("script '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j, std::move(table));
}

std::vector<ScriptRule> ScriptedBackend::load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open script: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw StorageError("script '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.is_array()) throw ScriptError("script must be a JSON array of rules");
    std::vector<ScriptRule> rules;
    rules.reserve(j.size());
    for (const auto& entry : j) rules.push_back(ScriptRule::from_json(entry));
    return rules;
}

std::pair<std::string, Usage> ScriptedBackend::complete(const std::vector<Message>& messages,
                                                        const BackendProfile& profile,
                                                        const CallContext& ctx) {
    if (messages.empty()) throw Error("complete() requires at least one message");
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;

    std::string all_text;
    for (const auto& m : messages) {
        all_text += m.content;
        all_text += '\n';
    }

    const ScriptRule* hit = nullptr;
    for (const auto& rule : rules_) {
        if (rule.node && *rule.node != ctx.node_id) continue;
        if (rule.ordinal && *rule.ordinal != calls_) continue;
        if (rule.pass && *rule.pass != ctx.pass_index) continue;
        if (rule.attempt && *rule.attempt != ctx.attempt) continue;
        if (rule.contains && all_text.find(*rule.contains) == std::string::npos) continue;
        hit = &rule;
        break;
    }
    if (!hit) {
        std::ostringstream os;
        os << "no script rule matches call #" << calls_ << " (node '" << ctx.node_id
           << "', pass " << ctx.pass_index << ", attempt " << ctx.attempt << ")";
        throw ScriptError(os.str());
    }

    Usage usage;
    usage.prompt_tokens = estimate_tokens(all_text);
    usage.completion_tokens = estimate_tokens(hit->response);
    usage.cost = table_.empty() ? 0.0
                                : estimate_cost(usage.prompt_tokens, usage.completion_tokens,
                                                profile.model, table_);
    return {hit->response, usage};
}

int ScriptedBackend::calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

void ScriptedBackend::reset() {
    std::lock_guard<std::mutex> lock(mutex_);
    calls_ = 0;
}

}  // namespace promptdag
