#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace promptdag {

using Json = nlohmann::json;

// Canonical text rendering for values substituted into prompts: strings
// verbatim, numbers without trailing zeros, maps/lists as compact JSON.
std::string render_value_text(const Json& value);

// Splits "a.b.c" into segments. Throws Error on empty path or empty segment.
std::vector<std::string> split_db_path(const std::string& path);

enum class TemplateMode { Strict, Lenient };

// One step of episode history: the outputs of the three summary nodes plus
// the skill that was active at that step.
struct StepSummary {
    std::int64_t step = 0;
    std::string s_obs;
    std::string s_plan;
    Json s_action;  // structured record
    std::string skill;

    Json to_json() const;
    static StepSummary from_json(const Json& j);
    bool operator==(const StepSummary& other) const = default;
};

// Hierarchical string-keyed store shared by all nodes. Paths are
// dot-separated; values are JSON (text, number, boolean, list, map).
// Reserved subtrees: instruction_manual, subgoals, action_summary, skills,
// kb, unknown, history.
class Database {
public:
    Database() : root_(Json::object()) {}
    explicit Database(Json root) : root_(std::move(root)) {}

    const Json& root() const { return root_; }

    // nullptr when the path is absent.
    const Json* get(const std::string& path) const;
    bool contains(const std::string& path) const { return get(path) != nullptr; }

    // Creates intermediate objects as needed. Throws Error when a path
    // segment collides with a non-object value.
    void set(const std::string& path, Json value);
    void erase(const std::string& path);

    // Replaces every `$db.path$` placeholder in `text` with the canonical
    // rendering of the value at that path. `$$` renders a literal `$`; any
    // other `$` not forming a placeholder passes through unchanged.
    // Strict mode throws UnresolvedTemplateKeyError for missing keys;
    // lenient mode substitutes "" and records the path in `warnings`.
    std::string resolve_template(const std::string& text, TemplateMode mode = TemplateMode::Strict,
                                 std::vector<std::string>* warnings = nullptr) const;

    // ---- history buffer ----

    void push_step(const StepSummary& summary);

    // Most recent min(window, available) summaries, chronological.
    std::vector<StepSummary> window_history(std::int64_t window = 25) const;

    // All summaries whose active skill equals `skill`, chronological.
    // Throws UnknownSkillError when `skill` is not in the skill library.
    std::vector<StepSummary> skill_history(const std::string& skill) const;

    // Oldest-first eviction above this many steps.
    void set_history_cap(std::size_t cap) { history_cap_ = cap; }
    std::size_t history_cap() const { return history_cap_; }

    bool skill_known(const std::string& skill) const;

    // Snapshot file: one structured document holding the whole root.
    void save(const std::string& path) const;
    static Database load(const std::string& path);

    bool operator==(const Database& other) const { return root_ == other.root_; }

private:
    Json root_;
    std::size_t history_cap_ = 1000;
};

// Lists the `$db.…$` paths referenced by `text`, in order of appearance
// (duplicates preserved). Used by the graph validator.
std::vector<std::string> extract_template_keys(const std::string& text);

// When text[pos] opens a `$db.path$` placeholder, returns (path, consumed
// length including both '$'s); nullopt otherwise.
std::optional<std::pair<std::string, std::size_t>> match_db_placeholder(const std::string& text,
                                                                        std::size_t pos);

// Buffer for database writes performed by an after-query hook. Writes are
// staged during the hook and committed only once the hook succeeds, so a
// failing retryable hook leaves the database untouched.
class DbStage {
public:
    explicit DbStage(const Database& db) : db_(&db) {}

    void set(const std::string& path, Json value) { writes_.push_back({path, std::move(value)}); }
    void push_step(const StepSummary& summary) { steps_.push_back(summary); }

    // Read-through view: staged writes win over the underlying database.
    std::optional<Json> get(const std::string& path) const;

    bool empty() const { return writes_.empty() && steps_.empty(); }
    void clear() { writes_.clear(); steps_.clear(); }

    void commit(Database& db) const;

private:
    struct Write {
        std::string path;
        Json value;
    };
    const Database* db_;
    std::vector<Write> writes_;
    std::vector<StepSummary> steps_;
};

}  // namespace promptdag
