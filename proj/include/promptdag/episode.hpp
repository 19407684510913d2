#pragma once

#include <map>
#include <string>
#include <vector>

#include "promptdag/agent.hpp"
#include "promptdag/node_runtime.hpp"

namespace promptdag {

// ---------------------------------------------------------------------------
// Environment adapter contract

struct StepOutcome {
    std::string observation;
    double reward = 0.0;
    bool done = false;
    Json info = Json::object();
};

// Anything that can reset, step, and describe itself can host an episode —
// in-process environments and the framed-stdio client both implement this.
class EnvAdapter {
public:
    virtual ~EnvAdapter() = default;
    virtual std::string reset() = 0;
    virtual StepOutcome step(const std::string& action, int repeats) = 0;
    virtual std::vector<std::string> actions() const = 0;
    virtual std::string manual() const = 0;
};

// ---------------------------------------------------------------------------
// Episode configuration

// Database paths the step summary is read from after each pass. Reading from
// the database (rather than the pass trace) lets skipped summary nodes keep
// their previous text.
struct SummaryPaths {
    std::string obs = "action_summary.obs";
    std::string plan = "action_summary.plan";
    std::string action = "action_summary.action";
    std::string skill = "subgoals.active_skill";
};

struct AgentConfig {
    EvalLimits limits;
    int max_steps = 100;
    std::map<std::string, std::string> exports;  // node id -> database path
    SummaryPaths summaries;
    Json seed_db = Json::object();  // database path -> initial value

    // Unknown fields are rejected. Recognized: max_steps, max_retries,
    // strict_templates, exports, summaries{obs,plan,action,skill}, seed_db.
    static AgentConfig from_json(const Json& j);
    static AgentConfig load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Episode results

struct EpisodeResult {
    double total_reward = 0.0;
    int steps = 0;
    std::vector<std::string> achievements;  // first-unlock order
    KnowledgeState knowledge;
    std::vector<PassTrace> traces;
    Json final_db;
    bool operator==(const EpisodeResult& other) const = default;
};

// Episode failure with the partial result attached; kind separates runtime
// node failures from backend outages and environment faults for exit codes.
class EpisodeFailureError : public Error {
public:
    enum class Kind { Node, Backend, Environment };

    EpisodeFailureError(Kind kind, std::string node, const std::string& cause,
                        EpisodeResult partial)
        : Error("episode failed at node '" + node + "': " + cause),
          kind_(kind),
          node_(std::move(node)),
          partial_(std::move(partial)) {}

    Kind kind() const { return kind_; }
    const std::string& node() const { return node_; }
    const EpisodeResult& partial() const { return partial_; }

private:
    Kind kind_;
    std::string node_;
    EpisodeResult partial_;
};

// Runs up to config.max_steps environment steps, one pass per step: refresh
// the observation / manual / allowed-actions and feedback context, run the
// pass, export configured node outputs to the database, apply the pending
// action to the environment, and append the step summary to history.
EpisodeResult run_episode(Graph& graph, EnvAdapter& env, NodeEvaluator& evaluator, Database& db,
                          const AgentConfig& config);

}  // namespace promptdag
