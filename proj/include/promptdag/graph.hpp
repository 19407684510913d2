#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "promptdag/errors.hpp"

namespace promptdag {

using OrderedJson = nlohmann::ordered_json;

// One subtask: a prompt template plus the ids of the nodes whose outputs
// feed into it.
struct NodeDef {
    std::string id;
    std::string prompt;
    std::vector<std::string> deps;
    std::string compose = "default";  // compose strategy tag
    std::string after_query;          // hook id, empty = none
    std::string model = "default";    // backend profile id
    bool temporary = false;

    bool operator==(const NodeDef& other) const = default;
};

// Graph file contents in file order. The on-disk format is a single
// top-level JSON map: node-id -> {prompt, dep, compose?, after_query?,
// model?}. save(load(x)) is byte-identical for canonical files.
struct GraphSpec {
    std::vector<NodeDef> nodes;

    const NodeDef* find(const std::string& id) const;
    NodeDef* find(const std::string& id);

    OrderedJson to_json() const;
    static GraphSpec from_json(const OrderedJson& j);

    std::string to_text() const;
    static GraphSpec from_text(const std::string& text);

    void save(const std::string& path) const;
    static GraphSpec load(const std::string& path);

    bool operator==(const GraphSpec& other) const = default;
};

struct DynamicOp {
    enum class Kind { AddNode, AddEdge, RemoveEdge, RemoveNode };
    Kind kind = Kind::AddNode;
    NodeDef node;        // AddNode payload
    std::string from;    // edge source
    std::string to;      // edge target / node to remove

    static DynamicOp add_node(NodeDef def);
    static DynamicOp add_edge(std::string u, std::string v);
    static DynamicOp remove_edge(std::string u, std::string v);
    static DynamicOp remove_node(std::string id);

    nlohmann::json to_json() const;
};

enum class RejectKind {
    None,
    DuplicateId,
    UnknownEndpoint,
    InvalidNode,
    EvaluatedTarget,    // add targeting an already-evaluated node
    EvaluatedEndpoint,  // remove touching an already-evaluated endpoint
    CycleIntroduced,
    MissingEdge,
    AlreadyRemoved,
};

struct OpResult {
    bool accepted = false;
    RejectKind kind = RejectKind::None;
    std::string reason;

    static OpResult ok() { return {true, RejectKind::None, ""}; }
    static OpResult reject(RejectKind kind, std::string reason) {
        return {false, kind, std::move(reason)};
    }
};

struct Finding {
    std::string code;
    std::string node_id;
    std::string detail;
    std::string message() const;
};

// Owns the permanent graph plus the per-pass temporary overlay and Kahn
// bookkeeping. All dynamic mutations go through apply_dynamic_op, which
// enforces the evaluation-state safeguards: an added edge (u,v) requires v
// unevaluated; a removed edge requires both u and v unevaluated; a removed
// node requires the node itself unevaluated. The permanent graph is never
// modified mid-pass; end_pass reverts every temporary.
class Graph {
public:
    Graph() = default;

    static Graph from_spec(const GraphSpec& spec);
    GraphSpec to_spec() const;  // permanent graph only, nodes sorted by id

    // ---- permanent construction (not mid-pass) ----

    // Registers the node and an edge from each dep. Throws DuplicateIdError,
    // UnknownDependencyError, or CycleError.
    const std::string& add_node(NodeDef def);
    void add_edge(const std::string& u, const std::string& v);

    // ---- inspection ----

    bool has_node(const std::string& id) const;
    const NodeDef& node(const std::string& id) const;
    std::vector<std::string> effective_node_ids() const;                  // sorted
    std::set<std::pair<std::string, std::string>> effective_edges() const;

    // Ordered dependency list used for composition: declared deps whose edge
    // is still effective, in declaration order, then dynamically added
    // in-edges in addition order.
    std::vector<std::string> compose_deps(const std::string& id) const;
    std::size_t permanent_node_count() const { return permanent_nodes_.size(); }

    bool mid_pass() const { return mid_pass_; }
    bool evaluated(const std::string& id) const { return evaluated_.count(id) > 0; }
    bool skipped(const std::string& id) const { return skipped_.count(id) > 0; }
    const std::set<std::string>& evaluated_nodes() const { return evaluated_; }
    const std::set<std::string>& skipped_nodes() const { return skipped_; }

    // ---- pass lifecycle (driven by run_pass) ----

    void begin_pass();
    void end_pass();

    // Next frontier node in FIFO order (ascending-id tie-break at
    // initialization), or nullopt when the frontier is drained.
    std::optional<std::string> next_ready();

    // Marks the node evaluated and releases successors whose remaining
    // pending in-degree reaches zero.
    void mark_evaluated(const std::string& id);

    // True when every effective node is either evaluated or skipped.
    bool all_done() const;
    std::vector<std::string> pending_nodes() const;

    // Applies one temporary mutation, subject to the safeguards. Rejections
    // leave the graph unchanged. Throws GraphStateError outside a pass and
    // DynamicBudgetError when the per-pass added-node budget is exhausted.
    OpResult apply_dynamic_op(const DynamicOp& op);

    void set_dynamic_node_budget(int budget) { dynamic_node_budget_ = budget; }
    int dynamic_node_budget() const { return dynamic_node_budget_; }

private:
    bool edge_effective(const std::string& u, const std::string& v) const;
    std::vector<std::string> out_neighbors(const std::string& id) const;  // sorted
    std::vector<std::string> in_neighbors(const std::string& id) const;   // sorted
    bool node_pending(const std::string& id) const;
    void drop_effective_edge(const std::string& u, const std::string& v);
    void remove_from_frontier(const std::string& id);
    // Path from -> ... -> to over effective edges, empty when unreachable.
    std::vector<std::string> find_path(const std::string& from, const std::string& to) const;

    std::map<std::string, NodeDef> permanent_nodes_;
    std::set<std::pair<std::string, std::string>> permanent_edges_;
    std::map<std::string, NodeDef> temp_nodes_;
    std::set<std::pair<std::string, std::string>> temp_edges_added_;
    std::set<std::pair<std::string, std::string>> temp_edges_removed_;
    // v -> sources of dynamically added in-edges, in addition order.
    std::map<std::string, std::vector<std::string>> temp_dep_order_;
    std::set<std::string> evaluated_;
    std::set<std::string> skipped_;

    bool mid_pass_ = false;
    std::map<std::string, int> pending_in_degree_;
    std::deque<std::string> frontier_;
    int dynamic_nodes_added_ = 0;
    int dynamic_node_budget_ = 64;
};

// Thrown when a pass accepts more dynamically added nodes than the budget
// allows; surfaces as a node evaluation failure with a distinct cause.
class DynamicBudgetError : public Error {
public:
    explicit DynamicBudgetError(int budget)
        : Error("dynamic node budget exhausted (" + std::to_string(budget) +
                " temporary nodes added this pass)") {}
};

// Database roots a graph file may reference via `$db.…$` without a finding.
std::vector<std::string> standard_schema_roots();

// Structural diagnostics: cycles, dangling deps, duplicate/self deps,
// unknown hook and compose ids, `$db.…$` keys outside the declared schema.
// An empty report means the spec is runnable.
std::vector<Finding> validate_spec(const GraphSpec& spec,
                                   const std::vector<std::string>& known_after_query_hooks,
                                   const std::vector<std::string>& known_compose_tags,
                                   const std::vector<std::string>& schema_roots);

std::string render_cycle_path(const std::vector<std::string>& cycle);

}  // namespace promptdag
