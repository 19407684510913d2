#include "promptdag/graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "promptdag/database.hpp"

namespace promptdag {

namespace {

void check_node_shape(const NodeDef& def) {
    if (def.id.empty()) {
        throw GraphStateError("node id must be non-empty");
    }
    std::set<std::string> seen;
    for (const auto& dep : def.deps) {
        if (dep == def.id) {
            throw GraphStateError("node '" + def.id + "' depends on itself");
        }
        if (!seen.insert(dep).second) {
            throw GraphStateError("node '" + def.id + "' lists dependency '" + dep +
                                  "' more than once");
        }
    }
}

// nullopt when the node is well-formed, otherwise a description. Mirror of
// check_node_shape for contexts that report instead of throw.
std::optional<std::string> node_shape_problem(const NodeDef& def) {
    try {
        check_node_shape(def);
    } catch (const Error& e) {
        return std::string(e.what());
    }
    return std::nullopt;
}

}  // namespace

std::string render_cycle_path(const std::vector<std::string>& cycle) {
    std::string out;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
        if (i > 0) out += " -> ";
        out += cycle[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// GraphSpec

const NodeDef* GraphSpec::find(const std::string& id) const {
    for (const auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

NodeDef* GraphSpec::find(const std::string& id) {
    for (auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

OrderedJson GraphSpec::to_json() const {
    OrderedJson root = OrderedJson::object();
    for (const auto& n : nodes) {
        OrderedJson entry = OrderedJson::object();
        entry["prompt"] = n.prompt;
        entry["dep"] = n.deps;
        if (n.compose != "default") entry["compose"] = n.compose;
        if (!n.after_query.empty()) entry["after_query"] = n.after_query;
        if (n.model != "default") entry["model"] = n.model;
        root[n.id] = std::move(entry);
    }
    return root;
}

GraphSpec GraphSpec::from_json(const OrderedJson& j) {
    if (!j.is_object()) {
        throw GraphStateError("graph file must be a JSON object mapping node ids to nodes");
    }
    GraphSpec spec;
    for (const auto& [id, entry] : j.items()) {
        if (!entry.is_object()) {
            throw GraphStateError("node '" + id + "' must be a JSON object");
        }
        NodeDef def;
        def.id = id;
        if (!entry.contains("prompt") || !entry["prompt"].is_string()) {
            throw GraphStateError("node '" + id + "' is missing a string 'prompt'");
        }
        def.prompt = entry["prompt"].get<std::string>();
        if (!entry.contains("dep") || !entry["dep"].is_array()) {
            throw GraphStateError("node '" + id + "' is missing a 'dep' array");
        }
        for (const auto& d : entry["dep"]) {
            if (!d.is_string()) {
                throw GraphStateError("node '" + id + "' has a non-string dependency");
            }
            def.deps.push_back(d.get<std::string>());
        }
        for (const auto& [key, value] : entry.items()) {
            if (key == "prompt" || key == "dep") continue;
            if (key != "compose" && key != "after_query" && key != "model") {
                throw GraphStateError("node '" + id + "' has unknown field '" + key + "'");
            }
            if (!value.is_string()) {
                throw GraphStateError("node '" + id + "' field '" + key + "' must be a string");
            }
            if (key == "compose") {
                def.compose = value.get<std::string>();
            } else if (key == "after_query") {
                def.after_query = value.get<std::string>();
            } else {
                def.model = value.get<std::string>();
            }
        }
        if (def.compose.empty()) def.compose = "default";
        if (def.model.empty()) def.model = "default";
        if (spec.find(id) != nullptr) {
            throw DuplicateIdError(id);
        }
        spec.nodes.push_back(std::move(def));
    }
    return spec;
}

std::string GraphSpec::to_text() const {
    return to_json().dump(2) + "\n";
}

GraphSpec GraphSpec::from_text(const std::string& text) {
    OrderedJson j;
    try {
        j = OrderedJson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw GraphStateError(std::string("graph file is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

void GraphSpec::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw StorageError("cannot open for writing: " + path);
    }
    out << to_text();
    if (!out) {
        throw StorageError("failed writing: " + path);
    }
}

GraphSpec GraphSpec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw StorageError("cannot open for reading: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

// ---------------------------------------------------------------------------
// DynamicOp

DynamicOp DynamicOp::add_node(NodeDef def) {
    DynamicOp op;
    op.kind = Kind::AddNode;
    op.node = std::move(def);
    return op;
}

DynamicOp DynamicOp::add_edge(std::string u, std::string v) {
    DynamicOp op;
    op.kind = Kind::AddEdge;
    op.from = std::move(u);
    op.to = std::move(v);
    return op;
}

DynamicOp DynamicOp::remove_edge(std::string u, std::string v) {
    DynamicOp op;
    op.kind = Kind::RemoveEdge;
    op.from = std::move(u);
    op.to = std::move(v);
    return op;
}

DynamicOp DynamicOp::remove_node(std::string id) {
    DynamicOp op;
    op.kind = Kind::RemoveNode;
    op.to = std::move(id);
    return op;
}

nlohmann::json DynamicOp::to_json() const {
    nlohmann::json j;
    switch (kind) {
        case Kind::AddNode:
            j["op"] = "add_node";
            j["id"] = node.id;
            j["dep"] = node.deps;
            break;
        case Kind::AddEdge:
            j["op"] = "add_edge";
            j["from"] = from;
            j["to"] = to;
            break;
        case Kind::RemoveEdge:
            j["op"] = "remove_edge";
            j["from"] = from;
            j["to"] = to;
            break;
        case Kind::RemoveNode:
            j["op"] = "remove_node";
            j["id"] = to;
            break;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Graph: construction

Graph Graph::from_spec(const GraphSpec& spec) {
    Graph g;
    for (const auto& def : spec.nodes) {
        check_node_shape(def);
        if (g.permanent_nodes_.count(def.id)) {
            throw DuplicateIdError(def.id);
        }
        NodeDef copy = def;
        copy.temporary = false;
        g.permanent_nodes_.emplace(copy.id, std::move(copy));
    }
    for (const auto& def : spec.nodes) {
        for (const auto& dep : def.deps) {
            if (!g.permanent_nodes_.count(dep)) {
                throw UnknownDependencyError(def.id, dep);
            }
            g.permanent_edges_.emplace(dep, def.id);
        }
    }
    // Global acyclicity: Kahn over the permanent graph.
    std::map<std::string, int> indeg;
    for (const auto& [id, _] : g.permanent_nodes_) indeg[id] = 0;
    for (const auto& [u, v] : g.permanent_edges_) ++indeg[v];
    std::deque<std::string> q;
    for (const auto& [id, d] : indeg) {
        if (d == 0) q.push_back(id);
    }
    std::size_t seen = 0;
    while (!q.empty()) {
        std::string id = q.front();
        q.pop_front();
        ++seen;
        for (const auto& [u, v] : g.permanent_edges_) {
            if (u != id) continue;
            if (--indeg[v] == 0) q.push_back(v);
        }
    }
    if (seen != g.permanent_nodes_.size()) {
        // Walk from any stuck node until an id repeats to name one cycle.
        std::string start;
        for (const auto& [id, d] : indeg) {
            if (d > 0) {
                start = id;
                break;
            }
        }
        std::vector<std::string> path{start};
        std::set<std::string> on_path{start};
        std::string cur = start;
        while (true) {
            std::string next;
            for (const auto& [u, v] : g.permanent_edges_) {
                if (u == cur && indeg[v] > 0) {
                    next = v;
                    break;
                }
            }
            if (on_path.count(next)) {
                // Trim the tail leading into the loop.
                auto it = std::find(path.begin(), path.end(), next);
                std::vector<std::string> cycle(it, path.end());
                cycle.push_back(next);
                throw CycleError(render_cycle_path(cycle));
            }
            path.push_back(next);
            on_path.insert(next);
            cur = next;
        }
    }
    return g;
}

GraphSpec Graph::to_spec() const {
    GraphSpec spec;
    for (const auto& [_, def] : permanent_nodes_) {
        spec.nodes.push_back(def);
    }
    return spec;
}

const std::string& Graph::add_node(NodeDef def) {
    if (mid_pass_) {
        throw GraphStateError("permanent add_node is not allowed mid-pass; use a dynamic op");
    }
    check_node_shape(def);
    if (permanent_nodes_.count(def.id)) {
        throw DuplicateIdError(def.id);
    }
    for (const auto& dep : def.deps) {
        if (!permanent_nodes_.count(dep)) {
            throw UnknownDependencyError(def.id, dep);
        }
    }
    def.temporary = false;
    auto [it, _] = permanent_nodes_.emplace(def.id, std::move(def));
    for (const auto& dep : it->second.deps) {
        permanent_edges_.emplace(dep, it->first);
    }
    return it->first;
}

void Graph::add_edge(const std::string& u, const std::string& v) {
    if (mid_pass_) {
        throw GraphStateError("permanent add_edge is not allowed mid-pass; use a dynamic op");
    }
    if (!permanent_nodes_.count(u)) throw UnknownDependencyError(v, u);
    if (!permanent_nodes_.count(v)) throw GraphStateError("add_edge: unknown node '" + v + "'");
    if (u == v) throw CycleError(render_cycle_path({u, u}));
    if (permanent_edges_.count({u, v})) {
        throw GraphStateError("edge already present: " + u + " -> " + v);
    }
    auto path = find_path(v, u);
    if (!path.empty()) {
        path.insert(path.begin(), u);  // u -> v -> ... -> u
        throw CycleError(render_cycle_path(path));
    }
    permanent_edges_.emplace(u, v);
    auto it = permanent_nodes_.find(v);
    if (std::find(it->second.deps.begin(), it->second.deps.end(), u) == it->second.deps.end()) {
        it->second.deps.push_back(u);
    }
}

// ---------------------------------------------------------------------------
// Graph: inspection

bool Graph::has_node(const std::string& id) const {
    return permanent_nodes_.count(id) > 0 || temp_nodes_.count(id) > 0;
}

const NodeDef& Graph::node(const std::string& id) const {
    auto it = permanent_nodes_.find(id);
    if (it != permanent_nodes_.end()) return it->second;
    auto tt = temp_nodes_.find(id);
    if (tt != temp_nodes_.end()) return tt->second;
    throw GraphStateError("unknown node: " + id);
}

std::vector<std::string> Graph::effective_node_ids() const {
    std::vector<std::string> ids;
    ids.reserve(permanent_nodes_.size() + temp_nodes_.size());
    for (const auto& [id, _] : permanent_nodes_) ids.push_back(id);
    for (const auto& [id, _] : temp_nodes_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::set<std::pair<std::string, std::string>> Graph::effective_edges() const {
    std::set<std::pair<std::string, std::string>> edges = permanent_edges_;
    edges.insert(temp_edges_added_.begin(), temp_edges_added_.end());
    for (const auto& e : temp_edges_removed_) edges.erase(e);
    return edges;
}

bool Graph::edge_effective(const std::string& u, const std::string& v) const {
    std::pair<std::string, std::string> e{u, v};
    if (temp_edges_removed_.count(e)) return false;
    return permanent_edges_.count(e) > 0 || temp_edges_added_.count(e) > 0;
}

std::vector<std::string> Graph::out_neighbors(const std::string& id) const {
    std::vector<std::string> out;
    for (const auto& [u, v] : effective_edges()) {
        if (u == id) out.push_back(v);
    }
    return out;  // set iteration is already sorted
}

std::vector<std::string> Graph::in_neighbors(const std::string& id) const {
    std::vector<std::string> in;
    for (const auto& [u, v] : effective_edges()) {
        if (v == id) in.push_back(u);
    }
    return in;
}

bool Graph::node_pending(const std::string& id) const {
    return has_node(id) && !evaluated(id) && !skipped(id);
}

std::vector<std::string> Graph::compose_deps(const std::string& id) const {
    const NodeDef& def = node(id);
    std::vector<std::string> out;
    for (const auto& dep : def.deps) {
        if (edge_effective(dep, id)) out.push_back(dep);
    }
    auto it = temp_dep_order_.find(id);
    if (it != temp_dep_order_.end()) {
        for (const auto& dep : it->second) {
            if (edge_effective(dep, id) &&
                std::find(out.begin(), out.end(), dep) == out.end()) {
                out.push_back(dep);
            }
        }
    }
    return out;
}

std::vector<std::string> Graph::find_path(const std::string& from, const std::string& to) const {
    if (from == to) return {from};
    auto edges = effective_edges();
    std::map<std::string, std::string> parent;
    std::deque<std::string> q{from};
    parent[from] = from;
    while (!q.empty()) {
        std::string cur = q.front();
        q.pop_front();
        for (const auto& [u, v] : edges) {
            if (u != cur || parent.count(v)) continue;
            parent[v] = cur;
            if (v == to) {
                std::vector<std::string> path{to};
                std::string walk = to;
                while (walk != from) {
                    walk = parent[walk];
                    path.push_back(walk);
                }
                std::reverse(path.begin(), path.end());
                return path;
            }
            q.push_back(v);
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Graph: pass lifecycle

void Graph::begin_pass() {
    if (mid_pass_) {
        throw GraphStateError("begin_pass called while a pass is already active");
    }
    mid_pass_ = true;
    dynamic_nodes_added_ = 0;
    evaluated_.clear();
    skipped_.clear();
    temp_nodes_.clear();
    temp_edges_added_.clear();
    temp_edges_removed_.clear();
    temp_dep_order_.clear();
    pending_in_degree_.clear();
    frontier_.clear();
    for (const auto& [id, _] : permanent_nodes_) pending_in_degree_[id] = 0;
    for (const auto& [u, v] : permanent_edges_) ++pending_in_degree_[v];
    // Sorted map iteration seeds the frontier in ascending id order.
    for (const auto& [id, d] : pending_in_degree_) {
        if (d == 0) frontier_.push_back(id);
    }
}

void Graph::end_pass() {
    if (!mid_pass_) {
        throw GraphStateError("end_pass called without an active pass");
    }
    temp_nodes_.clear();
    temp_edges_added_.clear();
    temp_edges_removed_.clear();
    temp_dep_order_.clear();
    evaluated_.clear();
    skipped_.clear();
    pending_in_degree_.clear();
    frontier_.clear();
    dynamic_nodes_added_ = 0;
    mid_pass_ = false;
}

std::optional<std::string> Graph::next_ready() {
    if (!mid_pass_) {
        throw GraphStateError("next_ready called without an active pass");
    }
    while (!frontier_.empty()) {
        std::string id = frontier_.front();
        frontier_.pop_front();
        if (node_pending(id)) return id;
    }
    return std::nullopt;
}

void Graph::mark_evaluated(const std::string& id) {
    if (!mid_pass_) {
        throw GraphStateError("mark_evaluated called without an active pass");
    }
    if (!has_node(id)) {
        throw GraphStateError("mark_evaluated: unknown node '" + id + "'");
    }
    if (evaluated_.count(id) || skipped_.count(id)) {
        throw GraphStateError("mark_evaluated: node '" + id + "' already settled");
    }
    evaluated_.insert(id);
    for (const auto& succ : out_neighbors(id)) {
        if (!node_pending(succ)) continue;
        if (--pending_in_degree_[succ] == 0) {
            frontier_.push_back(succ);
        }
    }
}

bool Graph::all_done() const {
    for (const auto& [id, _] : permanent_nodes_) {
        if (node_pending(id)) return false;
    }
    for (const auto& [id, _] : temp_nodes_) {
        if (node_pending(id)) return false;
    }
    return true;
}

std::vector<std::string> Graph::pending_nodes() const {
    std::vector<std::string> out;
    for (const auto& id : effective_node_ids()) {
        if (node_pending(id)) out.push_back(id);
    }
    return out;
}

void Graph::remove_from_frontier(const std::string& id) {
    frontier_.erase(std::remove(frontier_.begin(), frontier_.end(), id), frontier_.end());
}

// Overlay bookkeeping for dropping one effective edge: a temporary edge is
// simply forgotten, a permanent one is masked until end_pass.
void Graph::drop_effective_edge(const std::string& u, const std::string& v) {
    std::pair<std::string, std::string> e{u, v};
    if (temp_edges_added_.count(e)) {
        temp_edges_added_.erase(e);
        auto it = temp_dep_order_.find(v);
        if (it != temp_dep_order_.end()) {
            auto& order = it->second;
            order.erase(std::remove(order.begin(), order.end(), u), order.end());
        }
    } else {
        temp_edges_removed_.insert(e);
    }
}

// ---------------------------------------------------------------------------
// Graph: dynamic mutation

OpResult Graph::apply_dynamic_op(const DynamicOp& op) {
    if (!mid_pass_) {
        throw GraphStateError("dynamic ops are only valid while a pass is running");
    }
    switch (op.kind) {
        case DynamicOp::Kind::AddNode: {
            const NodeDef& def = op.node;
            if (auto problem = node_shape_problem(def)) {
                return OpResult::reject(RejectKind::InvalidNode, *problem);
            }
            if (has_node(def.id)) {
                return OpResult::reject(RejectKind::DuplicateId,
                                        "node id already in use: " + def.id);
            }
            for (const auto& dep : def.deps) {
                if (!has_node(dep)) {
                    return OpResult::reject(RejectKind::UnknownEndpoint,
                                            "unknown dependency: " + dep);
                }
                if (skipped(dep)) {
                    return OpResult::reject(RejectKind::AlreadyRemoved,
                                            "dependency was removed this pass: " + dep);
                }
            }
            // A fresh node with only incoming edges cannot close a cycle, and
            // the new node is trivially unevaluated, so the add is safe.
            if (dynamic_nodes_added_ + 1 > dynamic_node_budget_) {
                throw DynamicBudgetError(dynamic_node_budget_);
            }
            ++dynamic_nodes_added_;
            NodeDef stored = def;
            stored.temporary = true;
            temp_nodes_.emplace(stored.id, stored);
            int pending = 0;
            for (const auto& dep : stored.deps) {
                temp_edges_added_.emplace(dep, stored.id);
                if (node_pending(dep)) ++pending;
            }
            pending_in_degree_[stored.id] = pending;
            if (pending == 0) frontier_.push_back(stored.id);
            return OpResult::ok();
        }

        case DynamicOp::Kind::AddEdge: {
            const std::string& u = op.from;
            const std::string& v = op.to;
            if (!has_node(u) || !has_node(v)) {
                return OpResult::reject(RejectKind::UnknownEndpoint,
                                        "unknown endpoint: " + (has_node(u) ? v : u));
            }
            if (u == v) {
                return OpResult::reject(RejectKind::CycleIntroduced,
                                        "self edge: " + render_cycle_path({u, u}));
            }
            if (edge_effective(u, v)) {
                return OpResult::reject(RejectKind::DuplicateId,
                                        "edge already present: " + u + " -> " + v);
            }
            if (evaluated(v)) {
                return OpResult::reject(
                    RejectKind::EvaluatedTarget,
                    "target '" + v + "' was already evaluated this pass");
            }
            if (skipped(u) || skipped(v)) {
                return OpResult::reject(RejectKind::AlreadyRemoved,
                                        "endpoint was removed this pass");
            }
            auto path = find_path(v, u);
            if (!path.empty()) {
                path.insert(path.begin(), u);
                return OpResult::reject(RejectKind::CycleIntroduced,
                                        "cycle introduced: " + render_cycle_path(path));
            }
            std::pair<std::string, std::string> e{u, v};
            if (temp_edges_removed_.count(e)) {
                // Restoring a masked permanent edge; it reappears in its
                // declared dependency position.
                temp_edges_removed_.erase(e);
            } else {
                temp_edges_added_.insert(e);
                temp_dep_order_[v].push_back(u);
            }
            if (node_pending(u)) {
                if (++pending_in_degree_[v] == 1) remove_from_frontier(v);
            }
            return OpResult::ok();
        }

        case DynamicOp::Kind::RemoveEdge: {
            const std::string& u = op.from;
            const std::string& v = op.to;
            if (!has_node(u) || !has_node(v)) {
                return OpResult::reject(RejectKind::UnknownEndpoint,
                                        "unknown endpoint: " + (has_node(u) ? v : u));
            }
            if (!edge_effective(u, v)) {
                return OpResult::reject(RejectKind::MissingEdge,
                                        "no such edge: " + u + " -> " + v);
            }
            if (evaluated(u) || evaluated(v)) {
                return OpResult::reject(
                    RejectKind::EvaluatedEndpoint,
                    "endpoint '" + (evaluated(u) ? u : v) + "' was already evaluated this pass");
            }
            drop_effective_edge(u, v);
            if (node_pending(u) && node_pending(v)) {
                if (--pending_in_degree_[v] == 0) frontier_.push_back(v);
            }
            return OpResult::ok();
        }

        case DynamicOp::Kind::RemoveNode: {
            const std::string& id = op.to;
            if (!has_node(id)) {
                return OpResult::reject(RejectKind::UnknownEndpoint, "unknown node: " + id);
            }
            if (evaluated(id)) {
                return OpResult::reject(
                    RejectKind::EvaluatedTarget,
                    "node '" + id + "' was already evaluated this pass");
            }
            if (skipped(id)) {
                return OpResult::reject(RejectKind::AlreadyRemoved,
                                        "node '" + id + "' was already removed this pass");
            }
            for (const auto& pred : in_neighbors(id)) {
                drop_effective_edge(pred, id);
            }
            for (const auto& succ : out_neighbors(id)) {
                drop_effective_edge(id, succ);
                // The node was pending until now, so it still counted toward
                // every pending successor.
                if (node_pending(succ)) {
                    if (--pending_in_degree_[succ] == 0) frontier_.push_back(succ);
                }
            }
            skipped_.insert(id);
            remove_from_frontier(id);
            return OpResult::ok();
        }
    }
    return OpResult::reject(RejectKind::InvalidNode, "unhandled op kind");
}

// ---------------------------------------------------------------------------
// Validation

std::string Finding::message() const {
    std::string out = code;
    if (!node_id.empty()) out += " [" + node_id + "]";
    if (!detail.empty()) out += ": " + detail;
    return out;
}

std::vector<std::string> standard_schema_roots() {
    return {
        "instruction_manual", "subgoals",        "action_summary", "skills",
        "kb",                 "unknown",         "history",        "environment",
        "allowed_actions",    "config",          "feedback",       "pending_action",
    };
}

std::vector<Finding> validate_spec(const GraphSpec& spec,
                                   const std::vector<std::string>& known_after_query_hooks,
                                   const std::vector<std::string>& known_compose_tags,
                                   const std::vector<std::string>& schema_roots) {
    std::vector<Finding> findings;
    std::set<std::string> ids;
    for (const auto& def : spec.nodes) {
        if (!ids.insert(def.id).second) {
            findings.push_back({"DuplicateId", def.id, "node id appears more than once"});
        }
    }
    const std::set<std::string> hooks(known_after_query_hooks.begin(),
                                      known_after_query_hooks.end());
    const std::set<std::string> composes(known_compose_tags.begin(), known_compose_tags.end());
    const std::set<std::string> roots(schema_roots.begin(), schema_roots.end());

    for (const auto& def : spec.nodes) {
        if (def.id.empty()) {
            findings.push_back({"EmptyId", "", "node id must be non-empty"});
        }
        std::set<std::string> seen_deps;
        for (const auto& dep : def.deps) {
            if (dep == def.id) {
                findings.push_back({"SelfDependency", def.id, "node depends on itself"});
                continue;
            }
            if (!seen_deps.insert(dep).second) {
                findings.push_back(
                    {"DuplicateDependency", def.id, "dependency listed twice: " + dep});
                continue;
            }
            if (!ids.count(dep)) {
                findings.push_back({"UnknownDependency", def.id, "depends on unknown node: " + dep});
            }
        }
        if (!def.after_query.empty() && !hooks.count(def.after_query)) {
            findings.push_back({"UnknownHook", def.id, "unknown after-query hook: " + def.after_query});
        }
        if (def.compose != "default" && !composes.count(def.compose)) {
            findings.push_back({"UnknownCompose", def.id, "unknown compose tag: " + def.compose});
        }
        for (const auto& key : extract_template_keys(def.prompt)) {
            auto segments = split_db_path(key);
            if (segments.empty() || !roots.count(segments.front())) {
                findings.push_back({"UnresolvedDbKey", def.id,
                                    "$db." + key + "$ is outside the declared database schema"});
            }
        }
    }

    // Cycle detection over the well-formed portion of the graph file.
    std::map<std::string, int> indeg;
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& def : spec.nodes) indeg[def.id] = 0;
    for (const auto& def : spec.nodes) {
        for (const auto& dep : def.deps) {
            if (dep != def.id && ids.count(dep)) {
                if (edges.emplace(dep, def.id).second) ++indeg[def.id];
            }
        }
    }
    std::deque<std::string> q;
    for (const auto& [id, d] : indeg) {
        if (d == 0) q.push_back(id);
    }
    std::size_t settled = 0;
    while (!q.empty()) {
        std::string id = q.front();
        q.pop_front();
        ++settled;
        for (const auto& [u, v] : edges) {
            if (u == id && --indeg[v] == 0) q.push_back(v);
        }
    }
    if (settled != indeg.size()) {
        std::string start;
        for (const auto& [id, d] : indeg) {
            if (d > 0) {
                start = id;
                break;
            }
        }
        std::vector<std::string> path{start};
        std::set<std::string> on_path{start};
        std::string cur = start;
        while (true) {
            std::string next;
            for (const auto& [u, v] : edges) {
                if (u == cur && indeg[v] > 0) {
                    next = v;
                    break;
                }
            }
            if (on_path.count(next)) {
                auto it = std::find(path.begin(), path.end(), next);
                std::vector<std::string> cycle(it, path.end());
                cycle.push_back(next);
                findings.push_back({"Cycle", next, render_cycle_path(cycle)});
                break;
            }
            path.push_back(next);
            on_path.insert(next);
            cur = next;
        }
    }
    return findings;
}

}  // namespace promptdag
