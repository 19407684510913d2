#pragma once

#include <string>
#include <vector>

#include "promptdag/database.hpp"
#include "promptdag/graph.hpp"

namespace promptdag {

// ---------------------------------------------------------------------------
// Gate-based skipping

// The seven yes/no questions the gate node answers about the last step.
struct GateDecision {
    bool unexpected_encounters = false;
    bool mistake = false;
    bool correction_planned = false;
    bool confused = false;
    bool top_subgoal_completed = false;
    bool top_subgoal_changed = false;
    bool replan = false;

    // Planner and knowledge-base work is skipped when nothing indicates the
    // subgoals need updating. correction_planned reports on the past action
    // and does not by itself force an update.
    bool skip() const {
        return !(unexpected_encounters || mistake || confused || top_subgoal_completed ||
                 top_subgoal_changed || replan);
    }

    Json to_json() const;
    bool operator==(const GateDecision& other) const = default;
};

// Reads the seven fields from a labeled-fields answer ("field: yes" lines or
// a JSON object). Throws SchemaViolationError on missing fields or values
// outside yes/no.
GateDecision parse_gate_decision(const Json& fields);

// Remove ops detaching every planner and knowledge-base node for this pass
// when the decision says skip; empty otherwise. Throws
// MisconfiguredNodeSetError when a configured node is not in the graph.
std::vector<DynamicOp> gate_branch(const GateDecision& decision, const Graph& graph,
                                   const std::vector<std::string>& planner_nodes,
                                   const std::vector<std::string>& kb_nodes);

// ---------------------------------------------------------------------------
// Conditional branching

// Picks the branch node matching a yes/no answer and wires it after the
// deciding node (the returned add_node op is temporary by construction).
// Throws UnparseableAnswerError for answers outside yes/no.
DynamicOp conditional_branch(const std::string& answer, NodeDef node_yes, NodeDef node_no,
                             const std::string& deciding_node);

// ---------------------------------------------------------------------------
// Skill feedback cadence

// True iff the number of steps run under `skill` up to and including step
// `t` is a positive multiple of 3.
bool feedback_due(const Database& db, const std::string& skill, std::int64_t t);

// All step summaries recorded under `skill`, chronological, one block per
// step, blocks joined by a blank line. Throws UnknownSkillError.
std::string build_feedback_context(const Database& db, const std::string& skill);

// ---------------------------------------------------------------------------
// Knowledge accretion

// Snapshot of the unknown-information list and the knowledge base, both flat
// maps keyed by item name.
struct KnowledgeState {
    Json unknown = Json::object();  // item -> record (info / flags / …)
    Json kb = Json::object();       // item -> discovered fact text

    static KnowledgeState from_db(const Database& db);
    bool operator==(const KnowledgeState& other) const = default;
};

// Applies a kb-add answer (map item -> flag record). An item moves from the
// unknown list into the knowledge base iff its flags discovered, general,
// unknown, concrete_and_precise, and solid are all yes; its discovery_short
// becomes the stored fact. Existing knowledge-base entries are never
// overwritten. Throws SchemaViolationError on malformed records.
KnowledgeState kb_commit(const Json& answer, KnowledgeState state);

// Merges an unknown-list answer (map item -> record): new items are added,
// existing names keep their current record, and items with novel=no or
// relevant=no — or already present in the knowledge base — are dropped.
// Throws SchemaViolationError on malformed records.
KnowledgeState unknown_merge(const Json& answer, KnowledgeState state);

// ---------------------------------------------------------------------------
// Action emission

struct ActionCommand {
    std::string action;
    int repeats = 1;
    bool hazard = false;

    Json to_json() const;
    bool operator==(const ActionCommand& other) const = default;
};

// Validates an actor answer ({"action","repeats","hazard"}) against the
// environment's action set; repeats below 1 raise NonPositiveRepeatsError,
// above max_repeats are clamped. Throws UnknownActionError for actions
// outside the set and SchemaViolationError for missing fields.
ActionCommand emit_action(const Json& answer, const std::vector<std::string>& action_set,
                          int max_repeats = 9);

// Reads a yes/no flag that may be a JSON boolean or a "yes"/"no" string.
// Throws SchemaViolationError naming `field` otherwise.
bool parse_yes_no_flag(const Json& value, const std::string& field);

}  // namespace promptdag
