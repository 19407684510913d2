#include "promptdag/agent.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace promptdag {

namespace {

std::string trim_lower(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

bool parse_yes_no_flag(const Json& value, const std::string& field) {
    if (value.is_boolean()) return value.get<bool>();
    if (value.is_string()) {
        std::string v = trim_lower(value.get<std::string>());
        if (v == "yes") return true;
        if (v == "no") return false;
    }
    throw SchemaViolationError("field '" + field + "' must be yes or no, got " + value.dump());
}

// ---------------------------------------------------------------------------
// Gate-based skipping

Json GateDecision::to_json() const {
    return Json{{"unexpected_encounters", unexpected_encounters},
                {"mistake", mistake},
                {"correction_planned", correction_planned},
                {"confused", confused},
                {"top_subgoal_completed", top_subgoal_completed},
                {"top_subgoal_changed", top_subgoal_changed},
                {"replan", replan}};
}

GateDecision parse_gate_decision(const Json& fields) {
    if (!fields.is_object())
        throw SchemaViolationError("gate decision must be a map of yes/no fields, got " +
                                   std::string(fields.type_name()));
    auto field = [&](const char* name) {
        auto it = fields.find(name);
        if (it == fields.end())
            throw SchemaViolationError(std::string("gate decision is missing field '") + name +
                                       "'");
        return parse_yes_no_flag(*it, name);
    };
    GateDecision d;
    d.unexpected_encounters = field("unexpected_encounters");
    d.mistake = field("mistake");
    d.correction_planned = field("correction_planned");
    d.confused = field("confused");
    d.top_subgoal_completed = field("top_subgoal_completed");
    d.top_subgoal_changed = field("top_subgoal_changed");
    d.replan = field("replan");
    return d;
}

std::vector<DynamicOp> gate_branch(const GateDecision& decision, const Graph& graph,
                                   const std::vector<std::string>& planner_nodes,
                                   const std::vector<std::string>& kb_nodes) {
    auto require_present = [&](const std::vector<std::string>& set) {
        for (const std::string& id : set)
            if (!graph.has_node(id)) throw MisconfiguredNodeSetError(id);
    };
    require_present(planner_nodes);
    require_present(kb_nodes);

    std::vector<DynamicOp> ops;
    if (!decision.skip()) return ops;
    for (const std::string& id : planner_nodes) ops.push_back(DynamicOp::remove_node(id));
    for (const std::string& id : kb_nodes) ops.push_back(DynamicOp::remove_node(id));
    return ops;
}

// ---------------------------------------------------------------------------
// Conditional branching

DynamicOp conditional_branch(const std::string& answer, NodeDef node_yes, NodeDef node_no,
                             const std::string& deciding_node) {
    std::string token = trim_lower(answer);
    NodeDef* chosen = nullptr;
    if (token == "yes")
        chosen = &node_yes;
    else if (token == "no")
        chosen = &node_no;
    else
        throw UnparseableAnswerError("expected yes or no, got '" + answer + "'");

    if (std::find(chosen->deps.begin(), chosen->deps.end(), deciding_node) == chosen->deps.end())
        chosen->deps.push_back(deciding_node);
    return DynamicOp::add_node(std::move(*chosen));
}

// ---------------------------------------------------------------------------
// Skill feedback cadence

bool feedback_due(const Database& db, const std::string& skill, std::int64_t t) {
    std::int64_t count = 0;
    for (const StepSummary& s : db.window_history(std::numeric_limits<std::int64_t>::max()))
        if (s.skill == skill && s.step <= t) ++count;
    return count > 0 && count % 3 == 0;
}

std::string build_feedback_context(const Database& db, const std::string& skill) {
    std::string out;
    for (const StepSummary& s : db.skill_history(skill)) {
        if (!out.empty()) out += "\n\n";
        out += "Step " + std::to_string(s.step) + ":\n" + s.s_obs + "\n" + s.s_plan + "\n" +
               render_value_text(s.s_action);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Knowledge accretion

KnowledgeState KnowledgeState::from_db(const Database& db) {
    KnowledgeState state;
    if (const Json* unknown = db.get("unknown"); unknown && unknown->is_object())
        state.unknown = *unknown;
    if (const Json* kb = db.get("kb"); kb && kb->is_object()) state.kb = *kb;
    return state;
}

KnowledgeState kb_commit(const Json& answer, KnowledgeState state) {
    if (!answer.is_object())
        throw SchemaViolationError("kb-add answer must be a map of item records, got " +
                                   std::string(answer.type_name()));
    static const char* kCommitFlags[] = {"discovered", "general", "unknown",
                                         "concrete_and_precise", "solid"};
    for (auto it = answer.begin(); it != answer.end(); ++it) {
        const std::string& name = it.key();
        const Json& record = it.value();
        if (!record.is_object())
            throw SchemaViolationError("kb-add record for '" + name + "' must be a map, got " +
                                       std::string(record.type_name()));
        bool commit = true;
        for (const char* flag : kCommitFlags) {
            auto f = record.find(flag);
            if (f == record.end() || !parse_yes_no_flag(*f, flag)) {
                commit = false;
                break;
            }
        }
        if (!commit) continue;
        auto d = record.find("discovery_short");
        if (d == record.end() || !d->is_string() || d->get<std::string>().empty())
            throw SchemaViolationError("kb-add record for '" + name +
                                       "' commits without a non-empty discovery_short");
        // Knowledge-base entries are append-only.
        if (!state.kb.contains(name)) state.kb[name] = d->get<std::string>();
        state.unknown.erase(name);
    }
    return state;
}

KnowledgeState unknown_merge(const Json& answer, KnowledgeState state) {
    if (!answer.is_object())
        throw SchemaViolationError("unknown-list answer must be a map of item records, got " +
                                   std::string(answer.type_name()));
    for (auto it = answer.begin(); it != answer.end(); ++it) {
        const std::string& name = it.key();
        const Json& record = it.value();
        if (!record.is_object())
            throw SchemaViolationError("unknown-list record for '" + name +
                                       "' must be a map, got " +
                                       std::string(record.type_name()));
        auto flag_is_no = [&](const char* flag) {
            auto f = record.find(flag);
            return f != record.end() && !parse_yes_no_flag(*f, flag);
        };
        if (flag_is_no("novel") || flag_is_no("relevant")) continue;
        if (state.kb.contains(name)) continue;
        if (state.unknown.contains(name)) continue;  // existing entry wins
        Json kept = record;
        kept.erase("novel");
        kept.erase("relevant");
        state.unknown[name] = std::move(kept);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Action emission

Json ActionCommand::to_json() const {
    return Json{{"action", action}, {"repeats", repeats}, {"hazard", hazard}};
}

ActionCommand emit_action(const Json& answer, const std::vector<std::string>& action_set,
                          int max_repeats) {
    if (!answer.is_object())
        throw SchemaViolationError("actor answer must be a map, got " +
                                   std::string(answer.type_name()));
    auto action_it = answer.find("action");
    if (action_it == answer.end() || !action_it->is_string())
        throw SchemaViolationError("actor answer is missing a string 'action' field");
    auto repeats_it = answer.find("repeats");
    if (repeats_it == answer.end())
        throw SchemaViolationError("actor answer is missing a 'repeats' field");

    ActionCommand cmd;
    cmd.action = action_it->get<std::string>();
    if (std::find(action_set.begin(), action_set.end(), cmd.action) == action_set.end())
        throw UnknownActionError(cmd.action);

    long long repeats = 0;
    if (repeats_it->is_number_integer()) {
        repeats = repeats_it->get<long long>();
    } else if (repeats_it->is_string()) {
        try {
            repeats = std::stoll(repeats_it->get<std::string>());
        } catch (const std::exception&) {
            throw SchemaViolationError("actor 'repeats' must be an integer, got " +
                                       repeats_it->dump());
        }
    } else {
        throw SchemaViolationError("actor 'repeats' must be an integer, got " +
                                   repeats_it->dump());
    }
    if (repeats < 1) throw NonPositiveRepeatsError(static_cast<int>(repeats));
    cmd.repeats = static_cast<int>(std::min<long long>(repeats, max_repeats));

    if (auto hazard_it = answer.find("hazard"); hazard_it != answer.end())
        cmd.hazard = parse_yes_no_flag(*hazard_it, "hazard");
    return cmd;
}

}  // namespace promptdag
