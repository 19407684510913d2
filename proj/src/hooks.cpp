#include "promptdag/agent.hpp"
#include "promptdag/node_runtime.hpp"

namespace promptdag {

namespace {

std::vector<std::string> read_string_list(const DbStage& stage, const std::string& path) {
    std::vector<std::string> out;
    std::optional<Json> value = stage.get(path);
    if (!value || !value->is_array()) return out;
    for (const Json& item : *value)
        if (item.is_string()) out.push_back(item.get<std::string>());
    return out;
}

KnowledgeState knowledge_state(const DbStage& stage) {
    KnowledgeState state;
    if (std::optional<Json> unknown = stage.get("unknown"); unknown && unknown->is_object())
        state.unknown = std::move(*unknown);
    if (std::optional<Json> kb = stage.get("kb"); kb && kb->is_object())
        state.kb = std::move(*kb);
    return state;
}

HookResult hook_pass_through(HookContext& ctx) { return {Json(ctx.raw_answer), {}}; }

HookResult hook_parse_map(HookContext& ctx) {
    return {parse_structured_block(ctx.raw_answer, BlockShape::Map), {}};
}

HookResult hook_parse_yes_no(HookContext& ctx) {
    return {parse_structured_block(ctx.raw_answer, BlockShape::YesNo), {}};
}

HookResult hook_gate_branch(HookContext& ctx) {
    Json fields = parse_structured_block(ctx.raw_answer, BlockShape::LabeledFields);
    GateDecision decision = parse_gate_decision(fields);
    std::vector<DynamicOp> ops =
        gate_branch(decision, ctx.graph, read_string_list(ctx.stage, "config.gate.planner_nodes"),
                    read_string_list(ctx.stage, "config.gate.kb_nodes"));
    return {decision.to_json(), std::move(ops)};
}

HookResult hook_kb_add(HookContext& ctx) {
    Json answer = parse_structured_block(ctx.raw_answer, BlockShape::Map);
    KnowledgeState next = kb_commit(answer, knowledge_state(ctx.stage));
    ctx.stage.set("kb", next.kb);
    ctx.stage.set("unknown", next.unknown);
    return {std::move(answer), {}};
}

HookResult hook_unknown_merge(HookContext& ctx) {
    Json answer = parse_structured_block(ctx.raw_answer, BlockShape::Map);
    KnowledgeState next = unknown_merge(answer, knowledge_state(ctx.stage));
    ctx.stage.set("unknown", next.unknown);
    return {std::move(answer), {}};
}

HookResult hook_action_emit(HookContext& ctx) {
    Json answer = parse_structured_block(ctx.raw_answer, BlockShape::Map);
    std::vector<std::string> actions = read_string_list(ctx.stage, "allowed_actions");
    if (actions.empty())
        throw GraphStateError("database has no allowed_actions list; action_emit cannot validate");
    int max_repeats = 9;
    if (std::optional<Json> cap = ctx.stage.get("config.actor.max_repeats");
        cap && cap->is_number_integer())
        max_repeats = cap->get<int>();
    ActionCommand cmd = emit_action(answer, actions, max_repeats);
    ctx.stage.set("pending_action", cmd.to_json());
    return {cmd.to_json(), {}};
}

}  // namespace

HookRegistry HookRegistry::with_builtins() {
    HookRegistry registry;
    registry.put("pass_through", hook_pass_through);
    registry.put("parse_map", hook_parse_map);
    registry.put("parse_yes_no", hook_parse_yes_no);
    registry.put("gate_branch", hook_gate_branch);
    registry.put("kb_add", hook_kb_add);
    registry.put("unknown_merge", hook_unknown_merge);
    registry.put("action_emit", hook_action_emit);
    return registry;
}

}  // namespace promptdag
