#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "promptdag/backend.hpp"
#include "promptdag/engine.hpp"

namespace promptdag {

// Segments are joined by a single blank line to form the rendered prompt.
inline constexpr const char* kSegmentSeparator = "\n\n";

struct PromptSegment {
    enum class Kind { Db, Dependency, OwnPrompt };
    Kind kind = Kind::OwnPrompt;
    std::string source;  // database path or dependency id; empty for the own prompt
    std::string text;
    bool operator==(const PromptSegment& other) const = default;
};

struct ComposedPrompt {
    std::string node_id;
    std::string rendered_text;
    std::vector<PromptSegment> segments;
};

// Assembles the model prompt: database material named by the prompt's
// leading `$db.…$` placeholders, then one segment per dependency output in
// order, then the node's own prompt with inline placeholders substituted.
// Deterministic for a fixed (node, deps, database snapshot).
ComposedPrompt compose_default(const NodeDef& node, const std::vector<DepOutput>& deps,
                               const Database& db, TemplateMode mode = TemplateMode::Strict,
                               std::vector<std::string>* warnings = nullptr);

// The corrective user turn appended after a retryable hook failure.
std::string corrective_turn(const std::string& hook_message);

// ---------------------------------------------------------------------------
// Structured-answer parsing

enum class BlockShape { Map, List, YesNo, LabeledFields };

// Extracts the first well-formed structured block matching the shape:
// fenced ``` blocks are tried first, then bare balanced JSON regions, then
// whole-text line formats (key: value lines for maps, "- item" lines for
// lists). Throws NoBlockFoundError / ShapeMismatchError (both retryable).
Json parse_structured_block(const std::string& text, BlockShape shape);

// ---------------------------------------------------------------------------
// After-query hooks

struct HookResult {
    Json parsed;
    std::vector<DynamicOp> ops;
};

struct HookContext {
    const NodeDef& node;
    const std::string& raw_answer;
    const Database& db;  // committed state (read-only)
    DbStage& stage;      // writes land here; committed only on hook success
    const Graph& graph;
};

using Hook = std::function<HookResult(HookContext&)>;

class HookRegistry {
public:
    HookRegistry() = default;

    // Registry preloaded with the built-in hooks: pass_through, parse_map,
    // parse_yes_no, gate_branch, kb_add, unknown_merge, action_emit.
    static HookRegistry with_builtins();

    void put(const std::string& id, Hook hook);
    bool has(const std::string& id) const { return hooks_.count(id) > 0; }
    const Hook& get(const std::string& id) const;  // throws UnknownHookError
    std::vector<std::string> ids() const;

private:
    std::map<std::string, Hook> hooks_;
};

// ---------------------------------------------------------------------------
// Node evaluation

struct EvalLimits {
    int max_retries = 3;  // total attempts per node, >= 1
    TemplateMode template_mode = TemplateMode::Strict;
};

// Single-node output as seen by callers outside the engine.
struct NodeOutput {
    std::string node_id;
    std::string raw_answer;
    Json parsed;
    int retries_used = 0;
};

// Compose, query, and post-process one node: on a retryable hook failure the
// model is re-queried with the hook's message appended as one corrective
// user turn, up to limits.max_retries total attempts. Hook database writes
// are staged and committed only when the hook succeeds.
NodeOutcome evaluate_node(const NodeDef& node, const std::vector<DepOutput>& deps, Database& db,
                          const Graph& graph, Backend& backend, const BackendProfile& profile,
                          const HookRegistry& hooks, const EvalLimits& limits, int pass_index);

// NodeEvaluator wiring compose + backend + hooks into run_pass.
class RuntimeEvaluator : public NodeEvaluator {
public:
    RuntimeEvaluator(Backend& backend, ProfileSet profiles = ProfileSet{},
                     HookRegistry hooks = HookRegistry::with_builtins(), EvalLimits limits = {});

    NodeOutcome evaluate(const NodeDef& node, const std::vector<DepOutput>& deps, Database& db,
                         const Graph& graph, int pass_index) override;

    HookRegistry& hooks() { return hooks_; }
    EvalLimits& limits() { return limits_; }
    const ProfileSet& profiles() const { return profiles_; }

private:
    Backend* backend_;
    ProfileSet profiles_;
    HookRegistry hooks_;
    EvalLimits limits_;
};

}  // namespace promptdag
