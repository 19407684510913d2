#pragma once

#include <string>
#include <vector>

#include "promptdag/database.hpp"
#include "promptdag/graph.hpp"
#include "promptdag/trace.hpp"

namespace promptdag {

// Output of an already-evaluated dependency as handed to composition.
struct DepOutput {
    std::string id;
    std::string text;  // rendered form of `parsed`
    Json parsed;
};

// Everything a single node evaluation produced.
struct NodeOutcome {
    std::string composed_prompt;
    std::string raw_answer;
    Json parsed;
    int retries_used = 0;
    Usage usage;
    std::vector<DynamicOp> ops;  // graph mutations requested by the hook
};

class NodeEvaluator {
public:
    virtual ~NodeEvaluator() = default;
    virtual NodeOutcome evaluate(const NodeDef& node, const std::vector<DepOutput>& deps,
                                 Database& db, const Graph& graph, int pass_index) = 0;
};

// A node failed mid-pass. The pass was aborted, all temporary state was
// reverted, and the partial trace (with its abort marker) rides along.
class NodeEvaluationFailedError : public Error {
public:
    NodeEvaluationFailedError(const std::string& node, const std::string& cause,
                              PassTrace partial)
        : Error("node '" + node + "' failed: " + cause),
          node_(node), cause_(cause), partial_(std::move(partial)) {}
    const std::string& node() const { return node_; }
    const std::string& cause() const { return cause_; }
    const PassTrace& partial_trace() const { return partial_; }

private:
    std::string node_;
    std::string cause_;
    PassTrace partial_;
};

// Evaluates every node of the graph once, in dependency order (FIFO frontier,
// ascending-id tie-break at initialization), applying any dynamic ops each
// node's hook emitted. Deterministic for a deterministic evaluator. Returns
// the completed pass trace; the graph is reverted to its permanent shape
// whether the pass finishes or aborts.
PassTrace run_pass(Graph& graph, NodeEvaluator& evaluator, Database& db, int pass_index = 1);

}  // namespace promptdag
