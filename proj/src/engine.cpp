#include "promptdag/engine.hpp"

#include <exception>
#include <map>

namespace promptdag {

PassTrace run_pass(Graph& graph, NodeEvaluator& evaluator, Database& db, int pass_index) {
    graph.begin_pass();
    PassTrace trace;
    trace.pass_index = pass_index;
    std::map<std::string, DepOutput> outputs;
    std::string current;
    try {
        while (auto next = graph.next_ready()) {
            current = *next;
            // Copy: hook-emitted ops may grow the node tables mid-iteration.
            const NodeDef def = graph.node(current);
            std::vector<DepOutput> deps;
            for (const auto& dep_id : graph.compose_deps(current)) {
                auto it = outputs.find(dep_id);
                if (it != outputs.end()) deps.push_back(it->second);
            }

            NodeOutcome outcome = evaluator.evaluate(def, deps, db, graph, pass_index);

            outputs[current] =
                DepOutput{current, render_value_text(outcome.parsed), outcome.parsed};
            // Mark before applying ops so the safeguards treat this node as
            // already evaluated: its in-edges are frozen, while fresh nodes
            // may still depend on it.
            graph.mark_evaluated(current);

            trace.entries.push_back(TraceEntry{current, outcome.composed_prompt,
                                               outcome.raw_answer, outcome.parsed,
                                               outcome.retries_used, outcome.usage,
                                               Json::array()});
            TraceEntry& entry = trace.entries.back();
            for (const auto& op : outcome.ops) {
                Json record = op.to_json();
                try {
                    OpResult result = graph.apply_dynamic_op(op);
                    record["accepted"] = result.accepted;
                    if (!result.accepted) record["reason"] = result.reason;
                    entry.dynamic_ops.push_back(std::move(record));
                } catch (const DynamicBudgetError& e) {
                    record["accepted"] = false;
                    record["reason"] = e.what();
                    entry.dynamic_ops.push_back(std::move(record));
                    throw;
                }
            }
        }
        if (!graph.all_done()) {
            std::string pending;
            for (const auto& id : graph.pending_nodes()) {
                if (!pending.empty()) pending += ", ";
                pending += id;
            }
            throw StalledTraversalError("frontier drained with pending nodes: " + pending);
        }
        graph.end_pass();
        return trace;
    } catch (const std::exception& e) {
        trace.aborted = true;
        trace.abort_node = current;
        trace.abort_cause = e.what();
        if (graph.mid_pass()) graph.end_pass();
        // Nesting preserves the original exception type so callers can
        // distinguish backend outages from node-level failures.
        std::throw_with_nested(NodeEvaluationFailedError(current, e.what(), std::move(trace)));
    }
}

}  // namespace promptdag
