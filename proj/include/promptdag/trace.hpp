#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "promptdag/database.hpp"

namespace promptdag {

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double cost = 0.0;

    Usage& operator+=(const Usage& other) {
        prompt_tokens += other.prompt_tokens;
        completion_tokens += other.completion_tokens;
        cost += other.cost;
        return *this;
    }
    bool operator==(const Usage& other) const = default;
};

// One evaluated node within a pass, in evaluation order.
struct TraceEntry {
    std::string node_id;
    std::string composed_prompt;
    std::string raw_answer;
    Json parsed;
    int retries = 0;
    Usage usage;
    // Dynamic ops emitted by this node's after-query hook, with the
    // accept/reject outcome: {"op":..., "accepted":bool, "reason":string}.
    Json dynamic_ops = Json::array();

    bool operator==(const TraceEntry& other) const = default;
};

struct PassTrace {
    int pass_index = 1;
    std::vector<TraceEntry> entries;
    bool aborted = false;
    std::string abort_node;
    std::string abort_cause;

    Usage totals() const {
        Usage total;
        for (const auto& e : entries) total += e.usage;
        return total;
    }
    std::vector<std::string> evaluation_order() const {
        std::vector<std::string> order;
        order.reserve(entries.size());
        for (const auto& e : entries) order.push_back(e.node_id);
        return order;
    }
    const TraceEntry* entry_for(const std::string& node_id) const {
        for (const auto& e : entries)
            if (e.node_id == node_id) return &e;
        return nullptr;
    }

    bool operator==(const PassTrace& other) const = default;
};

// Line-delimited trace format: one "entry" record per evaluated node, an
// "abort" record when the pass aborted, and one "end" record per pass
// carrying the usage totals. Re-importable losslessly.
void export_traces(const std::vector<PassTrace>& traces, std::ostream& out);
void export_traces_file(const std::vector<PassTrace>& traces, const std::string& path);
std::vector<PassTrace> import_traces(std::istream& in);
std::vector<PassTrace> import_traces_file(const std::string& path);

}  // namespace promptdag
