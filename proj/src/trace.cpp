#include "promptdag/trace.hpp"

#include <fstream>
#include <sstream>

#include "promptdag/errors.hpp"

namespace promptdag {

namespace {

Json entry_record(const PassTrace& trace, const TraceEntry& e) {
    return Json{{"type", "entry"},
                {"pass", trace.pass_index},
                {"node", e.node_id},
                {"prompt", e.composed_prompt},
                {"answer", e.raw_answer},
                {"parsed", e.parsed},
                {"retries", e.retries},
                {"prompt_tokens", e.usage.prompt_tokens},
                {"completion_tokens", e.usage.completion_tokens},
                {"cost", e.usage.cost},
                {"ops", e.dynamic_ops}};
}

}  // namespace

void export_traces(const std::vector<PassTrace>& traces, std::ostream& out) {
    for (const auto& trace : traces) {
        for (const auto& e : trace.entries) out << entry_record(trace, e).dump() << '\n';
        if (trace.aborted) {
            out << Json{{"type", "abort"},
                        {"pass", trace.pass_index},
                        {"node", trace.abort_node},
                        {"cause", trace.abort_cause}}
                       .dump()
                << '\n';
        }
        Usage total = trace.totals();
        out << Json{{"type", "end"},
                    {"pass", trace.pass_index},
                    {"prompt_tokens", total.prompt_tokens},
                    {"completion_tokens", total.completion_tokens},
                    {"cost", total.cost}}
                   .dump()
            << '\n';
    }
    if (!out) throw StorageError("trace export failed: stream in bad state");
}

void export_traces_file(const std::vector<PassTrace>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StorageError("cannot open trace file for writing: " + path);
    export_traces(traces, out);
}

std::vector<PassTrace> import_traces(std::istream& in) {
    std::vector<PassTrace> traces;
    PassTrace current;
    bool open = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json record;
        try {
            record = Json::parse(line);
        } catch (const Json::exception& e) {
            throw CorruptTraceError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!record.is_object() || !record.contains("type") || !record.contains("pass")) {
            throw CorruptTraceError("line " + std::to_string(line_no) + ": malformed record");
        }
        const std::string type = record["type"].get<std::string>();
        int pass = record["pass"].get<int>();
        if (!open) {
            current = PassTrace{};
            current.pass_index = pass;
            open = true;
        } else if (pass != current.pass_index) {
            throw CorruptTraceError("line " + std::to_string(line_no) +
                                    ": pass index changed before end record");
        }
        try {
            if (type == "entry") {
                TraceEntry e;
                e.node_id = record.at("node").get<std::string>();
                e.composed_prompt = record.at("prompt").get<std::string>();
                e.raw_answer = record.at("answer").get<std::string>();
                e.parsed = record.at("parsed");
                e.retries = record.at("retries").get<int>();
                e.usage.prompt_tokens = record.at("prompt_tokens").get<std::int64_t>();
                e.usage.completion_tokens = record.at("completion_tokens").get<std::int64_t>();
                e.usage.cost = record.at("cost").get<double>();
                e.dynamic_ops = record.at("ops");
                current.entries.push_back(std::move(e));
            } else if (type == "abort") {
                current.aborted = true;
                current.abort_node = record.at("node").get<std::string>();
                current.abort_cause = record.at("cause").get<std::string>();
            } else if (type == "end") {
                Usage declared;
                declared.prompt_tokens = record.at("prompt_tokens").get<std::int64_t>();
                declared.completion_tokens = record.at("completion_tokens").get<std::int64_t>();
                declared.cost = record.at("cost").get<double>();
                Usage computed = current.totals();
                if (declared.prompt_tokens != computed.prompt_tokens ||
                    declared.completion_tokens != computed.completion_tokens) {
                    throw CorruptTraceError("line " + std::to_string(line_no) +
                                            ": end-record totals do not match entries");
                }
                traces.push_back(std::move(current));
                open = false;
            } else {
                throw CorruptTraceError("line " + std::to_string(line_no) +
                                        ": unknown record type '" + type + "'");
            }
        } catch (const Json::exception& e) {
            throw CorruptTraceError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (open) throw CorruptTraceError("trace ends mid-pass: missing end record");
    return traces;
}

std::vector<PassTrace> import_traces_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open trace file: " + path);
    return import_traces(in);
}

}  // namespace promptdag
