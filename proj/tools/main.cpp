#include <unistd.h>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "promptdag/builder.hpp"
#include "promptdag/episode.hpp"
#include "promptdag/miniforage.hpp"
#include "promptdag/stdio_env.hpp"

namespace {

using namespace promptdag;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitBackend = 4;

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("not valid JSON: " + path);
    return j;
}

// --env accepts "miniforage", "miniforage:SEED", "stdio:COMMAND", or a path
// to an env-spec JSON file whose "env" field uses the same syntax and whose
// remaining fields configure the episode.
std::unique_ptr<EnvAdapter> make_env(const std::string& env_text) {
    if (env_text.rfind("miniforage", 0) == 0) {
        std::uint64_t seed = 0;
        if (auto colon = env_text.find(':'); colon != std::string::npos)
            seed = std::stoull(env_text.substr(colon + 1));
        return std::make_unique<MiniForage>(seed);
    }
    if (env_text.rfind("stdio:", 0) == 0) {
        return std::make_unique<StdioEnvClient>(
            StdioEnvClient::spawn(env_text.substr(6)));
    }
    throw Error("unknown environment '" + env_text +
                "' (expected miniforage[:seed] or stdio:command)");
}

struct RunOptions {
    std::string graph_path;
    std::string env_spec = "miniforage:0";
    std::string backend_path;
    std::string script_path;
    std::string trace_out;
    int max_steps = -1;  // -1: keep the config's value
    bool strict_templates = false;
};

int cmd_validate(const std::string& graph_path) {
    GraphSpec spec;
    try {
        spec = GraphSpec::load(graph_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    std::vector<Finding> findings = validate_spec(spec, HookRegistry::with_builtins().ids(),
                                                  {"default"}, standard_schema_roots());
    for (const Finding& f : findings) std::cout << f.message() << "\n";
    if (findings.empty()) {
        std::cout << "ok: " << spec.nodes.size() << " node(s), no findings\n";
        return kExitOk;
    }
    std::cout << findings.size() << " finding(s)\n";
    return kExitValidation;
}

int cmd_run(const RunOptions& opt) {
    GraphSpec spec;
    try {
        spec = GraphSpec::load(opt.graph_path);
        std::vector<Finding> findings = validate_spec(spec, HookRegistry::with_builtins().ids(),
                                                      {"default"}, standard_schema_roots());
        bool blocking = false;
        for (const Finding& f : findings) {
            std::cerr << f.message() << "\n";
            if (f.code != "UnresolvedDbKey") blocking = true;
        }
        if (blocking) return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    AgentConfig config;
    std::string env_text = opt.env_spec;
    ProfileSet profiles;
    PriceTable prices;
    std::unique_ptr<EnvAdapter> env;
    std::unique_ptr<Backend> backend;
    try {
        if (env_text.size() > 5 && env_text.substr(env_text.size() - 5) == ".json") {
            Json env_spec = read_json_file(env_text);
            if (auto it = env_spec.find("env"); it != env_spec.end()) {
                env_text = it->get<std::string>();
                env_spec.erase("env");
            } else {
                env_text = "miniforage:0";
            }
            config = AgentConfig::from_json(env_spec);
        }
        if (opt.max_steps >= 0) config.max_steps = opt.max_steps;
        if (opt.strict_templates) config.limits.template_mode = TemplateMode::Strict;

        if (!opt.backend_path.empty()) {
            Json backend_spec = read_json_file(opt.backend_path);
            if (auto it = backend_spec.find("profiles"); it != backend_spec.end())
                profiles = ProfileSet::from_json(*it);
            if (auto it = backend_spec.find("prices"); it != backend_spec.end())
                prices = PriceTable::from_json(*it);
        }
        if (!opt.script_path.empty())
            backend = std::make_unique<ScriptedBackend>(
                ScriptedBackend::load_rules(opt.script_path), prices);
        else
            backend = std::make_unique<HttpBackend>(prices);
        env = make_env(env_text);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    Graph graph = Graph::from_spec(spec);
    Database db;
    RuntimeEvaluator evaluator(*backend, profiles, HookRegistry::with_builtins(), config.limits);

    auto write_traces = [&](const std::vector<PassTrace>& traces) {
        if (opt.trace_out.empty()) return;
        export_traces_file(traces, opt.trace_out);
        std::cout << "trace written to " << opt.trace_out << "\n";
    };

    try {
        EpisodeResult result = run_episode(graph, *env, evaluator, db, config);
        write_traces(result.traces);
        Usage totals;
        for (const PassTrace& t : result.traces) totals += t.totals();
        std::cout << "episode complete: " << result.steps << " step(s), reward "
                  << result.total_reward << "\n";
        if (!result.achievements.empty()) {
            std::cout << "achievements:";
            for (const auto& name : result.achievements) std::cout << " " << name;
            std::cout << "\n";
        }
        std::cout << "usage: " << totals.prompt_tokens << " prompt + "
                  << totals.completion_tokens << " completion tokens, cost " << totals.cost
                  << "\n";
        return kExitOk;
    } catch (const EpisodeFailureError& e) {
        write_traces(e.partial().traces);
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == EpisodeFailureError::Kind::Backend ? kExitBackend : kExitRuntime;
    }
}

int cmd_trace(const std::string& path, const std::string& node_filter, int pass_filter) {
    std::vector<PassTrace> traces;
    try {
        traces = import_traces_file(path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    Usage totals;
    int shown = 0;
    for (const PassTrace& trace : traces) {
        if (pass_filter >= 0 && trace.pass_index != pass_filter) continue;
        for (const TraceEntry& entry : trace.entries) {
            if (!node_filter.empty() && entry.node_id != node_filter) continue;
            ++shown;
            totals += entry.usage;
            std::cout << "=== pass " << trace.pass_index << " node " << entry.node_id;
            if (entry.retries > 0) std::cout << " (retries " << entry.retries << ")";
            std::cout << "\n--- prompt\n"
                      << entry.composed_prompt << "\n--- answer\n"
                      << entry.raw_answer << "\n--- tokens " << entry.usage.prompt_tokens
                      << "+" << entry.usage.completion_tokens << " cost " << entry.usage.cost
                      << "\n";
            if (!entry.dynamic_ops.empty())
                std::cout << "--- ops " << entry.dynamic_ops.dump() << "\n";
        }
        if (trace.aborted && (node_filter.empty() || trace.abort_node == node_filter))
            std::cout << "=== pass " << trace.pass_index << " ABORTED at '" << trace.abort_node
                      << "': " << trace.abort_cause << "\n";
    }
    if (shown == 0) {
        std::cout << "no entries\n";
        return kExitOk;
    }
    std::cout << "totals: " << totals.prompt_tokens << " prompt + " << totals.completion_tokens
              << " completion tokens, cost " << totals.cost << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"promptdag: execution engine for LLM agents as prompt DAGs"};
    app.require_subcommand(1);

    auto* build = app.add_subcommand("build", "interactively build or edit a graph file");
    std::string build_graph;
    build->add_option("--graph", build_graph, "graph file to create or edit")->required();

    auto* validate = app.add_subcommand("validate", "structurally validate a graph file");
    std::string validate_graph;
    validate->add_option("--graph", validate_graph, "graph file to check")->required();

    auto* run = app.add_subcommand("run", "run an episode of a graph against an environment");
    RunOptions opt;
    run->add_option("--graph", opt.graph_path, "graph file")->required();
    run->add_option("--env", opt.env_spec,
                    "environment: miniforage[:seed], stdio:command, or env-spec .json");
    run->add_option("--backend", opt.backend_path, "backend config JSON (profiles, prices)");
    run->add_option("--script", opt.script_path,
                    "scripted-backend rules JSON (offline, no network)");
    run->add_option("--max-steps", opt.max_steps, "step limit override");
    run->add_flag("--strict-templates", opt.strict_templates,
                  "fail on unresolved database placeholders");
    run->add_option("--trace-out", opt.trace_out, "write the episode trace (JSONL)");

    auto* trace = app.add_subcommand("trace", "render a trace file");
    std::string trace_path, trace_node;
    int trace_pass = -1;
    trace->add_option("file", trace_path, "trace JSONL file")->required();
    trace->add_option("--node", trace_node, "only entries for this node id");
    trace->add_option("--pass", trace_pass, "only entries for this pass index");

    auto* serve = app.add_subcommand("env-serve",
                                     "serve an environment over framed stdio");
    std::string serve_env_spec = "miniforage:0";
    serve->add_option("--env", serve_env_spec, "environment: miniforage[:seed]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) {
            BuilderSession session(std::cin, std::cout, HookRegistry::with_builtins().ids());
            return session.run(build_graph);
        }
        if (*validate) return cmd_validate(validate_graph);
        if (*run) return cmd_run(opt);
        if (*trace) return cmd_trace(trace_path, trace_node, trace_pass);
        if (*serve) {
            auto env = make_env(serve_env_spec);
            serve_env(*env, STDIN_FILENO, STDOUT_FILENO);
            return kExitOk;
        }
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
