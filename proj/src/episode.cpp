#include "promptdag/episode.hpp"

#include <exception>
#include <fstream>

namespace promptdag {

namespace {

EpisodeFailureError::Kind classify(const NodeEvaluationFailedError& failure) {
    try {
        std::rethrow_if_nested(failure);
    } catch (const BackendError&) {
        return EpisodeFailureError::Kind::Backend;
    } catch (const TimeoutError&) {
        return EpisodeFailureError::Kind::Backend;
    } catch (const MissingCredentialsError&) {
        return EpisodeFailureError::Kind::Backend;
    } catch (const ScriptError&) {
        return EpisodeFailureError::Kind::Backend;
    } catch (...) {
        return EpisodeFailureError::Kind::Node;
    }
    return EpisodeFailureError::Kind::Node;
}

std::string db_text(const Database& db, const std::string& path) {
    const Json* value = db.get(path);
    return value ? render_value_text(*value) : std::string{};
}

void refresh_feedback(Database& db, const std::string& skill, std::int64_t t) {
    if (!skill.empty() && db.skill_known(skill) && feedback_due(db, skill, t))
        db.set("feedback", build_feedback_context(db, skill));
    else
        db.set("feedback", "NA");
}

}  // namespace

AgentConfig AgentConfig::from_json(const Json& j) {
    if (!j.is_object()) throw Error("episode config must be a JSON object");
    AgentConfig config;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& value = it.value();
        if (key == "max_steps") {
            if (!value.is_number_integer() || value.get<int>() < 0)
                throw Error("max_steps must be a non-negative integer");
            config.max_steps = value.get<int>();
        } else if (key == "max_retries") {
            if (!value.is_number_integer() || value.get<int>() < 1)
                throw Error("max_retries must be a positive integer");
            config.limits.max_retries = value.get<int>();
        } else if (key == "strict_templates") {
            if (!value.is_boolean()) throw Error("strict_templates must be a boolean");
            config.limits.template_mode =
                value.get<bool>() ? TemplateMode::Strict : TemplateMode::Lenient;
        } else if (key == "exports") {
            if (!value.is_object()) throw Error("exports must be a map of node id to path");
            for (auto e = value.begin(); e != value.end(); ++e) {
                if (!e->is_string()) throw Error("export path for '" + e.key() + "' must be text");
                config.exports[e.key()] = e->get<std::string>();
            }
        } else if (key == "summaries") {
            if (!value.is_object()) throw Error("summaries must be a map");
            for (auto s = value.begin(); s != value.end(); ++s) {
                if (!s->is_string())
                    throw Error("summary path '" + s.key() + "' must be text");
                const std::string path = s->get<std::string>();
                if (s.key() == "obs")
                    config.summaries.obs = path;
                else if (s.key() == "plan")
                    config.summaries.plan = path;
                else if (s.key() == "action")
                    config.summaries.action = path;
                else if (s.key() == "skill")
                    config.summaries.skill = path;
                else
                    throw Error("unknown summary field '" + s.key() + "'");
            }
        } else if (key == "seed_db") {
            if (!value.is_object()) throw Error("seed_db must be a map of database paths");
            config.seed_db = value;
        } else {
            throw Error("unknown episode config field '" + key + "'");
        }
    }
    return config;
}

AgentConfig AgentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open episode config: " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("episode config is not valid JSON: " + path);
    return from_json(j);
}

EpisodeResult run_episode(Graph& graph, EnvAdapter& env, NodeEvaluator& evaluator, Database& db,
                          const AgentConfig& config) {
    EpisodeResult result;

    for (auto it = config.seed_db.begin(); it != config.seed_db.end(); ++it)
        db.set(it.key(), it.value());

    try {
        db.set("environment.observation", env.reset());
        db.set("instruction_manual", env.manual());
        db.set("allowed_actions", Json(env.actions()));
    } catch (const std::exception& e) {
        throw EpisodeFailureError(EpisodeFailureError::Kind::Environment, "", e.what(),
                                  std::move(result));
    }
    if (!db.contains("feedback")) db.set("feedback", "NA");

    for (int step = 1; step <= config.max_steps; ++step) {
        PassTrace trace;
        try {
            trace = run_pass(graph, evaluator, db, step);
        } catch (const NodeEvaluationFailedError& e) {
            result.traces.push_back(e.partial_trace());
            result.knowledge = KnowledgeState::from_db(db);
            result.final_db = db.root();
            throw EpisodeFailureError(classify(e), e.node(), e.cause(), std::move(result));
        }
        result.traces.push_back(trace);

        for (const auto& [node_id, path] : config.exports)
            if (const TraceEntry* entry = trace.entry_for(node_id)) db.set(path, entry->parsed);

        const Json* pending = db.get("pending_action");
        if (!pending) {
            result.knowledge = KnowledgeState::from_db(db);
            result.final_db = db.root();
            throw EpisodeFailureError(EpisodeFailureError::Kind::Node, "",
                                      "pass produced no pending_action", std::move(result));
        }
        int max_repeats = 9;
        if (const Json* cap = db.get("config.actor.max_repeats"); cap && cap->is_number_integer())
            max_repeats = cap->get<int>();
        ActionCommand cmd;
        StepOutcome outcome;
        try {
            cmd = emit_action(*pending, env.actions(), max_repeats);
        } catch (const std::exception& e) {
            result.knowledge = KnowledgeState::from_db(db);
            result.final_db = db.root();
            throw EpisodeFailureError(EpisodeFailureError::Kind::Node, "",
                                      std::string("pending_action rejected: ") + e.what(),
                                      std::move(result));
        }
        db.erase("pending_action");
        try {
            outcome = env.step(cmd.action, cmd.repeats);
        } catch (const std::exception& e) {
            result.knowledge = KnowledgeState::from_db(db);
            result.final_db = db.root();
            throw EpisodeFailureError(EpisodeFailureError::Kind::Environment, "", e.what(),
                                      std::move(result));
        }
        result.total_reward += outcome.reward;
        result.steps = step;
        if (auto unlocked = outcome.info.find("new_achievements");
            unlocked != outcome.info.end() && unlocked->is_array())
            for (const Json& name : *unlocked)
                if (name.is_string()) result.achievements.push_back(name.get<std::string>());

        db.set("environment.observation", outcome.observation);
        db.set("environment.last_reward", outcome.reward);
        db.set("environment.last_info", outcome.info);

        StepSummary summary;
        summary.step = step;
        summary.s_obs = db_text(db, config.summaries.obs);
        summary.s_plan = db_text(db, config.summaries.plan);
        if (const Json* action = db.get(config.summaries.action)) summary.s_action = *action;
        summary.skill = db_text(db, config.summaries.skill);
        db.push_step(summary);

        refresh_feedback(db, summary.skill, step);

        if (outcome.done) break;
    }

    result.knowledge = KnowledgeState::from_db(db);
    result.final_db = db.root();
    return result;
}

}  // namespace promptdag
