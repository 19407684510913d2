#include "promptdag/node_runtime.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

namespace promptdag {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

ComposedPrompt compose_default(const NodeDef& node, const std::vector<DepOutput>& deps,
                               const Database& db, TemplateMode mode,
                               std::vector<std::string>* warnings) {
    ComposedPrompt out;
    out.node_id = node.id;

    // Leading `$db.…$` placeholders (whitespace-separated) become standalone
    // database segments instead of inline substitutions.
    const std::string& prompt = node.prompt;
    std::size_t rest = 0;
    while (true) {
        std::size_t probe = rest;
        while (probe < prompt.size() && std::isspace(static_cast<unsigned char>(prompt[probe])))
            ++probe;
        auto m = match_db_placeholder(prompt, probe);
        if (!m) break;
        const auto& [path, consumed] = *m;
        std::string text;
        if (const Json* value = db.get(path)) {
            text = render_value_text(*value);
        } else if (mode == TemplateMode::Strict) {
            throw UnresolvedTemplateKeyError(path);
        } else if (warnings) {
            warnings->push_back(path);
        }
        if (!text.empty())
            out.segments.push_back({PromptSegment::Kind::Db, path, text});
        rest = probe + consumed;
    }

    for (const DepOutput& dep : deps) {
        std::string text = "Output of subtask '" + dep.id + "':\n" + dep.text;
        out.segments.push_back({PromptSegment::Kind::Dependency, dep.id, text});
    }

    std::string own = prompt.substr(rest);
    if (rest > 0) own = trim(own);
    own = db.resolve_template(own, mode, warnings);
    if (!own.empty()) out.segments.push_back({PromptSegment::Kind::OwnPrompt, "", own});

    for (std::size_t i = 0; i < out.segments.size(); ++i) {
        if (i > 0) out.rendered_text += kSegmentSeparator;
        out.rendered_text += out.segments[i].text;
    }
    return out;
}

std::string corrective_turn(const std::string& hook_message) {
    return "Your previous answer was invalid: " + hook_message +
           ". Answer again following the required format.";
}

// ---------------------------------------------------------------------------
// Structured-answer parsing

namespace {

// Content of every ```-fenced block, in order. An optional language tag on
// the opening fence line is discarded.
std::vector<std::string> fenced_blocks(const std::string& text) {
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find("```", pos);
        if (open == std::string::npos) break;
        std::size_t body = text.find('\n', open + 3);
        if (body == std::string::npos) break;
        ++body;
        std::size_t close = text.find("```", body);
        if (close == std::string::npos) break;
        blocks.push_back(trim(text.substr(body, close - body)));
        pos = close + 3;
    }
    return blocks;
}

// First balanced open…close region, quote-aware so brackets inside JSON
// strings do not end the region early.
std::optional<std::string> balanced_region(const std::string& text, char open, char close) {
    std::size_t start = text.find(open);
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == open)
            ++depth;
        else if (c == close && --depth == 0)
            return text.substr(start, i + 1 - start);
    }
    return std::nullopt;
}

std::optional<Json> try_json(const std::string& candidate) {
    Json parsed = Json::parse(candidate, nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    return parsed;
}

// "key: value" per non-empty line (an optional "- " bullet prefix is
// tolerated); keys must be non-empty and the colon present on every line.
std::optional<Json> try_line_map(const std::string& candidate) {
    Json map = Json::object();
    std::istringstream in(candidate);
    std::string line;
    int fields = 0;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("- ", 0) == 0) t = trim(t.substr(2));
        std::size_t colon = t.find(':');
        if (colon == std::string::npos) return std::nullopt;
        std::string key = trim(t.substr(0, colon));
        if (key.empty()) return std::nullopt;
        map[key] = trim(t.substr(colon + 1));
        ++fields;
    }
    if (fields == 0) return std::nullopt;
    return map;
}

// "- item" or "N. item" per non-empty line.
std::optional<Json> try_line_list(const std::string& candidate) {
    Json list = Json::array();
    std::istringstream in(candidate);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("- ", 0) == 0) {
            list.push_back(trim(t.substr(2)));
            continue;
        }
        std::size_t i = 0;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        if (i > 0 && i + 1 < t.size() && t[i] == '.' && t[i + 1] == ' ') {
            list.push_back(trim(t.substr(i + 2)));
            continue;
        }
        return std::nullopt;
    }
    if (list.empty()) return std::nullopt;
    return list;
}

std::optional<Json> first_yes_no_token(const std::string& text) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
        std::string word = lower(text.substr(i, j - i));
        if (word == "yes") return Json("yes");
        if (word == "no") return Json("no");
        i = j;
    }
    return std::nullopt;
}

}  // namespace

Json parse_structured_block(const std::string& text, BlockShape shape) {
    if (shape == BlockShape::YesNo) {
        if (auto token = first_yes_no_token(text)) return *token;
        throw NoBlockFoundError("answer contains no yes/no token");
    }

    std::vector<std::string> candidates = fenced_blocks(text);
    bool saw_candidate = !candidates.empty();
    std::string mismatch;

    auto try_candidate = [&](const std::string& candidate) -> std::optional<Json> {
        if (auto parsed = try_json(candidate)) {
            if (shape == BlockShape::Map && parsed->is_object()) return parsed;
            if (shape == BlockShape::List && parsed->is_array()) return parsed;
            if (shape == BlockShape::LabeledFields && parsed->is_object()) {
                // Labeled fields are flat string-valued entries.
                Json fields = Json::object();
                for (auto it = parsed->begin(); it != parsed->end(); ++it)
                    fields[it.key()] = it->is_string() ? it->get<std::string>()
                                                       : render_value_text(*it);
                return fields;
            }
            if (mismatch.empty())
                mismatch = "found a structured block of the wrong shape: " +
                           std::string(parsed->type_name());
            return std::nullopt;
        }
        if (shape == BlockShape::Map || shape == BlockShape::LabeledFields) {
            if (auto map = try_line_map(candidate)) return map;
        }
        if (shape == BlockShape::List) {
            if (auto list = try_line_list(candidate)) return list;
        }
        return std::nullopt;
    };

    for (const std::string& block : candidates)
        if (auto value = try_candidate(block)) return *value;

    char open = (shape == BlockShape::List) ? '[' : '{';
    char close = (shape == BlockShape::List) ? ']' : '}';
    if (auto bare = balanced_region(text, open, close)) {
        saw_candidate = true;
        if (auto value = try_candidate(*bare)) return *value;
    }

    // Whole answer as bare line format.
    if (shape == BlockShape::Map || shape == BlockShape::LabeledFields) {
        if (auto map = try_line_map(text)) return *map;
    }
    if (shape == BlockShape::List) {
        if (auto list = try_line_list(text)) return *list;
    }

    if (saw_candidate)
        throw ShapeMismatchError(mismatch.empty() ? "structured block does not match expected shape"
                                                  : mismatch);
    throw NoBlockFoundError("answer contains no structured block");
}

// ---------------------------------------------------------------------------
// Hook registry

void HookRegistry::put(const std::string& id, Hook hook) { hooks_[id] = std::move(hook); }

const Hook& HookRegistry::get(const std::string& id) const {
    auto it = hooks_.find(id);
    if (it == hooks_.end()) throw UnknownHookError(id);
    return it->second;
}

std::vector<std::string> HookRegistry::ids() const {
    std::vector<std::string> out;
    out.reserve(hooks_.size());
    for (const auto& [id, hook] : hooks_) out.push_back(id);
    return out;
}

// ---------------------------------------------------------------------------
// Node evaluation

namespace {

bool retryable(const Error& e) {
    return dynamic_cast<const AfterQueryRetry*>(&e) != nullptr ||
           dynamic_cast<const NoBlockFoundError*>(&e) != nullptr ||
           dynamic_cast<const ShapeMismatchError*>(&e) != nullptr ||
           dynamic_cast<const SchemaViolationError*>(&e) != nullptr ||
           dynamic_cast<const UnparseableAnswerError*>(&e) != nullptr ||
           dynamic_cast<const UnknownActionError*>(&e) != nullptr ||
           dynamic_cast<const NonPositiveRepeatsError*>(&e) != nullptr;
}

}  // namespace

NodeOutcome evaluate_node(const NodeDef& node, const std::vector<DepOutput>& deps, Database& db,
                          const Graph& graph, Backend& backend, const BackendProfile& profile,
                          const HookRegistry& hooks, const EvalLimits& limits, int pass_index) {
    if (limits.max_retries < 1)
        throw Error("max_retries must be at least 1, got " + std::to_string(limits.max_retries));
    if (node.compose != "default")
        throw UnknownHookError(node.compose);

    const Hook* hook = node.after_query.empty() ? nullptr : &hooks.get(node.after_query);
    ComposedPrompt composed = compose_default(node, deps, db, limits.template_mode);

    std::vector<Message> messages{{"user", composed.rendered_text}};
    Usage total_usage;
    std::string last_message;

    for (int attempt = 1; attempt <= limits.max_retries; ++attempt) {
        CallContext ctx;
        ctx.node_id = node.id;
        ctx.pass_index = pass_index;
        ctx.attempt = attempt;
        auto [raw, usage] = backend.complete(messages, profile, ctx);
        total_usage += usage;

        if (!hook) {
            NodeOutcome out;
            out.composed_prompt = composed.rendered_text;
            out.raw_answer = raw;
            out.parsed = Json(raw);
            out.retries_used = 0;
            out.usage = total_usage;
            return out;
        }

        DbStage stage(db);
        HookContext hctx{node, raw, db, stage, graph};
        try {
            HookResult result = (*hook)(hctx);
            stage.commit(db);
            NodeOutcome out;
            out.composed_prompt = composed.rendered_text;
            out.raw_answer = raw;
            out.parsed = std::move(result.parsed);
            out.retries_used = attempt - 1;
            out.usage = total_usage;
            out.ops = std::move(result.ops);
            return out;
        } catch (const Error& e) {
            if (!retryable(e)) throw;
            last_message = e.what();
            if (attempt < limits.max_retries)
                messages.push_back({"user", corrective_turn(last_message)});
        }
    }
    throw AfterQueryExhaustedError(node.id, last_message);
}

RuntimeEvaluator::RuntimeEvaluator(Backend& backend, ProfileSet profiles, HookRegistry hooks,
                                   EvalLimits limits)
    : backend_(&backend),
      profiles_(std::move(profiles)),
      hooks_(std::move(hooks)),
      limits_(limits) {}

NodeOutcome RuntimeEvaluator::evaluate(const NodeDef& node, const std::vector<DepOutput>& deps,
                                       Database& db, const Graph& graph, int pass_index) {
    const BackendProfile& profile = profiles_.resolve(node.model);
    return evaluate_node(node, deps, db, graph, *backend_, profile, hooks_, limits_, pass_index);
}

}  // namespace promptdag
