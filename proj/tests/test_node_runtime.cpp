#include "doctest.h"
#include "promptdag/node_runtime.hpp"

using namespace promptdag;

namespace {

NodeDef make_node(const std::string& id, const std::string& prompt,
                  std::vector<std::string> deps = {}, const std::string& hook = "") {
    NodeDef n;
    n.id = id;
    n.prompt = prompt;
    n.deps = std::move(deps);
    n.after_query = hook;
    return n;
}

DepOutput dep(const std::string& id, const std::string& text) {
    DepOutput d;
    d.id = id;
    d.text = text;
    d.parsed = Json(text);
    return d;
}

Graph empty_graph() { return Graph{}; }

// Backend that records the message list of every attempt.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}

    std::pair<std::string, Usage> complete(const std::vector<Message>& messages,
                                           const BackendProfile&, const CallContext&) override {
        attempts.push_back(messages);
        const std::string& r = responses_.at(std::min(attempts.size(), responses_.size()) - 1);
        return {r, Usage{10, 5, 0.0}};
    }

    std::vector<std::vector<Message>> attempts;

private:
    std::vector<std::string> responses_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Prompt composition

TEST_CASE("compose: prompt without deps or placeholders passes through verbatim") {
    Database db;
    auto composed = compose_default(make_node("n", "Just do the thing.\nNo frills."), {}, db);
    CHECK(composed.rendered_text == "Just do the thing.\nNo frills.");
    REQUIRE(composed.segments.size() == 1);
    CHECK(composed.segments[0].kind == PromptSegment::Kind::OwnPrompt);
}

TEST_CASE("compose: leading placeholders become database segments") {
    Database db;
    db.set("instruction_manual", "Manual text.");
    db.set("kb", Json::object());
    auto composed = compose_default(
        make_node("n", "$db.instruction_manual$\n$db.kb$\n\nNow answer."), {}, db);
    REQUIRE(composed.segments.size() == 3);
    CHECK(composed.segments[0].kind == PromptSegment::Kind::Db);
    CHECK(composed.segments[0].source == "instruction_manual");
    CHECK(composed.segments[0].text == "Manual text.");
    CHECK(composed.segments[1].source == "kb");
    CHECK(composed.segments[1].text == "{}");
    CHECK(composed.segments[2].kind == PromptSegment::Kind::OwnPrompt);
    CHECK(composed.segments[2].text == "Now answer.");
    CHECK(composed.rendered_text == "Manual text.\n\n{}\n\nNow answer.");
}

TEST_CASE("compose: empty database material contributes no segment") {
    Database db;
    db.set("feedback", "");
    auto composed = compose_default(make_node("n", "$db.feedback$\nQuestion?"), {}, db);
    CHECK(composed.rendered_text == "Question?");
}

TEST_CASE("compose: dependency outputs are labeled and ordered") {
    Database db;
    auto composed = compose_default(make_node("n", "Combine the inputs.", {"a", "b"}),
                                    {dep("a", "alpha out"), dep("b", "beta out")}, db);
    CHECK(composed.rendered_text ==
          "Output of subtask 'a':\nalpha out\n\n"
          "Output of subtask 'b':\nbeta out\n\n"
          "Combine the inputs.");

    // Swapping the dependency order swaps the segments: order is the caller's.
    auto swapped = compose_default(make_node("n", "Combine the inputs.", {"b", "a"}),
                                   {dep("b", "beta out"), dep("a", "alpha out")}, db);
    CHECK(swapped.rendered_text ==
          "Output of subtask 'b':\nbeta out\n\n"
          "Output of subtask 'a':\nalpha out\n\n"
          "Combine the inputs.");
}

TEST_CASE("compose: inline placeholders resolve inside the own prompt") {
    Database db;
    db.set("subgoals.current", "find water");
    auto composed =
        compose_default(make_node("n", "The subgoal is '$db.subgoals.current$'."), {}, db);
    CHECK(composed.rendered_text == "The subgoal is 'find water'.");
}

TEST_CASE("compose: strict mode rejects unknown keys, lenient mode records them") {
    Database db;
    CHECK_THROWS_AS(compose_default(make_node("n", "$db.missing.key$ tail"), {}, db),
                    UnresolvedTemplateKeyError);

    std::vector<std::string> warnings;
    auto composed = compose_default(make_node("n", "Inline $db.missing.key$ tail"), {}, db,
                                    TemplateMode::Lenient, &warnings);
    CHECK(composed.rendered_text == "Inline  tail");
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0] == "missing.key");
}

TEST_CASE("compose: database material precedes dependency outputs") {
    Database db;
    db.set("instruction_manual", "RTFM");
    auto composed = compose_default(make_node("n", "$db.instruction_manual$\nGo.", {"a"}),
                                    {dep("a", "A says hi")}, db);
    CHECK(composed.rendered_text == "RTFM\n\nOutput of subtask 'a':\nA says hi\n\nGo.");
}

// ---------------------------------------------------------------------------
// Structured-answer parsing

TEST_CASE("parse: fenced JSON map, with or without a language tag") {
    const std::string fenced = "Reasoning first.\n```json\n{\"a\": 1, \"b\": \"x\"}\n```\nDone.";
    Json parsed = parse_structured_block(fenced, BlockShape::Map);
    CHECK(parsed["a"] == 1);
    CHECK(parsed["b"] == "x");

    Json bare_fence = parse_structured_block("```\n{\"k\": true}\n```", BlockShape::Map);
    CHECK(bare_fence["k"] == true);
}

TEST_CASE("parse: bare balanced JSON region embedded in prose") {
    Json parsed = parse_structured_block(
        "The answer is {\"action\": \"do\", \"repeats\": 2} as requested.", BlockShape::Map);
    CHECK(parsed["action"] == "do");
    CHECK(parsed["repeats"] == 2);

    Json arr = parse_structured_block("Items: [\"a\", \"b\"] end", BlockShape::List);
    CHECK(arr.size() == 2);
}

TEST_CASE("parse: braces inside JSON strings do not break region scanning") {
    Json parsed = parse_structured_block(
        "{\"note\": \"braces } inside { strings\", \"n\": 1}", BlockShape::Map);
    CHECK(parsed["n"] == 1);
    CHECK(parsed["note"] == "braces } inside { strings");
}

TEST_CASE("parse: line-format map with bullet tolerance") {
    Json parsed = parse_structured_block("a: 1\n- b: two\nc: 3", BlockShape::Map);
    CHECK(parsed["a"] == "1");
    CHECK(parsed["b"] == "two");
    CHECK(parsed["c"] == "3");
}

TEST_CASE("parse: empty object answer is a valid map") {
    CHECK(parse_structured_block("{}", BlockShape::Map) == Json::object());
}

TEST_CASE("parse: line lists accept dashes and numbering") {
    Json dashes = parse_structured_block("- first\n- second", BlockShape::List);
    CHECK(dashes == Json::array({"first", "second"}));
    Json numbered = parse_structured_block("1. first\n2. second", BlockShape::List);
    CHECK(numbered == Json::array({"first", "second"}));
}

TEST_CASE("parse: yes/no takes the first yes-or-no word") {
    CHECK(parse_structured_block("Yes.", BlockShape::YesNo) == Json("yes"));
    CHECK(parse_structured_block("  NO, definitely not", BlockShape::YesNo) == Json("no"));
    CHECK(parse_structured_block("Well, yes I think", BlockShape::YesNo) == Json("yes"));
    CHECK_THROWS_AS(parse_structured_block("maybe", BlockShape::YesNo), NoBlockFoundError);
}

TEST_CASE("parse: labeled fields from lines or an object") {
    Json lines = parse_structured_block("mistake: no\nreplan: yes", BlockShape::LabeledFields);
    CHECK(lines["mistake"] == "no");
    CHECK(lines["replan"] == "yes");

    Json object = parse_structured_block("{\"mistake\": \"no\", \"count\": 3}",
                                         BlockShape::LabeledFields);
    CHECK(object["mistake"] == "no");
    CHECK(object["count"] == "3");  // non-strings are rendered to text
}

TEST_CASE("parse: wrong-shape candidate raises shape mismatch, prose raises no-block") {
    CHECK_THROWS_AS(parse_structured_block("```\n[1, 2]\n```", BlockShape::Map),
                    ShapeMismatchError);
    CHECK_THROWS_AS(parse_structured_block("no structure here at all", BlockShape::Map),
                    NoBlockFoundError);
}

// ---------------------------------------------------------------------------
// Hook registry

TEST_CASE("hook registry: builtins are present, unknown ids throw") {
    HookRegistry hooks = HookRegistry::with_builtins();
    for (const char* id : {"pass_through", "parse_map", "parse_yes_no", "gate_branch", "kb_add",
                           "unknown_merge", "action_emit"}) {
        CHECK(hooks.has(id));
    }
    CHECK_THROWS_AS(hooks.get("definitely_not_a_hook"), UnknownHookError);
}

// ---------------------------------------------------------------------------
// The evaluate-with-retries loop

TEST_CASE("evaluate: hookless node returns the raw answer, zero retries") {
    Database db;
    Graph graph = empty_graph();
    RecordingBackend backend({"free text answer"});
    NodeOutcome out = evaluate_node(make_node("n", "go"), {}, db, graph, backend,
                                    BackendProfile{}, HookRegistry::with_builtins(), {}, 1);
    CHECK(out.raw_answer == "free text answer");
    CHECK(out.parsed == Json("free text answer"));
    CHECK(out.retries_used == 0);
    CHECK(backend.attempts.size() == 1);
}

TEST_CASE("evaluate: malformed answer earns exactly one corrective user turn") {
    Database db;
    Graph graph = empty_graph();
    RecordingBackend backend({"not a map at all", "{\"k\": \"v\"}"});
    NodeOutcome out =
        evaluate_node(make_node("n", "emit a map", {}, "parse_map"), {}, db, graph, backend,
                      BackendProfile{}, HookRegistry::with_builtins(), {}, 1);
    CHECK(out.retries_used == 1);
    CHECK(out.parsed == Json{{"k", "v"}});

    REQUIRE(backend.attempts.size() == 2);
    // Attempt 2 extends attempt 1 by exactly one user message.
    REQUIRE(backend.attempts[1].size() == backend.attempts[0].size() + 1);
    for (std::size_t i = 0; i < backend.attempts[0].size(); ++i)
        CHECK(backend.attempts[1][i] == backend.attempts[0][i]);
    const Message& corrective = backend.attempts[1].back();
    CHECK(corrective.role == "user");
    CHECK(corrective.content.rfind("Your previous answer was invalid: ", 0) == 0);
    CHECK(corrective.content.find("Answer again following the required format.") !=
          std::string::npos);
}

TEST_CASE("evaluate: exhaustion stops at exactly max_retries attempts") {
    Database db;
    Graph graph = empty_graph();
    RecordingBackend backend({"junk", "more junk", "still junk", "never reached"});
    EvalLimits limits;
    limits.max_retries = 3;
    try {
        evaluate_node(make_node("n", "emit a map", {}, "parse_map"), {}, db, graph, backend,
                      BackendProfile{}, HookRegistry::with_builtins(), limits, 1);
        FAIL("expected AfterQueryExhaustedError");
    } catch (const AfterQueryExhaustedError& e) {
        CHECK(e.node() == "n");
        CHECK(!e.last_message().empty());
    }
    CHECK(backend.attempts.size() == 3);
}

TEST_CASE("evaluate: staged writes are dropped when the hook fails") {
    Database db;
    db.set("counter", 0);
    Graph graph = empty_graph();
    HookRegistry hooks;
    hooks.put("stage_then_fail", [](HookContext& ctx) -> HookResult {
        ctx.stage.set("counter", 99);
        throw AfterQueryRetry("try harder");
    });
    RecordingBackend backend({"whatever", "whatever", "whatever"});
    CHECK_THROWS_AS(
        evaluate_node(make_node("n", "p", {}, "stage_then_fail"), {}, db, graph, backend,
                      BackendProfile{}, hooks, {}, 1),
        AfterQueryExhaustedError);
    CHECK(*db.get("counter") == 0);  // no partial writes leaked
}

TEST_CASE("evaluate: staged writes land once the hook succeeds") {
    Database db;
    Graph graph = empty_graph();
    HookRegistry hooks;
    int calls = 0;
    hooks.put("fail_once", [&calls](HookContext& ctx) -> HookResult {
        ctx.stage.set("mark", "set");
        if (++calls == 1) throw AfterQueryRetry("again");
        return {Json("done"), {}};
    });
    RecordingBackend backend({"a", "b"});
    NodeOutcome out = evaluate_node(make_node("n", "p", {}, "fail_once"), {}, db, graph, backend,
                                    BackendProfile{}, hooks, {}, 1);
    CHECK(out.retries_used == 1);
    CHECK(*db.get("mark") == "set");
}

TEST_CASE("evaluate: non-retryable hook errors propagate immediately") {
    Database db;
    Graph graph = empty_graph();
    HookRegistry hooks;
    hooks.put("hard_fail", [](HookContext&) -> HookResult {
        throw GraphStateError("configuration hole");
    });
    RecordingBackend backend({"a", "b"});
    CHECK_THROWS_AS(evaluate_node(make_node("n", "p", {}, "hard_fail"), {}, db, graph, backend,
                                  BackendProfile{}, hooks, {}, 1),
                    GraphStateError);
    CHECK(backend.attempts.size() == 1);  // no retry for non-retryable failures
}

TEST_CASE("evaluate: unknown hook and unknown compose tag are rejected") {
    Database db;
    Graph graph = empty_graph();
    RecordingBackend backend({"x"});
    CHECK_THROWS_AS(evaluate_node(make_node("n", "p", {}, "no_such_hook"), {}, db, graph, backend,
                                  BackendProfile{}, HookRegistry::with_builtins(), {}, 1),
                    UnknownHookError);
    NodeDef odd = make_node("n", "p");
    odd.compose = "exotic";
    CHECK_THROWS_AS(evaluate_node(odd, {}, db, graph, backend, BackendProfile{},
                                  HookRegistry::with_builtins(), {}, 1),
                    UnknownHookError);
}

TEST_CASE("evaluate: usage accumulates across attempts") {
    Database db;
    Graph graph = empty_graph();
    RecordingBackend backend({"junk", "{\"k\": 1}"});
    NodeOutcome out =
        evaluate_node(make_node("n", "p", {}, "parse_map"), {}, db, graph, backend,
                      BackendProfile{}, HookRegistry::with_builtins(), {}, 1);
    CHECK(out.usage.prompt_tokens == 20);      // two attempts x 10
    CHECK(out.usage.completion_tokens == 10);  // two attempts x 5
}
