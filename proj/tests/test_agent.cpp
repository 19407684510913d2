#include <algorithm>
#include <random>

#include "doctest.h"
#include "promptdag/agent.hpp"

using namespace promptdag;

namespace {

Json full_gate_answer(const std::string& flips = "") {
    Json j = Json::object();
    for (const char* field : {"unexpected_encounters", "mistake", "correction_planned", "confused",
                              "top_subgoal_completed", "top_subgoal_changed", "replan"}) {
        j[field] = flips.find(field) != std::string::npos ? "yes" : "no";
    }
    return j;
}

Graph planner_graph() {
    GraphSpec spec;
    NodeDef obs;
    obs.id = "obs";
    obs.prompt = "look";
    NodeDef gate;
    gate.id = "gate";
    gate.prompt = "decide";
    gate.deps = {"obs"};
    NodeDef planner;
    planner.id = "planner";
    planner.prompt = "plan";
    planner.deps = {"gate"};
    NodeDef kb;
    kb.id = "kb";
    kb.prompt = "learn";
    kb.deps = {"planner"};
    spec.nodes = {obs, gate, planner, kb};
    return Graph::from_spec(spec);
}

Json record(std::initializer_list<std::pair<const char*, const char*>> fields) {
    Json j = Json::object();
    for (const auto& [k, v] : fields) j[k] = v;
    return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gate decisions

TEST_CASE("gate decision: parses yes/no fields, strings or booleans") {
    GateDecision d = parse_gate_decision(full_gate_answer("mistake"));
    CHECK(d.mistake);
    CHECK(!d.replan);
    CHECK(!d.skip());

    Json with_bools = full_gate_answer();
    with_bools["replan"] = true;
    CHECK(parse_gate_decision(with_bools).replan);

    Json spaced = full_gate_answer();
    spaced["confused"] = "  Yes ";
    CHECK(parse_gate_decision(spaced).confused);
}

TEST_CASE("gate decision: missing field or junk value violates the schema") {
    Json missing = full_gate_answer();
    missing.erase("confused");
    CHECK_THROWS_AS(parse_gate_decision(missing), SchemaViolationError);

    Json junk = full_gate_answer();
    junk["mistake"] = "perhaps";
    CHECK_THROWS_AS(parse_gate_decision(junk), SchemaViolationError);
}

TEST_CASE("gate decision: skip exactly when nothing calls for a plan update") {
    CHECK(parse_gate_decision(full_gate_answer()).skip());
    // correction_planned alone does not force planner work.
    CHECK(parse_gate_decision(full_gate_answer("correction_planned")).skip());
    for (const char* field : {"unexpected_encounters", "mistake", "confused",
                              "top_subgoal_completed", "top_subgoal_changed", "replan"}) {
        CAPTURE(field);
        CHECK(!parse_gate_decision(full_gate_answer(field)).skip());
    }
}

TEST_CASE("gate branch: skip removes planner and knowledge nodes for the pass") {
    Graph graph = planner_graph();
    GateDecision skip_all;  // defaults: everything no -> skip
    auto ops = gate_branch(skip_all, graph, {"planner"}, {"kb"});
    REQUIRE(ops.size() == 2);
    CHECK(ops[0].kind == DynamicOp::Kind::RemoveNode);
    CHECK(ops[0].to == "planner");
    CHECK(ops[1].to == "kb");

    GateDecision keep;
    keep.replan = true;
    CHECK(gate_branch(keep, graph, {"planner"}, {"kb"}).empty());
}

TEST_CASE("gate branch: configured node missing from the graph is a hard error") {
    Graph graph = planner_graph();
    GateDecision d;
    CHECK_THROWS_AS(gate_branch(d, graph, {"planner", "ghost"}, {"kb"}),
                    MisconfiguredNodeSetError);
    CHECK_THROWS_AS(gate_branch(d, graph, {"planner"}, {"phantom"}), MisconfiguredNodeSetError);
}

// ---------------------------------------------------------------------------
// Conditional branching

TEST_CASE("conditional branch: picks the node matching the answer") {
    NodeDef yes;
    yes.id = "went_yes";
    yes.prompt = "yes path";
    NodeDef no;
    no.id = "went_no";
    no.prompt = "no path";

    DynamicOp op = conditional_branch("Yes", yes, no, "decider");
    CHECK(op.kind == DynamicOp::Kind::AddNode);
    CHECK(op.node.id == "went_yes");
    CHECK(std::find(op.node.deps.begin(), op.node.deps.end(), "decider") != op.node.deps.end());

    DynamicOp op_no = conditional_branch(" no \n", yes, no, "decider");
    CHECK(op_no.node.id == "went_no");

    CHECK_THROWS_AS(conditional_branch("dunno", yes, no, "decider"), UnparseableAnswerError);
}

// ---------------------------------------------------------------------------
// Knowledge accretion

TEST_CASE("kb commit: item moves only when all five flags say yes") {
    KnowledgeState state;
    state.unknown["TableWoodConsumption"] = record({{"info", "wood per table"}});

    const char* flags[] = {"discovered", "general", "unknown", "concrete_and_precise", "solid"};
    for (const char* held_back : flags) {
        Json answer = Json::object();
        Json rec = Json::object();
        for (const char* f : flags) rec[f] = (f == std::string(held_back)) ? "no" : "yes";
        rec["discovery_short"] = "2 wood";
        answer["TableWoodConsumption"] = rec;
        KnowledgeState after = kb_commit(answer, state);
        CAPTURE(held_back);
        CHECK(after.kb == Json::object());
        CHECK(after.unknown.contains("TableWoodConsumption"));
    }

    Json commit = Json::object();
    Json rec = Json::object();
    for (const char* f : flags) rec[f] = "yes";
    rec["discovery_short"] = "2 wood";
    commit["TableWoodConsumption"] = rec;
    KnowledgeState after = kb_commit(commit, state);
    CHECK(after.kb["TableWoodConsumption"] == "2 wood");
    CHECK(!after.unknown.contains("TableWoodConsumption"));
}

TEST_CASE("kb commit: committing without a usable fact is a schema violation") {
    KnowledgeState state;
    Json answer = Json::object();
    Json rec = Json::object();
    for (const char* f : {"discovered", "general", "unknown", "concrete_and_precise", "solid"})
        rec[f] = "yes";
    rec["discovery_short"] = "";
    answer["item"] = rec;
    CHECK_THROWS_AS(kb_commit(answer, state), SchemaViolationError);

    answer["item"].erase("discovery_short");
    CHECK_THROWS_AS(kb_commit(answer, state), SchemaViolationError);
}

TEST_CASE("kb commit: existing knowledge is never overwritten") {
    KnowledgeState state;
    state.kb["fact"] = "original";
    Json answer = Json::object();
    Json rec = Json::object();
    for (const char* f : {"discovered", "general", "unknown", "concrete_and_precise", "solid"})
        rec[f] = "yes";
    rec["discovery_short"] = "usurper";
    answer["fact"] = rec;
    KnowledgeState after = kb_commit(answer, state);
    CHECK(after.kb["fact"] == "original");
}

TEST_CASE("unknown merge: filters non-novel, irrelevant, and already-known items") {
    KnowledgeState state;
    state.kb["known_fact"] = "settled";
    state.unknown["pending"] = record({{"info", "old record"}});

    Json answer = Json::object();
    answer["fresh"] = record({{"info", "brand new"}, {"novel", "yes"}, {"relevant", "yes"}});
    answer["stale"] = record({{"info", "x"}, {"novel", "no"}, {"relevant", "yes"}});
    answer["pointless"] = record({{"info", "x"}, {"novel", "yes"}, {"relevant", "no"}});
    answer["known_fact"] = record({{"info", "x"}, {"novel", "yes"}, {"relevant", "yes"}});
    answer["pending"] = record({{"info", "replacement"}, {"novel", "yes"}, {"relevant", "yes"}});

    KnowledgeState after = unknown_merge(answer, state);
    CHECK(after.unknown.contains("fresh"));
    CHECK(after.unknown["fresh"]["info"] == "brand new");
    // The novelty/relevance verdicts are transport, not knowledge: stripped on store.
    CHECK(!after.unknown["fresh"].contains("novel"));
    CHECK(!after.unknown["fresh"].contains("relevant"));
    CHECK(!after.unknown.contains("stale"));
    CHECK(!after.unknown.contains("pointless"));
    CHECK(!after.unknown.contains("known_fact"));
    CHECK(after.unknown["pending"]["info"] == "old record");  // existing entry kept
}

TEST_CASE("knowledge state: reads both maps from the database") {
    Database db;
    db.set("kb.fact", "text");
    db.set("unknown.item", record({{"info", "x"}}));
    KnowledgeState state = KnowledgeState::from_db(db);
    CHECK(state.kb["fact"] == "text");
    CHECK(state.unknown["item"]["info"] == "x");

    Database empty;
    KnowledgeState blank = KnowledgeState::from_db(empty);
    CHECK(blank.kb == Json::object());
    CHECK(blank.unknown == Json::object());
}

// ---------------------------------------------------------------------------
// Action emission

TEST_CASE("action emission: validates, clamps, and normalizes") {
    std::vector<std::string> actions{"do", "move_west", "noop"};

    ActionCommand cmd = emit_action(Json{{"action", "do"}, {"repeats", 3}}, actions);
    CHECK(cmd.action == "do");
    CHECK(cmd.repeats == 3);
    CHECK(!cmd.hazard);

    CHECK(emit_action(Json{{"action", "do"}, {"repeats", 500}}, actions).repeats == 9);
    CHECK(emit_action(Json{{"action", "do"}, {"repeats", 500}}, actions, 4).repeats == 4);
    CHECK(emit_action(Json{{"action", "do"}, {"repeats", "2"}}, actions).repeats == 2);
    CHECK(emit_action(Json{{"action", "do"}, {"repeats", 1}, {"hazard", "yes"}}, actions).hazard);

    CHECK_THROWS_AS(emit_action(Json{{"action", "fly"}, {"repeats", 1}}, actions),
                    UnknownActionError);
    CHECK_THROWS_AS(emit_action(Json{{"action", "do"}, {"repeats", 0}}, actions),
                    NonPositiveRepeatsError);
    CHECK_THROWS_AS(emit_action(Json{{"action", "do"}, {"repeats", -2}}, actions),
                    NonPositiveRepeatsError);
    CHECK_THROWS_AS(emit_action(Json{{"repeats", 1}}, actions), SchemaViolationError);
    CHECK_THROWS_AS(emit_action(Json{{"action", "do"}}, actions), SchemaViolationError);
    CHECK_THROWS_AS(
        emit_action(Json{{"action", "do"}, {"repeats", 1}, {"hazard", "sometimes"}}, actions),
        SchemaViolationError);
}

TEST_CASE("yes/no flag accepts booleans and yes/no strings only") {
    CHECK(parse_yes_no_flag(Json(true), "f"));
    CHECK(!parse_yes_no_flag(Json(false), "f"));
    CHECK(parse_yes_no_flag(Json("YES"), "f"));
    CHECK(!parse_yes_no_flag(Json(" no "), "f"));
    CHECK_THROWS_AS(parse_yes_no_flag(Json(1), "f"), SchemaViolationError);
    CHECK_THROWS_AS(parse_yes_no_flag(Json("nah"), "f"), SchemaViolationError);
}

// ---------------------------------------------------------------------------
// Skill feedback cadence

namespace {

void push(Database& db, std::int64_t step, const std::string& skill) {
    StepSummary s;
    s.step = step;
    s.s_obs = "obs " + std::to_string(step);
    s.s_plan = "plan " + std::to_string(step);
    s.s_action = Json("act " + std::to_string(step));
    s.skill = skill;
    db.push_step(s);
}

}  // namespace

TEST_CASE("feedback cadence: due on every third step of the same skill") {
    Database db;
    db.set("skills.library.dig", Json::array({"desc", "params", "guide"}));
    db.set("skills.library.build", Json::array({"desc", "params", "guide"}));

    // dig at steps 1,2,4,5; build at 3,6.
    for (auto [t, s] : std::vector<std::pair<int, const char*>>{
             {1, "dig"}, {2, "dig"}, {3, "build"}, {4, "dig"}, {5, "dig"}, {6, "build"}}) {
        push(db, t, s);
    }
    CHECK(!feedback_due(db, "dig", 1));
    CHECK(!feedback_due(db, "dig", 2));
    CHECK(!feedback_due(db, "dig", 3));  // still 2 dig steps
    CHECK(feedback_due(db, "dig", 4));   // third dig step
    CHECK(!feedback_due(db, "dig", 5));
    CHECK(!feedback_due(db, "build", 3));
    CHECK(!feedback_due(db, "build", 6));
    CHECK(!feedback_due(db, "never_seen", 6));  // zero is not a positive multiple
}

TEST_CASE("feedback cadence: 10k random interleavings match a brute-force counter") {
    std::mt19937 rng(20260825);
    const std::vector<std::string> skills{"a", "b", "c"};
    for (int trial = 0; trial < 100; ++trial) {
        Database db;
        for (const auto& s : skills)
            db.set("skills.library." + s, Json::array({"d", "p", "g"}));
        std::map<std::string, int> count;
        int checks = 0;
        for (int t = 1; t <= 100; ++t) {
            const std::string& s = skills[rng() % skills.size()];
            push(db, t, s);
            ++count[s];
            const std::string& probe = skills[rng() % skills.size()];
            bool expected = count[probe] > 0 && count[probe] % 3 == 0;
            if (feedback_due(db, probe, t) != expected) {
                CAPTURE(trial);
                CAPTURE(t);
                CAPTURE(probe);
                REQUIRE(feedback_due(db, probe, t) == expected);
            }
            ++checks;
        }
        CHECK(checks == 100);
    }
}

TEST_CASE("feedback context: renders one block per step of the skill") {
    Database db;
    db.set("skills.library.dig", Json::array({"d", "p", "g"}));
    StepSummary s1;
    s1.step = 1;
    s1.s_obs = "saw dirt";
    s1.s_plan = "dig down";
    s1.s_action = Json{{"action", "do"}, {"repeats", 2}};
    s1.skill = "dig";
    db.push_step(s1);
    StepSummary s2 = s1;
    s2.step = 3;
    s2.s_obs = "saw stone";
    db.push_step(s2);

    std::string context = build_feedback_context(db, "dig");
    CHECK(context.find("Step 1:") != std::string::npos);
    CHECK(context.find("Step 3:") != std::string::npos);
    CHECK(context.find("saw dirt") != std::string::npos);
    CHECK(context.find("dig down") != std::string::npos);
    CHECK(context.find("\"action\"") != std::string::npos);  // structured action rendered
    CHECK(context.find("Step 1:") < context.find("Step 3:"));

    CHECK_THROWS_AS(build_feedback_context(db, "unregistered"), UnknownSkillError);
}
