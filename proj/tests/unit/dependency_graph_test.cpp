#include "jms/deps/dependency_graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "jms/common/error.hpp"
#include "support/dependency_oracle.hpp"
#include "support/fixtures.hpp"

using namespace jms;
using namespace jms::deps;
using jms::testing::evaluate_oracle;
using Names = std::set<std::string>;

namespace {

// Runs every Ready stage with its assigned exit code, in a random order,
// until nothing is runnable.
DependencyGraph drive(const workflow::Workflow& wf, const std::map<std::string, int>& exits, std::mt19937& rng) {
  auto g = DependencyGraph::build(wf);
  for (;;) {
    auto ready = g.stages_in(StageState::Kind::kReady);
    if (ready.empty()) break;
    std::vector<std::string> order(ready.begin(), ready.end());
    std::shuffle(order.begin(), order.end(), rng);
    g.on_stage_terminal(order.front(), StageOutcome::exited(exits.at(order.front())));
  }
  return g;
}

}  // namespace

TEST(ConditionMatches, Table) {
  EXPECT_TRUE(condition_matches(DependencyCondition::success(), 0));
  EXPECT_FALSE(condition_matches(DependencyCondition::success(), 3));
  EXPECT_FALSE(condition_matches(DependencyCondition::failure(), 0));
  EXPECT_TRUE(condition_matches(DependencyCondition::failure(), 1));
  EXPECT_TRUE(condition_matches(DependencyCondition::exit_codes({1}), 1));
  EXPECT_FALSE(condition_matches(DependencyCondition::exit_codes({2}), 1));
  EXPECT_TRUE(condition_matches(DependencyCondition::always(), 0));
  EXPECT_TRUE(condition_matches(DependencyCondition::always(), 255));
}

TEST(ConditionMatches, KilledActsAsFailureWithExit271) {
  auto killed = StageOutcome::killed(TerminationReason::kWalltimeExceeded);
  EXPECT_EQ(killed.exit_code, 271);
  EXPECT_TRUE(edge_satisfied(DependencyCondition::failure(), killed));
  EXPECT_TRUE(edge_satisfied(DependencyCondition::always(), killed));
  EXPECT_FALSE(edge_satisfied(DependencyCondition::success(), killed));
  EXPECT_FALSE(edge_satisfied(DependencyCondition::exit_codes({15}), killed));
  EXPECT_FALSE(edge_satisfied(DependencyCondition::always(), StageOutcome::skipped()));
}

TEST(ConditionMatches, MissingOutputFailureDoesNotSatisfySuccess) {
  auto downgraded = StageOutcome::failed(0, "missing output");
  EXPECT_FALSE(edge_satisfied(DependencyCondition::success(), downgraded));
  EXPECT_TRUE(edge_satisfied(DependencyCondition::failure(), downgraded));
}

TEST(ExitCodes, CollapseModulo256) {
  EXPECT_EQ(StageOutcome::exited(256).exit_code, 0);
  EXPECT_EQ(StageOutcome::exited(261).exit_code, 5);
  EXPECT_EQ(StageOutcome::exited(-1).exit_code, 255);
}

TEST(BuildGraph, InitialReadySets) {
  EXPECT_EQ(DependencyGraph::build(jms::testing::parallel_gate()).stages_in(StageState::Kind::kReady), Names{"A"});

  workflow::Workflow independent;
  independent.stages = {jms::testing::stub_stage("X", {}), jms::testing::stub_stage("Y", {}),
                        jms::testing::stub_stage("Z", {})};
  EXPECT_EQ(DependencyGraph::build(independent).stages_in(StageState::Kind::kReady), (Names{"X", "Y", "Z"}));

  workflow::Workflow chain;
  chain.stages = {jms::testing::stub_stage("A", {}),
                  jms::testing::stub_stage("B", {{"A", DependencyCondition::success()}}),
                  jms::testing::stub_stage("C", {{"B", DependencyCondition::success()}})};
  auto g = DependencyGraph::build(chain);
  EXPECT_EQ(g.stages_in(StageState::Kind::kReady), Names{"A"});
  EXPECT_EQ(g.state("B").kind, StageState::Kind::kPending);
}

TEST(OnStageTerminal, ForkSuccessBranch) {
  auto g = DependencyGraph::build(jms::testing::success_failure_fork());
  auto t = g.on_stage_terminal("A", StageOutcome::exited(0));
  EXPECT_EQ(t.newly_ready, Names{"B"});
  EXPECT_EQ(t.newly_skipped, Names{"C"});
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kRunning);
  t = g.on_stage_terminal("B", StageOutcome::exited(0));
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kCompleted);
}

TEST(OnStageTerminal, ForkFailureBranch) {
  auto g = DependencyGraph::build(jms::testing::success_failure_fork());
  auto t = g.on_stage_terminal("A", StageOutcome::exited(3));
  EXPECT_EQ(t.newly_ready, Names{"C"});
  EXPECT_EQ(t.newly_skipped, Names{"B"});
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kRunning);
}

TEST(OnStageTerminal, ExitBranchUnmatchedExitFailsJob) {
  for (int code : {0, 3}) {
    auto g = DependencyGraph::build(jms::testing::exit_code_branch());
    auto t = g.on_stage_terminal("A", StageOutcome::exited(code));
    EXPECT_TRUE(t.newly_ready.empty());
    EXPECT_EQ(t.newly_skipped, (Names{"B", "C"}));
    EXPECT_EQ(t.verdict.kind, Verdict::Kind::kFailed) << "exit " << code;
    EXPECT_TRUE(g.all_terminal());
  }
}

TEST(OnStageTerminal, ExitBranchMatchedExits) {
  auto g = DependencyGraph::build(jms::testing::exit_code_branch());
  auto t = g.on_stage_terminal("A", StageOutcome::exited(1));
  EXPECT_EQ(t.newly_ready, Names{"B"});
  EXPECT_EQ(t.newly_skipped, Names{"C"});

  g = DependencyGraph::build(jms::testing::exit_code_branch());
  t = g.on_stage_terminal("A", StageOutcome::exited(2));
  EXPECT_EQ(t.newly_ready, Names{"C"});
  EXPECT_EQ(t.newly_skipped, Names{"B"});
}

TEST(OnStageTerminal, ParallelGateSequence) {
  auto g = DependencyGraph::build(jms::testing::parallel_gate());
  auto t = g.on_stage_terminal("A", StageOutcome::exited(0));
  EXPECT_EQ(t.newly_ready, (Names{"B", "C"}));
  t = g.on_stage_terminal("B", StageOutcome::exited(0));
  EXPECT_TRUE(t.newly_ready.empty());
  t = g.on_stage_terminal("C", StageOutcome::exited(0));
  EXPECT_EQ(t.newly_ready, Names{"D"});
  t = g.on_stage_terminal("D", StageOutcome::exited(5));
  EXPECT_EQ(t.newly_ready, Names{"E"});
  t = g.on_stage_terminal("E", StageOutcome::exited(0));
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kCompleted);
}

TEST(OnStageTerminal, Errors) {
  auto g = DependencyGraph::build(jms::testing::success_failure_fork());
  try {
    g.on_stage_terminal("nope", StageOutcome::exited(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownStage);
  }
  g.on_stage_terminal("A", StageOutcome::exited(0));
  try {
    g.on_stage_terminal("A", StageOutcome::exited(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlreadyTerminal);
  }
  try {
    g.on_stage_terminal("C", StageOutcome::exited(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlreadyTerminal);
  }
}

TEST(OnStageTerminal, SkipPropagatesThroughAlways) {
  workflow::Workflow wf;
  wf.stages = {jms::testing::stub_stage("A", {}),
               jms::testing::stub_stage("B", {{"A", DependencyCondition::success()}}),
               jms::testing::stub_stage("C", {{"B", DependencyCondition::always()}})};
  auto g = DependencyGraph::build(wf);
  auto t = g.on_stage_terminal("A", StageOutcome::exited(1));
  EXPECT_EQ(t.newly_skipped, (Names{"B", "C"}));
  // A had an outgoing edge it did not satisfy: that is the unmatched-exit rule.
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kFailed);
}

TEST(OnStageTerminal, KilledDrivesFailureEdge) {
  auto g = DependencyGraph::build(jms::testing::success_failure_fork());
  auto t = g.on_stage_terminal("A", StageOutcome::killed(TerminationReason::kWalltimeExceeded));
  EXPECT_EQ(t.newly_ready, Names{"C"});
  EXPECT_EQ(t.newly_skipped, Names{"B"});
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kRunning);
}

TEST(OnStageTerminal, LeafFailureFailsJob) {
  workflow::Workflow wf;
  wf.stages = {jms::testing::stub_stage("A", {})};
  auto g = DependencyGraph::build(wf);
  EXPECT_EQ(g.on_stage_terminal("A", StageOutcome::exited(2)).verdict.kind, Verdict::Kind::kFailed);

  g = DependencyGraph::build(wf);
  EXPECT_EQ(g.on_stage_terminal("A", StageOutcome::killed(TerminationReason::kCanceled)).verdict.kind,
            Verdict::Kind::kFailed);
}

TEST(OnStageTerminal, ContradictoryEdgesAreUnsatisfiable) {
  workflow::Workflow wf;
  wf.stages = {jms::testing::stub_stage("A", {}),
               jms::testing::stub_stage("B", {{"A", DependencyCondition::success()}, {"A", DependencyCondition::failure()}})};
  auto g = DependencyGraph::build(wf);
  auto t = g.on_stage_terminal("A", StageOutcome::exited(0));
  EXPECT_EQ(t.newly_skipped, Names{"B"});
  // One of A's edges matched, so the unmatched-exit rule does not fire.
  EXPECT_EQ(t.verdict.kind, Verdict::Kind::kCompleted);
}

TEST(JobVerdict, Basics) {
  DependencyGraph empty({}, {});
  EXPECT_EQ(job_verdict(empty).kind, Verdict::Kind::kCompleted);

  auto g = DependencyGraph::build(jms::testing::parallel_gate());
  g.set_progress("A", StageState::Kind::kSubmitted);
  g.set_progress("A", StageState::Kind::kRunning);
  EXPECT_EQ(job_verdict(g).kind, Verdict::Kind::kRunning);
  EXPECT_EQ(job_verdict(g), job_verdict(g));
}

TEST(SetProgress, RejectsPendingAndTerminal) {
  auto g = DependencyGraph::build(jms::testing::success_failure_fork());
  EXPECT_THROW(g.set_progress("B", StageState::Kind::kRunning), Error);
  g.on_stage_terminal("A", StageOutcome::exited(0));
  EXPECT_THROW(g.set_progress("A", StageState::Kind::kRunning), Error);
  EXPECT_THROW(g.set_progress("B", StageState::Kind::kSucceeded), Error);
}

TEST(Abort, SkipsPendingKillsReady) {
  auto g = DependencyGraph::build(jms::testing::parallel_gate());
  g.on_stage_terminal("A", StageOutcome::exited(0));
  g.set_progress("B", StageState::Kind::kRunning);
  auto t = g.abort("canceled");
  EXPECT_EQ(t.newly_killed, Names{"C"});
  EXPECT_EQ(t.newly_skipped, (Names{"D", "E"}));
  EXPECT_EQ(t.verdict, (Verdict{Verdict::Kind::kFailed, "canceled"}));
  // The in-flight stage finishes later without making anything ready.
  t = g.on_stage_terminal("B", StageOutcome::killed(TerminationReason::kCanceled));
  EXPECT_TRUE(t.newly_ready.empty());
  EXPECT_TRUE(g.all_terminal());
  EXPECT_EQ(g.verdict().reason, "canceled");
}

TEST(Persistence, JsonRoundTripPreservesBehaviour) {
  auto g = DependencyGraph::build(jms::testing::parallel_gate());
  g.on_stage_terminal("A", StageOutcome::exited(0));
  g.on_stage_terminal("B", StageOutcome::exited(0));
  auto copy = DependencyGraph::from_json(g.to_json());
  EXPECT_EQ(copy.to_json(), g.to_json());
  auto t1 = g.on_stage_terminal("C", StageOutcome::exited(0));
  auto t2 = copy.on_stage_terminal("C", StageOutcome::exited(0));
  EXPECT_EQ(t1.newly_ready, t2.newly_ready);
}

TEST(Persistence, JsonRoundTripKeepsFailureAndAbort) {
  auto g = DependencyGraph::build(jms::testing::exit_code_branch());
  g.on_stage_terminal("A", StageOutcome::exited(0));
  ASSERT_EQ(g.verdict().kind, Verdict::Kind::kFailed);
  auto copy = DependencyGraph::from_json(g.to_json());
  EXPECT_EQ(copy.verdict(), g.verdict());

  auto h = DependencyGraph::build(jms::testing::parallel_gate());
  h.abort("canceled");
  auto copy2 = DependencyGraph::from_json(h.to_json());
  EXPECT_TRUE(copy2.aborted());
  EXPECT_EQ(copy2.verdict(), h.verdict());
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

TEST(DependencyProperties, OracleEquivalenceOnRandomDags) {
  std::mt19937 rng(20240611);
  std::uniform_int_distribution<int> exit_dist(0, 3);
  int mismatches = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    auto wf = jms::testing::random_dag(rng);
    std::map<std::string, int> exits;
    for (const auto& s : wf.stages) exits[s.name] = exit_dist(rng);
    auto oracle = evaluate_oracle(wf, exits);
    auto g = drive(wf, exits, rng);

    ASSERT_TRUE(g.all_terminal());
    const bool failed = g.verdict().kind == Verdict::Kind::kFailed;
    if (g.ran() != oracle.ran || g.skipped() != oracle.skipped || failed != oracle.failed) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(DependencyProperties, DeterministicReplay) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    auto wf = jms::testing::random_dag(rng);
    std::map<std::string, int> exits;
    for (const auto& s : wf.stages) exits[s.name] = std::uniform_int_distribution<int>(0, 3)(rng);

    auto run = [&] {
      auto g = DependencyGraph::build(wf);
      std::vector<std::pair<Names, Names>> trace;
      for (;;) {
        auto ready = g.stages_in(StageState::Kind::kReady);
        if (ready.empty()) break;
        auto t = g.on_stage_terminal(*ready.begin(), StageOutcome::exited(exits.at(*ready.begin())));
        trace.emplace_back(t.newly_ready, t.newly_skipped);
      }
      return trace;
    };
    EXPECT_EQ(run(), run());
  }
}

TEST(DependencyProperties, ConfluenceAndMonotonicity) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    auto wf = jms::testing::random_dag(rng);
    std::map<std::string, int> exits;
    for (const auto& s : wf.stages) exits[s.name] = std::uniform_int_distribution<int>(0, 3)(rng);

    std::optional<nlohmann::json> reference;
    for (int perm = 0; perm < 5; ++perm) {
      auto g = DependencyGraph::build(wf);
      Names seen_ready, seen_skipped;
      std::size_t terminal = 0;
      for (;;) {
        auto ready = g.stages_in(StageState::Kind::kReady);
        if (ready.empty()) break;
        std::vector<std::string> order(ready.begin(), ready.end());
        std::shuffle(order.begin(), order.end(), rng);
        auto t = g.on_stage_terminal(order.front(), StageOutcome::exited(exits.at(order.front())));
        for (const auto& s : t.newly_ready) {
          EXPECT_FALSE(seen_skipped.count(s));
          seen_ready.insert(s);
        }
        for (const auto& s : t.newly_skipped) {
          EXPECT_FALSE(seen_ready.count(s));
          seen_skipped.insert(s);
        }
        std::size_t now = 0;
        for (const auto& s : g.stages()) now += g.state(s).terminal() ? 1 : 0;
        EXPECT_GE(now, terminal);
        terminal = now;
      }
      nlohmann::json states;
      for (const auto& s : g.stages()) states[s] = g.state(s);
      states["__verdict"] = std::string(to_string(g.verdict().kind));
      if (!reference) {
        reference = states;
      } else {
        EXPECT_EQ(states, *reference);
      }
    }
  }
}
