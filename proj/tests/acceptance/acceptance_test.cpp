// One test per acceptance criterion. The listener in acceptance_main.cpp
// turns each result into a single PASS or FAIL line.

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "jms/cluster/executor.hpp"
#include "jms/cluster/launcher.hpp"
#include "jms/deps/dependency_graph.hpp"
#include "jms/history/blob_store.hpp"
#include "jms/history/poller.hpp"
#include "jms/history/snapshot.hpp"
#include "jms/workflow/archive.hpp"
#include "support/api_rig.hpp"
#include "support/dependency_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/tree.hpp"

namespace {

using namespace std::chrono_literals;
using jms::testing::ApiRig;
using nlohmann::json;
using Names = std::set<std::string>;

json definition(const jms::workflow::Workflow& wf) {
  json j = wf;
  for (const auto* k : {"id", "owner", "created_ms", "modified_ms"}) j.erase(k);
  return j;
}

json stage_json(const std::string& name, const std::string& command, std::vector<std::pair<std::string, std::string>> deps = {},
                std::int64_t walltime = 60) {
  json d = json::array();
  for (const auto& [up, cond] : deps) d.push_back({{"stage", up}, {"condition", {{"type", cond}}}});
  return {{"name", name},
          {"command", command},
          {"resources", {{"cores", 1}, {"memory", 64 << 20}, {"walltime", walltime}, {"queue", ""}}},
          {"dependencies", d}};
}

Names names(const json& arr) { return arr.get<Names>(); }

const json& stage_of(const json& job, const std::string& name) {
  for (const auto& s : job.at("stages")) {
    if (s.at("stage") == name) return s;
  }
  throw std::runtime_error("no stage " + name);
}

std::string create_workflow(ApiRig& rig, const json& body, const std::string& token) {
  auto r = rig.call("POST", "/api/workflows", body, token);
  if (r.status != 201) throw std::runtime_error("workflow rejected: " + r.raw);
  return r.body.at("id").get<std::string>();
}

json run_job(ApiRig& rig, const std::string& wf_id, const json& inputs, const std::string& token) {
  auto r = rig.call("POST", "/api/jobs", {{"workflow_id", wf_id}, {"inputs", inputs}}, token);
  if (r.status != 201) throw std::runtime_error("submission rejected: " + r.raw);
  return rig.wait_terminal(r.body.at("id").get<std::string>(), token, 60s);
}

std::string file_of(ApiRig& rig, const json& job, const std::string& rel, const std::string& token) {
  return rig.call("GET", "/api/jobs/" + job.at("id").get<std::string>() + "/files/" + rel, nullptr, token).raw;
}


class Acceptance : public ::testing::Test {
 protected:
  void TearDown() override {
    for (const auto& v : rig.violations) ADD_FAILURE() << "schema: " << v;
  }
  ApiRig rig;
};

TEST_F(Acceptance, ConditionalFork) {
  const auto alice = rig.add_user("alice");
  const auto id = create_workflow(rig, definition(jms::testing::success_failure_fork()), alice);
  auto ok = run_job(rig, id, {{"a_exit", 0}}, alice);
  EXPECT_EQ(names(ok.at("executed")), (Names{"A", "B"}));
  EXPECT_EQ(names(ok.at("skipped")), (Names{"C"}));
  EXPECT_EQ(ok.at("verdict").at("state"), "Completed");
  for (int code : {1, 2, 7}) {
    auto bad = run_job(rig, id, {{"a_exit", code}}, alice);
    EXPECT_EQ(names(bad.at("executed")), (Names{"A", "C"})) << code;
    EXPECT_EQ(names(bad.at("skipped")), (Names{"B"})) << code;
  }
}

TEST_F(Acceptance, ExitCodeBranch) {
  const auto alice = rig.add_user("alice");
  const auto id = create_workflow(rig, definition(jms::testing::exit_code_branch()), alice);
  auto one = run_job(rig, id, {{"a_exit", 1}}, alice);
  EXPECT_EQ(names(one.at("executed")), (Names{"A", "B"}));
  EXPECT_EQ(names(one.at("skipped")), (Names{"C"}));
  EXPECT_EQ(one.at("verdict").at("state"), "Completed");
  auto two = run_job(rig, id, {{"a_exit", 2}}, alice);
  EXPECT_EQ(names(two.at("executed")), (Names{"A", "C"}));
  EXPECT_EQ(names(two.at("skipped")), (Names{"B"}));
  EXPECT_EQ(two.at("verdict").at("state"), "Completed");
  for (int code : {0, 3}) {
    auto other = run_job(rig, id, {{"a_exit", code}}, alice);
    EXPECT_EQ(other.at("verdict").at("state"), "Failed") << code;
    EXPECT_EQ(names(other.at("executed")), (Names{"A"})) << code;
    EXPECT_EQ(names(other.at("skipped")), (Names{"B", "C"})) << code;
  }
}

TEST_F(Acceptance, ParallelStagesAndExitGate) {
  const auto alice = rig.add_user("alice");
  const auto id = create_workflow(rig, definition(jms::testing::parallel_gate()), alice);
  auto job = run_job(rig, id, {{"pause", 0.5}, {"d_exit", 5}}, alice);
  ASSERT_EQ(job.at("verdict").at("state"), "Completed");
  auto t = [&](const std::string& s, const char* key) { return stage_of(job, s).at(key).get<double>(); };
  EXPECT_GT(t("B", "started_at"), t("A", "ended_at"));
  EXPECT_GT(t("C", "started_at"), t("A", "ended_at"));
  EXPECT_GT(t("D", "started_at"), std::max(t("B", "ended_at"), t("C", "ended_at")));
  EXPECT_LT(std::max(t("B", "started_at"), t("C", "started_at")), std::min(t("B", "ended_at"), t("C", "ended_at")))
      << "B and C did not overlap";
  EXPECT_TRUE(names(job.at("executed")).count("E"));

  for (int code : {0, 4}) {
    auto gated = run_job(rig, id, {{"d_exit", code}}, alice);
    EXPECT_FALSE(names(gated.at("executed")).count("E")) << code;
    EXPECT_TRUE(names(gated.at("skipped")).count("E")) << code;
  }
}

TEST(AcceptanceLibrary, DependencyOracle) {
  std::mt19937 rng(77);
  std::uniform_int_distribution<int> exit_dist(0, 3);
  int mismatches = 0;
  int assignments = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    auto wf = jms::testing::random_dag(rng, 5);
    std::map<std::string, int> exits;
    for (const auto& s : wf.stages) exits[s.name] = exit_dist(rng);
    const auto oracle = jms::testing::evaluate_oracle(wf, exits);

    auto g = jms::deps::DependencyGraph::build(wf);
    for (;;) {
      auto ready = g.stages_in(jms::deps::StageState::Kind::kReady);
      if (ready.empty()) break;
      std::vector<std::string> order(ready.begin(), ready.end());
      std::shuffle(order.begin(), order.end(), rng);
      g.on_stage_terminal(order.front(), jms::deps::StageOutcome::exited(exits.at(order.front())));
    }
    ++assignments;
    const bool failed = g.verdict().kind == jms::deps::Verdict::Kind::kFailed;
    if (!g.all_terminal() || g.ran() != oracle.ran || g.skipped() != oracle.skipped || failed != oracle.failed) {
      ++mismatches;
    }
  }
  EXPECT_GE(assignments, 1000);
  EXPECT_EQ(mismatches, 0);
}

TEST(AcceptanceLibrary, SchedulerSafetyFifoNoBackfill) {
  using namespace jms::cluster;
  constexpr std::int64_t kGiB = 1LL << 30;
  auto spec = [](int cores, std::int64_t mem, std::string queue = "") {
    JobSpec s;
    s.name = "job";
    s.owner = "alice";
    s.command = "true";
    s.resources.cores = cores;
    s.resources.memory_bytes = mem;
    s.resources.walltime_seconds = 3600;
    s.resources.queue = std::move(queue);
    return s;
  };
  for (unsigned seed = 1; seed <= 5; ++seed) {
    std::mt19937 rng(seed);
    jms::ManualClock clock;
    auto sim = std::make_shared<SimulatedLauncher>(clock, [](const LaunchRequest& r) {
      std::mt19937 local(std::hash<std::string>{}(r.job_id));
      return SimulatedLauncher::Behavior{std::chrono::milliseconds(1000 * (1 + local() % 5)), 0};
    });
    ExecutorOptions opts;
    opts.clock = &clock;
    opts.launcher = sim;
    Executor ex(opts);
    ex.add_node("n1", 4, 8 * kGiB);
    ex.add_node("n2", 8, 16 * kGiB);
    ex.add_node("n3", 2, 4 * kGiB);
    ClusterQueue other;
    other.name = "other";
    ex.create_queue(other);
    for (int i = 0; i < 100; ++i) {
      ex.submit(spec(1 + static_cast<int>(rng() % 4), static_cast<std::int64_t>(1 + rng() % 4) * kGiB,
                     rng() % 3 == 0 ? "other" : ""));
    }
    int steps = 0;
    for (; steps < 1000; ++steps) {
      ex.step();
      const auto jobs = ex.jobs();
      std::map<std::string, std::pair<int, std::int64_t>> load;
      for (const auto& j : jobs) {
        if (j.state == JobState::kRunning || j.state == JobState::kSuspended) {
          load[*j.node].first += j.resources.cores;
          load[*j.node].second += j.resources.memory_bytes;
        }
      }
      for (const auto& n : ex.nodes()) {
        ASSERT_LE(load[n.name].first, n.cores_total) << "capacity violated, seed " << seed;
        ASSERT_LE(load[n.name].second, n.memory_total) << "capacity violated, seed " << seed;
      }
      std::map<std::string, bool> waiting;
      for (const auto& j : jobs) {
        if (j.state == JobState::kQueued) {
          waiting[j.queue] = true;
        } else {
          ASSERT_FALSE(waiting[j.queue] && j.started) << j.id << " overtook an earlier queued job";
        }
      }
      if (std::all_of(jobs.begin(), jobs.end(), [](const ClusterJob& j) { return is_terminal(j.state); })) break;
      clock.advance(500ms);
    }
    ASSERT_LT(steps, 1000) << "workload did not drain";
    const auto jobs = ex.jobs();
    for (std::size_t a = 0; a < jobs.size(); ++a) {
      for (std::size_t b = a + 1; b < jobs.size(); ++b) {
        if (jobs[a].queue == jobs[b].queue && jobs[a].resources == jobs[b].resources) {
          EXPECT_LE(*jobs[a].started, *jobs[b].started) << jobs[a].id << " vs " << jobs[b].id;
        }
      }
    }
  }

  // The blocking case: a wide head job holds back a small one that would fit.
  jms::ManualClock clock;
  ExecutorOptions opts;
  opts.clock = &clock;
  opts.launcher = std::make_shared<SimulatedLauncher>(clock);
  Executor ex(opts);
  ex.add_node("n1", 4, 8 * kGiB);
  ex.submit(spec(1, 1 << 20));
  ex.submit(spec(1, 1 << 20));
  ASSERT_EQ(ex.step().size(), 2u);
  const auto head = ex.submit(spec(4, 1 << 20));
  const auto small = ex.submit(spec(1, 1 << 20));
  EXPECT_TRUE(ex.step().empty());
  EXPECT_EQ(ex.job(head).state, JobState::kQueued);
  EXPECT_EQ(ex.job(small).state, JobState::kQueued);
}

TEST_F(Acceptance, WalltimeKillDrivesFailureEdge) {
  const auto alice = rig.add_user("alice");
  json wf{{"name", "overrun"},
          {"stages", json::array({stage_json("slow", "sleep 60", {}, 1),
                                  stage_json("cleanup", "echo cleaned > cleanup.txt", {{"slow", "failure"}}),
                                  stage_json("next", "true", {{"slow", "success"}})})}};
  auto job = run_job(rig, create_workflow(rig, wf, alice), json::object(), alice);
  const auto& slow = stage_of(job, "slow");
  EXPECT_EQ(slow.at("state").at("state"), "Killed");
  EXPECT_EQ(slow.at("state").at("reason"), "WalltimeExceeded");
  EXPECT_EQ(slow.at("exit_code"), 271);
  EXPECT_EQ(names(job.at("executed")), (Names{"slow", "cleanup"}));
  EXPECT_EQ(file_of(rig, job, "cleanup.txt", alice), "cleaned\n");

  auto cluster = rig.call("GET", "/api/cluster/jobs", nullptr, rig.root()).body;
  const double tick = rig.app->services().executor().settings().tick_interval_seconds;
  bool found = false;
  for (const auto& cj : cluster) {
    if (cj.at("id") != slow.at("cluster_id")) continue;
    found = true;
    const double ran = (cj.at("ended_ms").get<double>() - cj.at("started_ms").get<double>()) / 1000.0;
    EXPECT_GT(ran, 1.0);
    EXPECT_LE(ran, 1.0 + 2 * tick + 0.01) << "killed after " << ran << " s";
  }
  EXPECT_TRUE(found);

  auto g = jms::deps::DependencyGraph::build(jms::testing::success_failure_fork());
  g.on_stage_terminal("A", jms::deps::StageOutcome::killed(jms::TerminationReason::kWalltimeExceeded));
  EXPECT_EQ(g.state("A").kind, jms::deps::StageState::Kind::kKilled);
  EXPECT_EQ(g.stages_in(jms::deps::StageState::Kind::kReady), (Names{"C"}));
}

TEST_F(Acceptance, SnapshotRestoreAndRepeatFromThirdStage) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    jms::testing::TempDir dir;
    jms::history::BlobStore blobs(dir.path() / "blobs");
    const auto src = dir.path() / "src";
    jms::testing::random_tree(rng, src);
    const auto before = jms::testing::tree_digest(src);
    const auto manifest = jms::history::take_snapshot(src, blobs);
    std::filesystem::remove_all(src);
    jms::history::restore_snapshot(manifest, src, blobs);
    ASSERT_EQ(jms::testing::tree_digest(src), before) << "tree " << trial;
  }

  const auto alice = rig.add_user("alice");
  json chain{{"name", "chain"},
             {"stages", json::array({stage_json("s1", "echo one > a.txt; echo x >> ran1"),
                                     stage_json("s2", "cat a.txt > b.txt; echo two >> b.txt; echo x >> ran2",
                                                {{"s1", "success"}}),
                                     stage_json("s3", "cat b.txt > result; echo x >> ran3", {{"s2", "success"}})})}};
  auto orig = run_job(rig, create_workflow(rig, chain, alice), json::object(), alice);
  ASSERT_EQ(orig.at("verdict").at("state"), "Completed");
  const auto cluster_before = rig.call("GET", "/api/cluster/jobs", nullptr, rig.root()).body.size();

  auto r = rig.call("POST", "/api/jobs/" + orig.at("id").get<std::string>() + "/repeat", {{"from_stage", "s3"}}, alice);
  ASSERT_EQ(r.status, 201);
  auto again = rig.wait_terminal(r.body.at("id").get<std::string>(), alice);
  ASSERT_EQ(again.at("verdict").at("state"), "Completed");
  EXPECT_EQ(rig.call("GET", "/api/cluster/jobs", nullptr, rig.root()).body.size(), cluster_before + 1)
      << "more than one stage re-executed";
  for (const auto* s : {"s1", "s2"}) {
    EXPECT_TRUE(stage_of(again, s).at("restored").get<bool>());
    EXPECT_TRUE(stage_of(again, s).at("cluster_id").is_null());
  }
  EXPECT_FALSE(stage_of(again, "s3").at("restored").get<bool>());
  EXPECT_EQ(file_of(rig, again, "result", alice), "one\ntwo\n");
  EXPECT_EQ(file_of(rig, again, "ran1", alice), "x\n");
  EXPECT_EQ(file_of(rig, again, "ran3", alice), "x\n");
}

TEST_F(Acceptance, ImportExportRoundTrip) {
  using namespace jms::workflow;
  auto source = [](std::map<std::string, std::string> m) {
    return [m = std::move(m)](const std::string& n) -> std::optional<std::string> {
      auto it = m.find(n);
      if (it == m.end()) return std::nullopt;
      return it->second;
    };
  };
  const auto gate = jms::testing::parallel_gate();
  EXPECT_TRUE(semantically_equal(import_workflow(export_workflow(gate, source({})), "bob", "x").workflow, gate));

  std::mt19937 rng(5150);
  for (int trial = 0; trial < 20; ++trial) {
    auto wf = jms::testing::random_dag(rng, 6);
    std::map<std::string, std::string> scripts;
    for (auto& s : wf.stages) {
      s.resources.cores = 1 + static_cast<int>(rng() % 8);
      s.resources.walltime_seconds = 1 + static_cast<std::int64_t>(rng() % 7200);
      if (rng() % 2) s.expected_outputs.push_back("out/" + s.name + ".txt");
      if (rng() % 2) {
        const auto name = jms::testing::lower(s.name) + ".sh";
        s.scripts.push_back(name);
        scripts[name] = "#!/bin/sh\necho " + std::to_string(rng()) + "\n";
      }
    }
    const auto first = export_workflow(wf, source(scripts));
    const auto second = export_workflow(wf, source(scripts));
    EXPECT_EQ(zip_read(first).at(0).data, zip_read(second).at(0).data) << "manifest bytes differ, trial " << trial;
    const auto imported = import_workflow(first, "carol", "id");
    EXPECT_TRUE(semantically_equal(imported.workflow, wf)) << "trial " << trial;
    EXPECT_EQ(imported.scripts, scripts);
  }

  const auto alice = rig.add_user("alice");
  const auto bob = rig.add_user("bob");
  const auto id = create_workflow(rig, definition(gate), alice);
  auto archive = rig.call("GET", "/api/workflows/" + id + "/export", nullptr, alice);
  ASSERT_EQ(archive.status, 200);
  EXPECT_EQ(rig.call("GET", "/api/workflows/" + id + "/export", nullptr, alice).raw, archive.raw);
  auto imported = rig.raw_call("POST", "/api/workflows/import", archive.raw, "application/zip", bob);
  ASSERT_EQ(imported.status, 201);
  EXPECT_TRUE(semantically_equal(imported.body.get<Workflow>(), gate));
}

// Operations and the level each needs; the requester gets the higher of a
// direct grant and a group grant.
TEST_F(Acceptance, PermissionMatrix) {
  const auto alice = rig.add_user("alice");
  const auto bob = rig.add_user("bob");
  rig.add_user("carol");
  ASSERT_EQ(rig.call("POST", "/api/groups", {{"name", "lab"}}, alice).status, 201);
  ASSERT_EQ(rig.call("POST", "/api/groups/lab/members", {{"username", "bob"}}, alice).status, 200);
  const std::vector<std::string> levels{"None", "View", "Run", "Edit"};
  json body{{"name", "guarded"}, {"stages", json::array({stage_json("only", "true")})}};

  for (int d = 0; d < 4; ++d) {
    for (int g = 0; g < 4; ++g) {
      SCOPED_TRACE("direct " + levels[d] + ", group " + levels[g]);
      const auto id = create_workflow(rig, body, alice);
      const auto base = "/api/workflows/" + id;
      ASSERT_EQ(rig.call("POST", base + "/share", {{"subject", "bob"}, {"level", levels[d]}}, alice).status, 200);
      ASSERT_EQ(rig.call("POST", base + "/share", {{"subject", "lab"}, {"group", true}, {"level", levels[g]}}, alice).status,
                200);
      const int eff = std::max(d, g);
      auto expect = [&](int need, int ok_status) { return eff == 0 ? 404 : eff >= need ? ok_status : 403; };

      EXPECT_EQ(rig.call("GET", base, nullptr, bob).status, expect(1, 200)) << "read";
      EXPECT_EQ(rig.call("POST", "/api/jobs", {{"workflow_id", id}}, bob).status, expect(2, 201)) << "run";
      EXPECT_EQ(rig.call("PUT", base, body, bob).status, expect(3, 200)) << "edit";
      EXPECT_EQ(rig.call("POST", base + "/share", {{"subject", "carol"}, {"level", "View"}}, bob).status, expect(3, 200))
          << "share";
      EXPECT_EQ(rig.call("DELETE", base, nullptr, bob).status, expect(3, 200)) << "delete";
      if (eff > 0) {
        const auto listed = rig.call("GET", base, nullptr, bob);
        if (eff == 3) {
          EXPECT_EQ(listed.status, 404) << "deleted workflow still readable";
        } else {
          EXPECT_EQ(listed.body.at("permission"), levels[eff]);
        }
      }
    }
  }

  // Jobs: no share means absent, a share means read-only.
  auto job = run_job(rig, create_workflow(rig, body, alice), json::object(), alice);
  const auto jid = job.at("id").get<std::string>();
  auto hidden = rig.call("GET", "/api/jobs/" + jid, nullptr, bob);
  auto absent = rig.call("GET", "/api/jobs/no-such-job", nullptr, bob);
  EXPECT_EQ(hidden.status, 404);
  EXPECT_EQ(hidden.body.at("error").at("code"), absent.body.at("error").at("code"));
  EXPECT_EQ(rig.call("POST", "/api/jobs/" + jid + "/cancel", nullptr, bob).status, 404);
  ASSERT_EQ(rig.call("POST", "/api/jobs/" + jid + "/share", {{"subject", "lab"}, {"group", true}}, alice).status, 200);
  EXPECT_EQ(rig.call("GET", "/api/jobs/" + jid, nullptr, bob).status, 200);
  EXPECT_EQ(rig.call("DELETE", "/api/jobs/" + jid, nullptr, bob).status, 403);
  EXPECT_EQ(rig.call("POST", "/api/jobs/" + jid + "/repeat", nullptr, bob).status, 403);
}

TEST(AcceptanceLibrary, PollerCadence) {
  EXPECT_EQ(jms::history::kDefaultPollInterval, 30s);
  EXPECT_EQ(jms::api::ServicesOptions{}.poll_interval, 30s);

  jms::testing::TempDir dir;
  jms::api::ServicesOptions o;
  o.data_dir = dir.path() / "data";
  o.settings.tick_interval_seconds = 0.1;
  o.bootstrap_local_node = false;
  o.poll_interval = 100ms;
  jms::api::Services svc(o);
  svc.executor().add_node("n1", 2, 1LL << 30);
  svc.start();
  jms::workflow::Workflow wf;
  wf.name = "one second";
  jms::workflow::Stage s;
  s.name = "sleeper";
  s.command_template = "sleep 1";
  s.resources.memory_bytes = 64 << 20;
  wf.stages = {s};
  jms::orchestrator::SubmitRequest req;
  req.workflow = wf;
  const auto id = svc.orchestrator().submit(req, "alice").id;
  const jms::Requester root{"root", true, {}};
  for (int i = 0; i < 500 && !svc.orchestrator().job(id, root).terminal(); ++i) std::this_thread::sleep_for(20ms);
  const auto job = svc.orchestrator().job(id, root);
  ASSERT_TRUE(job.terminal());
  EXPECT_GE(job.find("sleeper")->samples.size(), 5u);
}

TEST_F(Acceptance, AlterationFlow) {
  const auto alice = rig.add_user("alice");
  json body{{"name", "altered"},
            {"stages", json::array({stage_json("first", "sleep 1"), stage_json("second", "true", {{"first", "success"}})})}};
  const auto wf = create_workflow(rig, body, alice);
  auto submit = [&] {
    return rig.call("POST", "/api/jobs", {{"workflow_id", wf}}, alice).body.at("id").get<std::string>();
  };
  auto cluster_walltime = [&](const json& job, const std::string& stage) {
    const auto cid = stage_of(job, stage).at("cluster_id");
    for (const auto& cj : rig.call("GET", "/api/cluster/jobs", nullptr, rig.root()).body) {
      if (cj.at("id") == cid) return cj.at("resources").at("walltime").get<int>();
    }
    return -1;
  };

  const auto approved_job = submit();
  auto req = rig.call("POST", "/api/jobs/" + approved_job + "/alterations", {{"changes", {{"walltime", 120}}}}, alice);
  ASSERT_EQ(req.status, 201);
  EXPECT_EQ(req.body.at("state"), "Pending");
  const auto aid = req.body.at("id").get<std::string>();
  EXPECT_EQ(rig.call("POST", "/api/alterations/" + aid + "/decide", {{"approve", true}}, alice).status, 403);
  ASSERT_EQ(rig.call("POST", "/api/alterations/" + aid + "/decide", {{"approve", true}}, rig.root()).body.at("state"),
            "Approved");
  auto done = rig.wait_terminal(approved_job, alice);
  EXPECT_EQ(cluster_walltime(done, "second"), 120);
  EXPECT_EQ(cluster_walltime(done, "first"), 60);

  const auto denied_job = submit();
  auto other = rig.call("POST", "/api/jobs/" + denied_job + "/alterations", {{"changes", {{"walltime", 120}}}}, alice);
  ASSERT_EQ(other.body.at("state"), "Pending");
  ASSERT_EQ(rig.call("POST", "/api/alterations/" + other.body.at("id").get<std::string>() + "/decide",
                     {{"approve", false}}, rig.root())
                .body.at("state"),
            "Denied");
  auto untouched = rig.wait_terminal(denied_job, alice);
  EXPECT_EQ(cluster_walltime(untouched, "second"), 60);
}

TEST_F(Acceptance, DockingPipelineEndToEnd) {
  const auto alice = rig.add_user("alice");
  const auto root = std::filesystem::path(JMS_SOURCE_DIR) / "fixtures/docking";
  const auto id = create_workflow(rig, json::parse(jms::testing::slurp(root / "workflow.json")), alice);
  std::map<std::string, std::string> scripts;
  for (const auto& e : std::filesystem::directory_iterator(root / "scripts")) {
    scripts[e.path().filename().string()] = jms::testing::slurp(e.path());
    ASSERT_EQ(rig.raw_call("PUT", "/api/workflows/" + id + "/scripts/" + e.path().filename().string(),
                           scripts[e.path().filename().string()], "text/plain", alice)
                  .status,
              200);
  }

  auto job = run_job(rig, id, json::object(), alice);
  ASSERT_EQ(job.at("verdict").at("state"), "Completed");
  EXPECT_EQ(names(job.at("executed")), (Names{"prepare-receptor", "prepare-ligand", "grid", "dock"}));
  for (const auto& stage : job.at("workflow").at("stages")) {
    for (const auto& out : stage.at("expected_outputs")) {
      auto r = rig.call("GET", "/api/jobs/" + job.at("id").get<std::string>() + "/files/" + out.get<std::string>(),
                        nullptr, alice);
      EXPECT_EQ(r.status, 200) << out;
      EXPECT_FALSE(r.raw.empty()) << out;
    }
  }

  // Dropping the line that writes scores.txt leaves dock without an output.
  auto dock = scripts.at("dock.sh");
  const auto line = dock.find("echo \"best");
  ASSERT_NE(line, std::string::npos);
  dock.erase(line, dock.find('\n', line) + 1 - line);
  ASSERT_EQ(rig.raw_call("PUT", "/api/workflows/" + id + "/scripts/dock.sh", dock, "text/plain", alice).status, 200);
  auto broken = run_job(rig, id, json::object(), alice);
  const auto& state = stage_of(broken, "dock").at("state");
  EXPECT_EQ(state.at("state"), "Failed");
  EXPECT_EQ(state.value("note", ""), "missing output");
  EXPECT_EQ(stage_of(broken, "dock").at("missing_outputs"), json::array({"scores.txt"}));
  EXPECT_EQ(broken.at("verdict").at("state"), "Failed");
}

}  // namespace
