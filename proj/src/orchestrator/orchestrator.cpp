#include "jms/orchestrator/orchestrator.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <iostream>

#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"
#include "jms/history/snapshot.hpp"

namespace jms::orchestrator {

namespace {

using deps::StageOutcome;
using deps::StageState;
using K = deps::StageState::Kind;

const std::string kJobPrefix = "job/";
const std::string kAlterationPrefix = "alteration/";

// Replays a recorded outcome into a fresh graph.
StageOutcome outcome_of(const StageState& s) {
  if (s.kind == K::kSucceeded) return StageOutcome::exited(*s.exit_code);
  return StageOutcome::failed(*s.exit_code, s.note);
}

std::vector<std::string> missing_outputs(const workflow::Stage& stage, const std::filesystem::path& dir) {
  std::vector<std::string> missing;
  for (const auto& out : stage.expected_outputs) {
    bool present = false;
    try {
      present = std::filesystem::is_regular_file(fs::confined_join(dir, out));
    } catch (const Error&) {
    }
    if (!present) missing.push_back(out);
  }
  return missing;
}

void write_script(const std::filesystem::path& path, std::string_view body) {
  fs::write_file_atomic(path, body);
  std::filesystem::permissions(path, std::filesystem::perms(0755));
}

}  // namespace

void validate_changes(const nlohmann::json& changes) {
  if (!changes.is_object() || changes.empty()) throw Error(ErrorCode::kInvalidChange, "changes must be a non-empty object");
  for (const auto& [field, value] : changes.items()) {
    if (field == "walltime" || field == "memory" || field == "cores") {
      if (!value.is_number_integer() || value.get<std::int64_t>() <= 0 ||
          (field == "cores" && value.get<std::int64_t>() > 1 << 20)) {
        throw Error(ErrorCode::kInvalidChange, "'" + field + "' must be a positive integer", {{"field", field}});
      }
    } else if (field == "queue") {
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw Error(ErrorCode::kInvalidChange, "'queue' must be a queue name", {{"field", field}});
      }
    } else {
      throw Error(ErrorCode::kInvalidChange, "'" + field + "' cannot be altered", {{"field", field}});
    }
  }
}

Orchestrator::Orchestrator(std::filesystem::path data_dir, cluster::Executor& executor,
                           cluster::ResourceManagerAdapter& adapter, history::BlobStore& blobs,
                           history::AccountingLog& accounting, history::HistoryCache& cache, const Clock& clock)
    : data_dir_(std::move(data_dir)),
      executor_(executor),
      adapter_(adapter),
      blobs_(blobs),
      accounting_(accounting),
      cache_(cache),
      clock_(clock) {
  std::filesystem::create_directories(data_dir_ / "users");
  {
    std::lock_guard lock(mu_);
    for (const auto& key : cache_.store().keys(kJobPrefix)) {
      auto v = cache_.get(key);
      if (!v) continue;
      auto job = v->value.get<Job>();
      for (const auto& run : job.stages) {
        if (run.cluster_id) by_cluster_id_[*run.cluster_id] = {job.id, run.stage};
      }
      jobs_[job.id] = std::move(job);
    }
    for (const auto& key : cache_.store().keys(kAlterationPrefix)) {
      auto v = cache_.get(key);
      if (!v) continue;
      auto a = v->value.get<AlterationRequest>();
      alterations_[a.id] = std::move(a);
    }
  }
  executor_.add_hooks([this](const cluster::ClusterJob& cj) { on_prologue(cj); },
                      [this](const cluster::ClusterJob& cj) { on_epilogue(cj); });
  std::lock_guard lock(mu_);
  recover_locked();
}

std::filesystem::path Orchestrator::working_dir_of(const std::string& owner, const std::string& job_id) const {
  return data_dir_ / "users" / owner / "jobs" / job_id;
}

// ---------------------------------------------------------------------------
// Submission
// ---------------------------------------------------------------------------

Job Orchestrator::materialize_locked(const SubmitRequest& req, const std::string& owner) {
  if (!fs::is_plain_name(owner)) throw Error(ErrorCode::kBadRequest, "invalid owner name");
  const auto& wf = req.workflow;
  auto report = workflow::validate_workflow(wf);
  if (!report.empty()) throw Error(ErrorCode::kValidation, "workflow is invalid", nlohmann::json(report));
  for (const auto& name : wf.script_names()) {
    if (!req.scripts.count(name)) {
      throw Error(ErrorCode::kMissingScript, "script '" + name + "' has not been uploaded", {{"name", name}});
    }
  }

  Job job;
  do {
    job.id = crypto::random_hex(8);
  } while (jobs_.count(job.id));
  job.owner = owner;
  job.workflow = wf;
  job.inputs = req.inputs;
  // Every command renders before anything touches the disk.
  for (const auto& stage : wf.stages) {
    StageRun run;
    run.stage = stage.name;
    run.resources = stage.resources;
    run.command = workflow::render_command(stage, workflow::stage_values(stage, req.inputs));
    job.stages.push_back(std::move(run));
  }
  std::map<std::string, std::string> files;
  for (const auto& [name, param] : wf.parameters()) {
    if (param.kind != workflow::ParameterKind::kInputFile) continue;
    auto it = req.inputs.find(name);
    if (it == req.inputs.end() || it->second.empty()) continue;
    const auto& file = it->second;
    if (!fs::is_plain_name(file) || req.scripts.count(file)) {
      throw Error(ErrorCode::kInvalidParameterValue, "input file name '" + file + "' is not usable", {{"name", name}});
    }
    auto f = req.files.find(file);
    if (f == req.files.end()) {
      throw Error(ErrorCode::kInvalidParameterValue, "input file '" + file + "' was not uploaded", {{"name", name}});
    }
    files[file] = f->second;
  }

  const auto dir = working_dir_of(owner, job.id);
  std::filesystem::create_directories(dir);
  for (const auto& name : wf.script_names()) {
    const auto& body = req.scripts.at(name);
    write_script(dir / name, body);
    job.scripts[name] = blobs_.put(body);
  }
  for (const auto& [name, bytes] : files) {
    fs::write_file_atomic(dir / name, bytes);
    job.input_files[name] = blobs_.put(bytes);
  }
  job.working_dir = dir.string();
  job.graph = deps::DependencyGraph::build(wf);
  job.verdict = deps::job_verdict(job.graph);
  job.submitted_at = clock_.now();
  return job;
}

Job Orchestrator::submit(const SubmitRequest& req, const std::string& owner) {
  std::lock_guard lock(mu_);
  Job job = materialize_locked(req, owner);
  const auto id = job.id;
  deps::TransitionSet t;
  t.newly_ready = job.graph.stages_in(K::kReady);
  jobs_[id] = std::move(job);
  start_locked(jobs_.at(id), std::move(t));
  return jobs_.at(id);
}

std::vector<std::string> Orchestrator::batch_submit(const SubmitRequest& base, const workflow::InputProfile* profile,
                                                    const std::vector<workflow::BatchRow>& rows,
                                                    const std::string& owner) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    try {
      SubmitRequest req = base;
      req.inputs = workflow::resolve_inputs(base.workflow, profile, row.values);
      ids.push_back(submit(req, owner).id);
    } catch (const Error& e) {
      throw Error(ErrorCode::kRowError, "line " + std::to_string(row.line) + ": " + e.what(),
                  {{"line", row.line},
                   {"row", i + 1},
                   {"cause", to_string(e.code())},
                   {"message", e.what()},
                   {"details", e.details()},
                   {"submitted", ids}});
    }
  }
  return ids;
}

Job Orchestrator::repeat(const std::string& job_id, const std::optional<std::string>& from_stage, const Requester& who) {
  std::lock_guard lock(mu_);
  const Job& orig = access_locked(job_id, who, Permission::kRun);
  if (!orig.terminal()) throw Error(ErrorCode::kJobRunning, "job '" + job_id + "' has not finished");

  std::set<std::string> upstream;
  if (from_stage) {
    if (!orig.workflow.find_stage(*from_stage)) {
      throw Error(ErrorCode::kUnknownStage, "no stage '" + *from_stage + "'", {{"stage", *from_stage}});
    }
    std::vector<std::string> todo{*from_stage};
    while (!todo.empty()) {
      const auto* s = orig.workflow.find_stage(todo.back());
      todo.pop_back();
      for (const auto& d : s->dependencies) {
        if (upstream.insert(d.upstream).second) todo.push_back(d.upstream);
      }
    }
    for (const auto& u : upstream) {
      const auto& st = orig.graph.state(u);
      const bool completed = (st.kind == K::kSucceeded || st.kind == K::kFailed) && st.exit_code.has_value();
      const auto* run = orig.find(u);
      if (!completed || !run->snapshot) {
        throw Error(ErrorCode::kUpstreamIncomplete, "upstream stage '" + u + "' did not run to completion",
                    {{"stage", u}, {"state", deps::to_string(st.kind)}});
      }
    }
  }

  SubmitRequest req;
  req.workflow = orig.workflow;
  req.inputs = orig.inputs;
  for (const auto& [name, hash] : orig.scripts) req.scripts[name] = blobs_.get(hash);
  for (const auto& [name, hash] : orig.input_files) req.files[name] = blobs_.get(hash);
  Job job = materialize_locked(req, orig.owner);
  job.repeat_of = orig.id;
  job.from_stage = from_stage;

  if (from_stage) {
    // Restore the frontier (upstream stages with no upstream dependents) in
    // the order the original took its snapshots.
    std::vector<const StageRun*> frontier;
    for (const auto& u : upstream) {
      bool feeds_upstream = false;
      for (const auto& e : orig.graph.edges()) {
        if (e.upstream == u && upstream.count(e.downstream)) feeds_upstream = true;
      }
      if (!feeds_upstream) frontier.push_back(orig.find(u));
    }
    std::sort(frontier.begin(), frontier.end(),
              [](const StageRun* a, const StageRun* b) { return *a->snapshot_at < *b->snapshot_at; });
    for (const auto* run : frontier) {
      auto manifest = nlohmann::json::parse(blobs_.get(*run->snapshot)).get<history::SnapshotManifest>();
      history::restore_snapshot(manifest, job.working_dir, blobs_);
    }
    const auto order = workflow::topological_order(job.workflow);
    for (const auto& name : *order) {
      if (!upstream.count(name)) continue;
      const StageRun& old = *orig.find(name);
      job.graph.on_stage_terminal(name, outcome_of(old.state));
      StageRun& run = *job.find(name);
      run.restored = true;
      run.snapshot = old.snapshot;
      run.snapshot_at = old.snapshot_at;
      run.resources_used = old.resources_used;
      run.missing_outputs = old.missing_outputs;
    }
  }

  const auto id = job.id;
  deps::TransitionSet t;
  t.newly_ready = job.graph.stages_in(K::kReady);
  jobs_[id] = std::move(job);
  start_locked(jobs_.at(id), std::move(t));
  return jobs_.at(id);
}

void Orchestrator::start_locked(Job& job, deps::TransitionSet t) {
  apply_locked(job, t);
  persist_locked(job);
}

// ---------------------------------------------------------------------------
// Stage lifecycle
// ---------------------------------------------------------------------------

void Orchestrator::sync_locked(Job& job) {
  for (auto& run : job.stages) run.state = job.graph.state(run.stage);
  job.verdict = deps::job_verdict(job.graph);
  if (job.terminal() && !job.ended_at) job.ended_at = clock_.now();
}

void Orchestrator::apply_locked(Job& job, const deps::TransitionSet& t) {
  sync_locked(job);
  if (job.graph.aborted()) return;
  if (job.verdict.kind == deps::Verdict::Kind::kFailed) {
    abort_locked(job, job.verdict.reason);
    return;
  }
  for (auto& run : job.stages) {
    if (t.newly_ready.count(run.stage) && job.graph.state(run.stage).kind == K::kReady && !job.graph.aborted()) {
      submit_stage_locked(job, run);
    }
  }
  sync_locked(job);
}

void Orchestrator::submit_stage_locked(Job& job, StageRun& run) {
  cluster::JobSpec spec;
  spec.name = run.stage;
  spec.owner = job.owner;
  spec.resources = run.resources;
  spec.command = run.command;
  spec.working_dir = job.working_dir;
  spec.env = {{"JMS_JOB_ID", job.id}, {"JMS_STAGE", run.stage}};
  std::string cluster_id;
  try {
    cluster_id = adapter_.submit(spec, job.held);
  } catch (const Error& e) {
    finish_stage_locked(job, run, StageOutcome::failed(127, std::string("submission rejected: ") + e.what()));
    return;
  }
  run.cluster_id = cluster_id;
  run.submitted_at = clock_.now();
  by_cluster_id_[cluster_id] = {job.id, run.stage};
  job.graph.set_progress(run.stage, job.held ? K::kHeld : K::kSubmitted);
  run.state = job.graph.state(run.stage);
}

void Orchestrator::snapshot_locked(Job& job, StageRun& run) {
  auto manifest = history::take_snapshot(job.working_dir, blobs_);
  run.snapshot = blobs_.put(nlohmann::json(manifest).dump());
  run.snapshot_at = clock_.now();
}

void Orchestrator::finish_stage_locked(Job& job, StageRun& run, const StageOutcome& outcome) {
  if (!run.ended_at) run.ended_at = clock_.now();
  // The snapshot lands before any dependent can be submitted.
  snapshot_locked(job, run);
  auto t = job.graph.on_stage_terminal(run.stage, outcome);
  apply_locked(job, t);
}

void Orchestrator::abort_locked(Job& job, const std::string& reason) {
  auto t = job.graph.abort(reason);
  sync_locked(job);
  for (const auto& name : t.newly_killed) {
    StageRun& run = *job.find(name);
    run.ended_at = clock_.now();
    try {
      snapshot_locked(job, run);
    } catch (const std::exception& e) {
      std::cerr << "orchestrator: snapshot of " << job.id << "/" << name << " failed: " << e.what() << "\n";
    }
  }
  for (const auto& run : job.stages) {
    if (!run.cluster_id || run.state.terminal()) continue;
    try {
      adapter_.cancel(*run.cluster_id);
    } catch (const Error&) {
      // Already final; its epilogue is on the way.
    }
  }
  sync_locked(job);
}

void Orchestrator::epilogue_locked(Job& job, StageRun& run, const cluster::ClusterJob& cj) {
  run.resources_used = cj.resources_used;
  if (cj.node) run.node = *cj.node;
  if (cj.started && !run.started_at) run.started_at = cj.started;
  run.ended_at = cj.ended.value_or(clock_.now());
  StageOutcome outcome;
  if (cj.state == cluster::JobState::kKilled) {
    outcome = StageOutcome::killed(cj.reason.value_or(TerminationReason::kCanceled));
  } else {
    const int code = cj.exit_code.value_or(1);
    run.missing_outputs = missing_outputs(*job.workflow.find_stage(run.stage), job.working_dir);
    if (code == 0 && !run.missing_outputs.empty()) {
      outcome = StageOutcome::failed(0, "missing output");
    } else if (code != 0 && !cj.comment.empty()) {
      outcome = StageOutcome::failed(code, cj.comment);
    } else {
      outcome = StageOutcome::exited(code);
    }
  }
  finish_stage_locked(job, run, outcome);
}

void Orchestrator::on_prologue(const cluster::ClusterJob& cj) {
  history::AccountingRecord start;
  start.job_id = cj.id;
  start.event = history::AccountingRecord::Event::kStart;
  start.timestamp = cj.started.value_or(clock_.now());
  start.node = cj.node.value_or("");
  try {
    accounting_.record(start);
  } catch (const Error& e) {
    std::cerr << "orchestrator: " << e.what() << "\n";
  }

  std::lock_guard lock(mu_);
  auto loc = by_cluster_id_.find(cj.id);
  if (loc == by_cluster_id_.end()) return;
  auto jt = jobs_.find(loc->second.job_id);
  if (jt == jobs_.end()) return;
  Job& job = jt->second;
  StageRun* run = job.find(loc->second.stage);
  if (!run || run->cluster_id != cj.id || run->state.terminal()) return;
  if (job.graph.aborted()) {
    // Lost the race with cancel-on-fail: never let it run.
    try {
      adapter_.cancel(cj.id);
    } catch (const Error&) {
    }
    return;
  }
  job.graph.set_progress(run->stage, K::kRunning);
  run->started_at = cj.started.value_or(clock_.now());
  run->node = cj.node.value_or("");
  sync_locked(job);
  persist_locked(job);
}

void Orchestrator::on_epilogue(const cluster::ClusterJob& cj) {
  history::AccountingRecord end;
  end.job_id = cj.id;
  end.event = history::AccountingRecord::Event::kEnd;
  end.timestamp = cj.ended.value_or(clock_.now());
  end.node = cj.node.value_or("");
  end.outcome = cj.state == cluster::JobState::kKilled ? "Killed" : "Exited";
  end.exit_code = cj.reported_exit();
  end.reason = cj.reason;
  end.resources_used = cj.resources_used;
  end.start_absent = !cj.started.has_value();
  try {
    accounting_.record(end);
  } catch (const Error& e) {
    std::cerr << "orchestrator: " << e.what() << "\n";
  }

  std::lock_guard lock(mu_);
  auto loc = by_cluster_id_.find(cj.id);
  if (loc == by_cluster_id_.end()) return;
  auto jt = jobs_.find(loc->second.job_id);
  if (jt == jobs_.end()) return;
  Job& job = jt->second;
  StageRun* run = job.find(loc->second.stage);
  if (!run || run->cluster_id != cj.id || run->state.terminal()) return;
  try {
    epilogue_locked(job, *run, cj);
  } catch (const std::exception& e) {
    std::cerr << "orchestrator: job " << job.id << " stage " << run->stage << ": " << e.what() << "\n";
    if (!job.graph.state(run->stage).terminal()) {
      job.graph.on_stage_terminal(run->stage, StageOutcome::failed(cj.reported_exit(), "internal"));
    }
    if (!job.graph.aborted()) abort_locked(job, "internal");
    sync_locked(job);
  }
  persist_locked(job);
}

void Orchestrator::recover_locked() {
  for (auto& [id, job] : jobs_) {
    if (job.terminal()) continue;
    for (auto& run : job.stages) {
      if (!run.cluster_id || run.state.terminal()) continue;
      std::optional<cluster::ClusterJob> cj;
      try {
        cj = executor_.job(*run.cluster_id);
      } catch (const Error&) {
      }
      if (!cj) {
        cluster::ClusterJob lost;
        lost.id = *run.cluster_id;
        lost.state = cluster::JobState::kKilled;
        lost.reason = TerminationReason::kNodeOffline;
        epilogue_locked(job, run, lost);
      } else if (cluster::is_terminal(cj->state)) {
        epilogue_locked(job, run, *cj);
      }
    }
    if (job.graph.aborted()) {
      abort_locked(job, job.verdict.reason);
    } else {
      // Stages made ready just before a crash never reached the executor.
      deps::TransitionSet t;
      t.newly_ready = job.graph.stages_in(K::kReady);
      apply_locked(job, t);
    }
    persist_locked(job);
  }
}

// ---------------------------------------------------------------------------
// Job control
// ---------------------------------------------------------------------------

Job& Orchestrator::access_locked(const std::string& job_id, const Requester& who, Permission need) {
  auto it = jobs_.find(job_id);
  const Permission have =
      it == jobs_.end() ? Permission::kNone : effective_permission(it->second.owner, it->second.shares, who);
  if (!allows(have, Permission::kView)) throw Error(ErrorCode::kUnknownJob, "no job '" + job_id + "'");
  if (!allows(have, need)) {
    throw Error(ErrorCode::kPermissionDenied, "requires " + std::string(to_string(need)) + " on job '" + job_id + "'");
  }
  return it->second;
}

Job Orchestrator::cancel(const std::string& job_id, const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kRun);
  if (job.terminal()) throw Error(ErrorCode::kInvalidTransition, "job '" + job_id + "' has already finished");
  if (job.graph.aborted()) {
    abort_locked(job, job.verdict.reason);
  } else {
    abort_locked(job, "canceled");
  }
  persist_locked(job);
  return job;
}

Job Orchestrator::hold(const std::string& job_id, const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kRun);
  if (job.verdict.kind != deps::Verdict::Kind::kRunning) {
    throw Error(ErrorCode::kInvalidTransition, "job '" + job_id + "' is no longer running");
  }
  job.held = true;
  for (auto& run : job.stages) {
    if (run.state.kind != K::kSubmitted) continue;
    try {
      adapter_.hold(*run.cluster_id);
      job.graph.set_progress(run.stage, K::kHeld);
    } catch (const Error&) {
      // Started in the meantime; running stages are left alone.
    }
  }
  sync_locked(job);
  persist_locked(job);
  return job;
}

Job Orchestrator::release(const std::string& job_id, const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kRun);
  if (job.verdict.kind != deps::Verdict::Kind::kRunning) {
    throw Error(ErrorCode::kInvalidTransition, "job '" + job_id + "' is no longer running");
  }
  job.held = false;
  for (auto& run : job.stages) {
    if (run.state.kind != K::kHeld) continue;
    try {
      adapter_.release(*run.cluster_id);
      job.graph.set_progress(run.stage, K::kSubmitted);
    } catch (const Error& e) {
      std::cerr << "orchestrator: release of " << *run.cluster_id << " failed: " << e.what() << "\n";
    }
  }
  sync_locked(job);
  persist_locked(job);
  return job;
}

Job Orchestrator::suspend_stage(const std::string& job_id, const std::string& stage, const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kRun);
  StageRun* run = job.find(stage);
  if (!run) throw Error(ErrorCode::kUnknownStage, "no stage '" + stage + "'", {{"stage", stage}});
  if (run->state.kind != K::kRunning) {
    throw Error(ErrorCode::kInvalidTransition, "stage '" + stage + "' is not running",
                {{"state", deps::to_string(run->state.kind)}});
  }
  adapter_.suspend(*run->cluster_id);
  job.graph.set_progress(stage, K::kSuspended);
  sync_locked(job);
  persist_locked(job);
  return job;
}

Job Orchestrator::resume_stage(const std::string& job_id, const std::string& stage, const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kRun);
  StageRun* run = job.find(stage);
  if (!run) throw Error(ErrorCode::kUnknownStage, "no stage '" + stage + "'", {{"stage", stage}});
  if (run->state.kind != K::kSuspended) {
    throw Error(ErrorCode::kInvalidTransition, "stage '" + stage + "' is not suspended",
                {{"state", deps::to_string(run->state.kind)}});
  }
  adapter_.resume(*run->cluster_id);
  job.graph.set_progress(stage, K::kRunning);
  sync_locked(job);
  persist_locked(job);
  return job;
}

// ---------------------------------------------------------------------------
// Alterations
// ---------------------------------------------------------------------------

void Orchestrator::apply_alteration_locked(Job& job, AlterationRequest& a) {
  for (auto& run : job.stages) {
    if (run.cluster_id || run.state.terminal()) continue;
    for (const auto& [field, value] : a.changes.items()) {
      if (field == "walltime") run.resources.walltime_seconds = value.get<std::int64_t>();
      if (field == "memory") run.resources.memory_bytes = value.get<std::int64_t>();
      if (field == "cores") run.resources.cores = value.get<int>();
      if (field == "queue") run.resources.queue = value.get<std::string>();
    }
    a.applied_to.push_back(run.stage);
  }
  persist_locked(job);
}

AlterationRequest Orchestrator::request_alteration(const std::string& job_id, const nlohmann::json& changes,
                                                   const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kRun);
  if (job.verdict.kind != deps::Verdict::Kind::kRunning) {
    throw Error(ErrorCode::kJobTerminal, "job '" + job_id + "' has finished");
  }
  validate_changes(changes);
  if (changes.contains("queue")) {
    const auto queues = executor_.queues();
    const auto name = changes.at("queue").get<std::string>();
    if (std::none_of(queues.begin(), queues.end(), [&](const auto& q) { return q.name == name; })) {
      throw Error(ErrorCode::kInvalidChange, "no queue '" + name + "'", {{"field", "queue"}});
    }
  }
  AlterationRequest a;
  do {
    a.id = crypto::random_hex(6);
  } while (alterations_.count(a.id));
  a.job_id = job_id;
  a.requester = who.username;
  a.changes = changes;
  a.created_at = clock_.now();
  if (who.is_admin) {
    a.state = AlterationRequest::State::kApproved;
    a.decided_by = who.username;
    a.decided_at = a.created_at;
    apply_alteration_locked(job, a);
  }
  alterations_[a.id] = a;
  persist_locked(a);
  return a;
}

AlterationRequest Orchestrator::decide_alteration(const std::string& request_id, bool approve, const Requester& who) {
  if (!who.is_admin) throw Error(ErrorCode::kPermissionDenied, "only administrators decide alteration requests");
  std::lock_guard lock(mu_);
  auto it = alterations_.find(request_id);
  if (it == alterations_.end()) throw Error(ErrorCode::kNotFound, "no alteration request '" + request_id + "'");
  AlterationRequest& a = it->second;
  if (a.state != AlterationRequest::State::kPending) {
    throw Error(ErrorCode::kInvalidTransition, "request '" + request_id + "' was already decided",
                {{"state", to_string(a.state)}});
  }
  auto jt = jobs_.find(a.job_id);
  if (approve && jt != jobs_.end() && jt->second.verdict.kind != deps::Verdict::Kind::kRunning) {
    throw Error(ErrorCode::kJobTerminal, "job '" + a.job_id + "' has finished");
  }
  a.state = approve ? AlterationRequest::State::kApproved : AlterationRequest::State::kDenied;
  a.decided_by = who.username;
  a.decided_at = clock_.now();
  if (approve && jt != jobs_.end()) apply_alteration_locked(jt->second, a);
  persist_locked(a);
  return a;
}

std::vector<AlterationRequest> Orchestrator::alterations(const std::string& job_id, const Requester& who) {
  std::lock_guard lock(mu_);
  access_locked(job_id, who, Permission::kView);
  std::vector<AlterationRequest> out;
  for (const auto& [_, a] : alterations_) {
    if (a.job_id == job_id) out.push_back(a);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.created_at < y.created_at; });
  return out;
}

std::vector<AlterationRequest> Orchestrator::all_alterations(const Requester& who) {
  if (!who.is_admin) throw Error(ErrorCode::kPermissionDenied, "only administrators list all alteration requests");
  std::lock_guard lock(mu_);
  std::vector<AlterationRequest> out;
  for (const auto& [_, a] : alterations_) out.push_back(a);
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.created_at < y.created_at; });
  return out;
}

// ---------------------------------------------------------------------------
// Deletion, sharing, reads
// ---------------------------------------------------------------------------

std::set<std::string> Orchestrator::referenced_blobs() {
  std::lock_guard lock(mu_);
  return referenced_blobs_locked();
}

std::set<std::string> Orchestrator::referenced_blobs_locked() {
  std::set<std::string> refs;
  for (const auto& [_, job] : jobs_) {
    for (const auto& [__, h] : job.scripts) refs.insert(h);
    for (const auto& [__, h] : job.input_files) refs.insert(h);
    for (const auto& run : job.stages) {
      if (!run.snapshot) continue;
      refs.insert(*run.snapshot);
      try {
        auto manifest = nlohmann::json::parse(blobs_.get(*run.snapshot)).get<history::SnapshotManifest>();
        auto hs = manifest.hashes();
        refs.insert(hs.begin(), hs.end());
      } catch (const Error&) {
      }
    }
  }
  return refs;
}

void Orchestrator::collect_garbage_locked() {
  const auto refs = referenced_blobs_locked();
  for (const auto& h : blobs_.hashes()) {
    if (!refs.count(h)) blobs_.remove(h);
  }
}

void Orchestrator::delete_job(const std::string& job_id, const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kEdit);
  if (!job.terminal()) throw Error(ErrorCode::kJobRunning, "job '" + job_id + "' must be canceled before deletion");
  std::filesystem::remove_all(job.working_dir);
  for (const auto& run : job.stages) {
    if (run.cluster_id) by_cluster_id_.erase(*run.cluster_id);
  }
  for (auto it = alterations_.begin(); it != alterations_.end();) {
    if (it->second.job_id == job_id) {
      cache_.erase(kAlterationPrefix + it->first);
      it = alterations_.erase(it);
    } else {
      ++it;
    }
  }
  cache_.erase(kJobPrefix + job_id);
  jobs_.erase(job_id);
  collect_garbage_locked();
}

void Orchestrator::share_job(const std::string& job_id, const std::string& subject, bool is_group,
                             const Requester& who) {
  std::lock_guard lock(mu_);
  Job& job = access_locked(job_id, who, Permission::kEdit);
  if (subject.empty()) throw Error(ErrorCode::kBadRequest, "share target is empty");
  (is_group ? job.shares.groups : job.shares.users)[subject] = Permission::kView;
  persist_locked(job);
}

Job Orchestrator::job(const std::string& job_id, const Requester& who) {
  auto v = cache_.get(kJobPrefix + job_id);
  if (!v) throw Error(ErrorCode::kUnknownJob, "no job '" + job_id + "'");
  Job job = v->value.get<Job>();
  if (!allows(effective_permission(job.owner, job.shares, who), Permission::kView)) {
    throw Error(ErrorCode::kUnknownJob, "no job '" + job_id + "'");
  }
  return job;
}

std::vector<Job> Orchestrator::jobs(const Requester& who) {
  std::vector<Job> out;
  for (const auto& key : cache_.store().keys(kJobPrefix)) {
    auto v = cache_.get(key);
    if (!v) continue;
    Job job = v->value.get<Job>();
    if (allows(effective_permission(job.owner, job.shares, who), Permission::kView)) out.push_back(std::move(job));
  }
  std::sort(out.begin(), out.end(), [](const Job& a, const Job& b) { return a.submitted_at < b.submitted_at; });
  return out;
}

std::filesystem::path Orchestrator::job_file(const std::string& job_id, const std::string& rel, const Requester& who) {
  const Job j = job(job_id, who);
  const auto path = fs::confined_join(j.working_dir, rel);
  struct stat st {};
  if (::lstat(path.c_str(), &st) != 0 || !S_ISREG(st.st_mode)) {
    throw Error(ErrorCode::kNotFound, "no file '" + rel + "' in job '" + job_id + "'");
  }
  return path;
}

bool Orchestrator::record_usage(const std::string& cluster_id, const ResourcesUsed& used, Timestamp at) {
  std::lock_guard lock(mu_);
  auto loc = by_cluster_id_.find(cluster_id);
  if (loc == by_cluster_id_.end()) return false;
  auto jt = jobs_.find(loc->second.job_id);
  if (jt == jobs_.end()) return false;
  StageRun* run = jt->second.find(loc->second.stage);
  if (!run || run->cluster_id != cluster_id) return false;
  if (run->state.kind != K::kRunning && run->state.kind != K::kSuspended) return false;
  run->resources_used = used;
  run->samples.push_back({at, used});
  persist_locked(jt->second);
  return true;
}

void Orchestrator::persist_locked(const Job& job) { cache_.put(kJobPrefix + job.id, nlohmann::json(job)); }

void Orchestrator::persist_locked(const AlterationRequest& a) { cache_.put(kAlterationPrefix + a.id, nlohmann::json(a)); }

}  // namespace jms::orchestrator
