#include "jms/cluster/executor.hpp"

#include <algorithm>

#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::cluster {

using nlohmann::json;

namespace {

Error transition_error(const ClusterJob& job, const char* op) {
  return Error(ErrorCode::kInvalidTransition,
               std::string("cannot ") + op + " job " + job.id + " in state " + std::string(to_string(job.state)),
               {{"job", job.id}, {"state", to_string(job.state)}, {"operation", op}});
}

}  // namespace

Executor::Executor(ExecutorOptions opts)
    : clock_(opts.clock),
      launcher_(std::move(opts.launcher)),
      state_file_(std::move(opts.state_file)),
      disk_path_(std::move(opts.disk_path)),
      settings_(std::move(opts.settings)) {
  if (!clock_) {
    owned_clock_ = std::make_unique<SystemClock>();
    clock_ = owned_clock_.get();
  }
  if (!launcher_) launcher_ = std::make_shared<ProcessLauncher>();

  std::lock_guard lock(mu_);
  if (!state_file_.empty()) {
    if (auto doc = fs::read_json(state_file_)) load_locked(*doc, clock_->now());
  }
  if (!queues_.count(settings_.default_queue)) {
    ClusterQueue q;
    q.name = settings_.default_queue;
    queues_[q.name] = q;
  }
  persist_locked();

  launcher_->set_exit_sink([this](ExitReport r) {
    {
      std::lock_guard l(mu_);
      inbox_.push_back(std::move(r));
    }
    cv_.notify_all();
  });
}

Executor::~Executor() {
  stop();
  launcher_->shutdown();
  std::lock_guard lock(mu_);
  persist_locked();
}

void Executor::add_hooks(Hook prologue, Hook epilogue) {
  std::lock_guard lock(mu_);
  hooks_.emplace_back(std::move(prologue), std::move(epilogue));
}

// ---------------------------------------------------------------------------
// Submission and per-job control
// ---------------------------------------------------------------------------

std::string Executor::submit(const JobSpec& spec, bool hold) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    const std::string qname = spec.resources.queue.empty() ? settings_.default_queue : spec.resources.queue;
    ClusterQueue* q = queue_locked(qname);
    if (!q) throw Error(ErrorCode::kUnknownQueue, "unknown queue " + qname, {{"queue", qname}});
    if (q->state == QueueState::kDisabled) throw Error(ErrorCode::kQueueDisabled, "queue " + qname + " is disabled", {{"queue", qname}});
    const auto& r = spec.resources;
    if (r.cores <= 0 || r.memory_bytes <= 0 || r.walltime_seconds <= 0) {
      throw Error(ErrorCode::kResourceLimitExceeded, "resource requests must be positive");
    }
    if (q->max_walltime && r.walltime_seconds > *q->max_walltime) {
      throw Error(ErrorCode::kResourceLimitExceeded,
                  "walltime " + std::to_string(r.walltime_seconds) + "s exceeds queue limit " +
                      std::to_string(*q->max_walltime) + "s",
                  {{"queue", qname}, {"max_walltime", *q->max_walltime}});
    }
    // A request no node could ever hold would block its queue forever.
    if (!nodes_.empty() && std::none_of(nodes_.begin(), nodes_.end(), [&](const auto& kv) {
          return kv.second.cores_total >= r.cores && kv.second.memory_total >= r.memory_bytes;
        })) {
      throw Error(ErrorCode::kResourceLimitExceeded, "request exceeds the capacity of every node");
    }
    if (q->max_queued) {
      const auto waiting = std::count_if(jobs_.begin(), jobs_.end(), [&](const auto& kv) {
        return kv.second.queue == qname && (kv.second.state == JobState::kQueued || kv.second.state == JobState::kHeld);
      });
      if (waiting >= *q->max_queued) throw Error(ErrorCode::kQueueFull, "queue " + qname + " is full", {{"queue", qname}});
    }

    ClusterJob job;
    job.seq = next_seq_++;
    job.id = std::to_string(job.seq) + "." + settings_.server_name;
    job.name = spec.name;
    job.owner = spec.owner;
    job.queue = qname;
    job.resources = r;
    job.resources.queue = qname;
    job.command = spec.command;
    job.working_dir = spec.working_dir.empty() ? std::string(".") : spec.working_dir;
    job.env = spec.env;
    job.state = hold ? JobState::kHeld : JobState::kQueued;
    job.submitted = clock_->now();
    id = job.id;
    jobs_[id] = std::move(job);
    order_.push_back(id);
    persist_locked();
  }
  kick();
  return id;
}

JobState Executor::cancel(const std::string& id) {
  {
    std::lock_guard lock(mu_);
    ClusterJob& job = find_locked(id);
    if (is_terminal(job.state)) throw transition_error(job, "cancel");
    kill_locked(job, TerminationReason::kCanceled, clock_->now());
    persist_locked();
  }
  kick();
  return JobState::kKilled;
}

JobState Executor::hold(const std::string& id) {
  std::lock_guard lock(mu_);
  ClusterJob& job = find_locked(id);
  if (job.state != JobState::kQueued) throw transition_error(job, "hold");
  job.state = JobState::kHeld;
  persist_locked();
  return job.state;
}

JobState Executor::release(const std::string& id) {
  {
    std::lock_guard lock(mu_);
    ClusterJob& job = find_locked(id);
    if (job.state != JobState::kHeld) throw transition_error(job, "release");
    job.state = JobState::kQueued;
    persist_locked();
  }
  kick();
  return JobState::kQueued;
}

JobState Executor::suspend(const std::string& id) {
  std::lock_guard lock(mu_);
  ClusterJob& job = find_locked(id);
  if (job.state != JobState::kRunning || !launched_.count(id)) throw transition_error(job, "suspend");
  launcher_->suspend(id);
  job.state = JobState::kSuspended;
  persist_locked();
  return job.state;
}

JobState Executor::resume(const std::string& id) {
  std::lock_guard lock(mu_);
  ClusterJob& job = find_locked(id);
  if (job.state != JobState::kSuspended) throw transition_error(job, "resume");
  launcher_->resume(id);
  job.state = JobState::kRunning;
  persist_locked();
  return job.state;
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

ClusterJob Executor::job(const std::string& id) const {
  std::lock_guard lock(mu_);
  return find_locked(id);
}

std::vector<ClusterJob> Executor::jobs() const {
  std::lock_guard lock(mu_);
  std::vector<ClusterJob> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(jobs_.at(id));
  return out;
}

ResourcesUsed Executor::usage(const std::string& id) const {
  std::lock_guard lock(mu_);
  const ClusterJob& job = find_locked(id);
  if (!holding_.count(id) || !job.started) return job.resources_used;
  ResourcesUsed u = job.resources_used;
  if (auto live = launcher_->sample(id)) {
    u.cpu_seconds = std::max(u.cpu_seconds, live->cpu_seconds);
    u.peak_memory_bytes = std::max(u.peak_memory_bytes, live->peak_memory_bytes);
  }
  u.walltime_seconds = seconds_between(*job.started, job.ended.value_or(clock_->now()));
  return u;
}

QstatRecord Executor::query_status(const std::string& id) const {
  const ResourcesUsed live = usage(id);
  std::lock_guard lock(mu_);
  return qstat_record(find_locked(id), live);
}

ClusterSummary Executor::summary() const {
  std::lock_guard lock(mu_);
  ClusterSummary s;
  int cores_total = 0, cores_used = 0;
  for (const auto& [name, n] : nodes_) {
    if (n.state == NodeState::kOnline) {
      ++s.nodes_online;
      cores_total += n.cores_total;
      cores_used += n.cores_used;
    } else {
      ++s.nodes_offline;
    }
  }
  s.utilization = cores_total > 0 ? static_cast<double>(cores_used) / cores_total : 0.0;
  for (const auto& [id, job] : jobs_) {
    if (job.state == JobState::kRunning || job.state == JobState::kSuspended) ++s.jobs_running;
    if (job.state == JobState::kQueued || job.state == JobState::kHeld) ++s.jobs_queued;
  }
  std::error_code ec;
  auto space = std::filesystem::space(disk_path_, ec);
  if (!ec) s.disk_available_bytes = space.available;
  return s;
}

std::vector<Node> Executor::nodes() const {
  std::lock_guard lock(mu_);
  std::vector<Node> out;
  for (const auto& [name, n] : nodes_) out.push_back(n);
  return out;
}

std::vector<ClusterQueue> Executor::queues() const {
  std::lock_guard lock(mu_);
  std::vector<ClusterQueue> out;
  for (const auto& [name, q] : queues_) out.push_back(q);
  return out;
}

ServerSettings Executor::settings() const {
  std::lock_guard lock(mu_);
  return settings_;
}

// ---------------------------------------------------------------------------
// Administration
// ---------------------------------------------------------------------------

void Executor::add_node(const std::string& name, int cores, std::int64_t memory_bytes) {
  {
    std::lock_guard lock(mu_);
    if (!fs::is_plain_name(name)) throw Error(ErrorCode::kBadRequest, "invalid node name");
    if (cores <= 0 || memory_bytes <= 0) throw Error(ErrorCode::kBadRequest, "node capacity must be positive");
    if (nodes_.count(name)) throw Error(ErrorCode::kDuplicateName, "node " + name + " exists", {{"node", name}});
    Node n;
    n.name = name;
    n.cores_total = cores;
    n.memory_total = memory_bytes;
    nodes_[name] = n;
    persist_locked();
  }
  kick();
}

void Executor::set_node_state(const std::string& name, NodeState state) {
  {
    std::lock_guard lock(mu_);
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, "unknown node " + name, {{"node", name}});
    it->second.state = state;
    persist_locked();
  }
  kick();
}

void Executor::remove_node(const std::string& name) {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::kUnknownNode, "unknown node " + name, {{"node", name}});
  if (!it->second.running.empty()) throw Error(ErrorCode::kNodeBusy, "node " + name + " has running jobs", {{"node", name}});
  nodes_.erase(it);
  persist_locked();
}

void Executor::create_queue(const ClusterQueue& q) {
  std::lock_guard lock(mu_);
  if (!fs::is_plain_name(q.name)) throw Error(ErrorCode::kBadRequest, "invalid queue name");
  if (queues_.count(q.name)) throw Error(ErrorCode::kDuplicateName, "queue " + q.name + " exists", {{"queue", q.name}});
  queues_[q.name] = q;
  persist_locked();
}

void Executor::set_queue(const ClusterQueue& q) {
  std::lock_guard lock(mu_);
  auto it = queues_.find(q.name);
  if (it == queues_.end()) throw Error(ErrorCode::kUnknownQueue, "unknown queue " + q.name, {{"queue", q.name}});
  it->second = q;
  persist_locked();
}

void Executor::delete_queue(const std::string& name) {
  std::lock_guard lock(mu_);
  auto it = queues_.find(name);
  if (it == queues_.end()) throw Error(ErrorCode::kUnknownQueue, "unknown queue " + name, {{"queue", name}});
  if (name == settings_.default_queue) {
    throw Error(ErrorCode::kDefaultQueueProtected, "the default queue cannot be deleted", {{"queue", name}});
  }
  for (const auto& [id, job] : jobs_) {
    if (job.queue == name && !is_terminal(job.state)) {
      throw Error(ErrorCode::kQueueBusy, "queue " + name + " has live jobs", {{"queue", name}});
    }
  }
  queues_.erase(it);
  persist_locked();
}

void Executor::set_settings(const ServerSettings& s) {
  {
    std::lock_guard lock(mu_);
    if (!(s.tick_interval_seconds > 0)) throw Error(ErrorCode::kBadRequest, "tick interval must be positive");
    if (s.kill_grace_seconds < 0) throw Error(ErrorCode::kBadRequest, "kill grace must not be negative");
    if (s.server_name.empty() || !fs::is_plain_name(s.server_name)) throw Error(ErrorCode::kBadRequest, "invalid server name");
    if (!queues_.count(s.default_queue)) {
      throw Error(ErrorCode::kUnknownQueue, "unknown queue " + s.default_queue, {{"queue", s.default_queue}});
    }
    settings_ = s;
    persist_locked();
  }
  kick();
}

// ---------------------------------------------------------------------------
// Scheduling
// ---------------------------------------------------------------------------

std::vector<Assignment> Executor::step() {
  std::lock_guard step_lock(step_mu_);
  launcher_->pump();
  std::vector<Assignment> made;
  {
    std::lock_guard lock(mu_);
    ++ticks_;
    const auto now = clock_->now();
    std::vector<ExitReport> inbox;
    inbox.swap(inbox_);
    for (const auto& r : inbox) finalize_exit_locked(r, now);
    enforce_walltime_locked(now);
    made = schedule_locked(now);
    persist_locked();
  }
  for (const auto& a : made) start_job(a);
  dispatch_epilogues();
  return made;
}

std::uint64_t Executor::ticks() const {
  std::lock_guard lock(mu_);
  return ticks_;
}

std::vector<Assignment> Executor::schedule_locked(Timestamp now) {
  std::vector<Assignment> made;
  std::set<std::string> blocked_queues;
  for (const auto& id : order_) {
    ClusterJob& job = jobs_.at(id);
    if (job.state != JobState::kQueued || blocked_queues.count(job.queue)) continue;
    Node* target = nullptr;
    for (auto& [name, n] : nodes_) {
      if (n.state != NodeState::kOnline) continue;
      if (n.cores_total - n.cores_used >= job.resources.cores && n.memory_total - n.memory_used >= job.resources.memory_bytes) {
        target = &n;
        break;
      }
    }
    if (!target) {
      blocked_queues.insert(job.queue);
      continue;
    }
    target->cores_used += job.resources.cores;
    target->memory_used += job.resources.memory_bytes;
    target->running.insert(id);
    holding_.insert(id);
    job.state = JobState::kRunning;
    job.node = target->name;
    job.started = now;
    made.push_back(Assignment{id, target->name});
  }
  return made;
}

void Executor::start_job(const Assignment& a) {
  ClusterJob snapshot;
  std::vector<Hook> prologues;
  {
    std::lock_guard lock(mu_);
    snapshot = jobs_.at(a.job_id);
    for (const auto& h : hooks_) {
      if (h.first) prologues.push_back(h.first);
    }
  }
  for (const auto& p : prologues) p(snapshot);

  std::lock_guard lock(mu_);
  ClusterJob& job = jobs_.at(a.job_id);
  const auto now = clock_->now();
  if (job.state != JobState::kRunning) {
    // Canceled between assignment and launch: nothing to wait for.
    release_locked(job);
    epilogues_.push_back(job);
    persist_locked();
    return;
  }
  LaunchRequest req;
  req.job_id = job.id;
  req.command = job.command;
  req.working_dir = job.working_dir;
  req.env = job.env;
  req.env["PBS_JOBID"] = job.id;
  req.env["PBS_JOBNAME"] = job.name;
  req.env["PBS_QUEUE"] = job.queue;
  req.env["PBS_O_WORKDIR"] = job.working_dir;
  req.env["PBS_NUM_PPN"] = std::to_string(job.resources.cores);
  req.stdout_path = (std::filesystem::path(job.working_dir) / (job.id + ".OU")).string();
  req.stderr_path = (std::filesystem::path(job.working_dir) / (job.id + ".ER")).string();
  try {
    launcher_->launch(req);
    launched_.insert(job.id);
  } catch (const Error& e) {
    job.state = JobState::kExited;
    job.exit_code = 127;
    job.ended = now;
    job.comment = std::string("spawn failure: ") + e.what();
    release_locked(job);
    epilogues_.push_back(job);
  }
  persist_locked();
}

void Executor::enforce_walltime_locked(Timestamp now) {
  for (const auto& id : order_) {
    ClusterJob& job = jobs_.at(id);
    if ((job.state != JobState::kRunning && job.state != JobState::kSuspended) || !launched_.count(id)) continue;
    if (seconds_between(*job.started, now) > static_cast<double>(job.resources.walltime_seconds)) {
      kill_locked(job, TerminationReason::kWalltimeExceeded, now);
    }
  }
}

void Executor::kill_locked(ClusterJob& job, TerminationReason reason, Timestamp now) {
  const bool was_waiting = job.state == JobState::kQueued || job.state == JobState::kHeld;
  job.state = JobState::kKilled;
  job.reason = reason;
  job.exit_code.reset();
  job.ended = now;
  if (was_waiting) {
    epilogues_.push_back(job);
    return;
  }
  if (launched_.count(job.id)) {
    launcher_->terminate(job.id, std::chrono::milliseconds(static_cast<long long>(settings_.kill_grace_seconds * 1000)));
  }
  // The epilogue waits for the process exit, or for start_job to notice.
}

void Executor::finalize_exit_locked(const ExitReport& report, Timestamp now) {
  auto it = jobs_.find(report.job_id);
  if (it == jobs_.end() || !launched_.count(report.job_id)) return;
  ClusterJob& job = it->second;
  launched_.erase(report.job_id);
  if (job.state == JobState::kRunning || job.state == JobState::kSuspended) {
    job.state = JobState::kExited;
    job.exit_code = report.exit_code;
    job.ended = now;
  }
  job.resources_used.cpu_seconds = report.usage.cpu_seconds;
  job.resources_used.peak_memory_bytes = report.usage.peak_memory_bytes;
  job.resources_used.walltime_seconds = seconds_between(*job.started, *job.ended);
  release_locked(job);
  epilogues_.push_back(job);
}

void Executor::release_locked(ClusterJob& job) {
  if (!holding_.erase(job.id) || !job.node) return;
  auto n = nodes_.find(*job.node);
  if (n == nodes_.end()) return;
  n->second.running.erase(job.id);
  n->second.cores_used -= job.resources.cores;
  n->second.memory_used -= job.resources.memory_bytes;
}

void Executor::dispatch_epilogues() {
  for (;;) {
    ClusterJob job;
    std::vector<Hook> epilogues;
    {
      std::lock_guard lock(mu_);
      if (epilogues_.empty()) return;
      job = std::move(epilogues_.front());
      epilogues_.pop_front();
      for (const auto& h : hooks_) {
        if (h.second) epilogues.push_back(h.second);
      }
    }
    for (const auto& e : epilogues) e(job);
  }
}

// ---------------------------------------------------------------------------
// Loop and persistence
// ---------------------------------------------------------------------------

void Executor::kick() {
  {
    std::lock_guard lock(mu_);
    kicked_ = true;
  }
  cv_.notify_all();
}

void Executor::start() {
  std::lock_guard lock(mu_);
  if (loop_.joinable()) return;
  stop_ = false;
  loop_ = std::thread([this] {
    for (;;) {
      step();
      std::unique_lock lock(mu_);
      const auto interval = std::chrono::duration<double>(settings_.tick_interval_seconds);
      cv_.wait_for(lock, interval, [&] { return stop_ || kicked_ || !inbox_.empty(); });
      if (stop_) return;
      kicked_ = false;
    }
  });
}

void Executor::stop() {
  std::thread t;
  {
    std::lock_guard lock(mu_);
    stop_ = true;
    t.swap(loop_);
  }
  cv_.notify_all();
  if (t.joinable()) t.join();
}

ClusterJob& Executor::find_locked(const std::string& id) {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::kUnknownJob, "unknown job " + id, {{"job", id}});
  return it->second;
}

const ClusterJob& Executor::find_locked(const std::string& id) const {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::kUnknownJob, "unknown job " + id, {{"job", id}});
  return it->second;
}

ClusterQueue* Executor::queue_locked(const std::string& name) {
  auto it = queues_.find(name);
  return it == queues_.end() ? nullptr : &it->second;
}

void Executor::persist_locked() {
  if (state_file_.empty()) return;
  json doc;
  doc["next_seq"] = next_seq_;
  doc["settings"] = settings_;
  doc["nodes"] = json::array();
  for (const auto& [name, n] : nodes_) doc["nodes"].push_back(n);
  doc["queues"] = json::array();
  for (const auto& [name, q] : queues_) doc["queues"].push_back(q);
  doc["jobs"] = json::array();
  for (const auto& id : order_) doc["jobs"].push_back(jobs_.at(id));
  doc["holding"] = holding_;
  fs::write_json_atomic(state_file_, doc);
}

void Executor::load_locked(const json& doc, Timestamp now) {
  next_seq_ = doc.value("next_seq", std::uint64_t{1});
  settings_ = doc.value("settings", settings_);
  for (const auto& n : doc.value("nodes", json::array())) {
    Node node = n.get<Node>();
    nodes_[node.name] = node;
  }
  for (const auto& q : doc.value("queues", json::array())) {
    ClusterQueue queue = q.get<ClusterQueue>();
    queues_[queue.name] = queue;
  }
  for (const auto& j : doc.value("jobs", json::array())) {
    ClusterJob job = j.get<ClusterJob>();
    order_.push_back(job.id);
    next_seq_ = std::max(next_seq_, job.seq + 1);
    jobs_[job.id] = std::move(job);
  }
  holding_ = doc.value("holding", std::set<std::string>{});
  // Processes do not survive a restart.
  for (const auto& id : order_) {
    ClusterJob& job = jobs_.at(id);
    const bool was_live = job.state == JobState::kRunning || job.state == JobState::kSuspended;
    if (!was_live && !(job.state == JobState::kKilled && holding_.count(id))) continue;
    if (was_live) {
      job.state = JobState::kKilled;
      job.reason = TerminationReason::kNodeOffline;
      job.ended = now;
      job.comment = "server restarted while the job was running";
    }
    if (job.started) job.resources_used.walltime_seconds = seconds_between(*job.started, *job.ended);
    release_locked(job);
    epilogues_.push_back(job);
  }
}

}  // namespace jms::cluster
