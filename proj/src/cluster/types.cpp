#include "jms/cluster/types.hpp"

#include "jms/common/error.hpp"

namespace jms::cluster {

using nlohmann::json;

namespace {

json opt_time(const std::optional<Timestamp>& t) { return t ? json(to_millis(*t)) : json(nullptr); }

std::optional<Timestamp> read_time(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return from_millis(j.at(key).get<std::int64_t>());
}

}  // namespace

std::string_view to_string(NodeState s) { return s == NodeState::kOnline ? "online" : "offline"; }

NodeState node_state_from_string(std::string_view s) {
  if (s == "online") return NodeState::kOnline;
  if (s == "offline") return NodeState::kOffline;
  throw Error(ErrorCode::kBadRequest, "node state must be online or offline");
}

void to_json(json& j, const Node& n) {
  j = json{{"name", n.name},
           {"cores_total", n.cores_total},
           {"memory_total", n.memory_total},
           {"state", to_string(n.state)},
           {"running", n.running},
           {"cores_used", n.cores_used},
           {"memory_used", n.memory_used}};
}

void from_json(const json& j, Node& n) {
  n.name = j.at("name").get<std::string>();
  n.cores_total = j.at("cores_total").get<int>();
  n.memory_total = j.at("memory_total").get<std::int64_t>();
  n.state = node_state_from_string(j.value("state", "online"));
  n.running = j.value("running", std::set<std::string>{});
  n.cores_used = j.value("cores_used", 0);
  n.memory_used = j.value("memory_used", std::int64_t{0});
}

std::string_view to_string(QueueState s) { return s == QueueState::kEnabled ? "enabled" : "disabled"; }

QueueState queue_state_from_string(std::string_view s) {
  if (s == "enabled") return QueueState::kEnabled;
  if (s == "disabled") return QueueState::kDisabled;
  throw Error(ErrorCode::kBadRequest, "queue state must be enabled or disabled");
}

void to_json(json& j, const ClusterQueue& q) {
  j = json{{"name", q.name},
           {"state", to_string(q.state)},
           {"max_walltime", q.max_walltime ? json(*q.max_walltime) : json(nullptr)},
           {"max_queued", q.max_queued ? json(*q.max_queued) : json(nullptr)},
           {"defaults", q.defaults}};
}

void from_json(const json& j, ClusterQueue& q) {
  q.name = j.at("name").get<std::string>();
  q.state = queue_state_from_string(j.value("state", "enabled"));
  q.max_walltime.reset();
  q.max_queued.reset();
  if (j.contains("max_walltime") && !j.at("max_walltime").is_null()) q.max_walltime = j.at("max_walltime").get<std::int64_t>();
  if (j.contains("max_queued") && !j.at("max_queued").is_null()) q.max_queued = j.at("max_queued").get<int>();
  q.defaults = j.contains("defaults") ? j.at("defaults").get<ResourceRequest>() : ResourceRequest{};
}

void to_json(json& j, const ServerSettings& s) {
  j = json{{"server_name", s.server_name},
           {"tick_interval_seconds", s.tick_interval_seconds},
           {"default_queue", s.default_queue},
           {"kill_grace_seconds", s.kill_grace_seconds}};
}

void from_json(const json& j, ServerSettings& s) {
  ServerSettings d;
  s.server_name = j.value("server_name", d.server_name);
  s.tick_interval_seconds = j.value("tick_interval_seconds", d.tick_interval_seconds);
  s.default_queue = j.value("default_queue", d.default_queue);
  s.kill_grace_seconds = j.value("kill_grace_seconds", d.kill_grace_seconds);
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "Queued";
    case JobState::kHeld: return "Held";
    case JobState::kRunning: return "Running";
    case JobState::kSuspended: return "Suspended";
    case JobState::kExited: return "Exited";
    case JobState::kKilled: return "Killed";
  }
  return "Queued";
}

JobState job_state_from_string(std::string_view s) {
  for (auto st : {JobState::kQueued, JobState::kHeld, JobState::kRunning, JobState::kSuspended, JobState::kExited,
                  JobState::kKilled}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kBadRequest, "unknown job state: " + std::string(s));
}

void to_json(json& j, const ClusterJob& job) {
  j = json{{"id", job.id},
           {"seq", job.seq},
           {"name", job.name},
           {"owner", job.owner},
           {"queue", job.queue},
           {"resources", job.resources},
           {"command", job.command},
           {"working_dir", job.working_dir},
           {"env", job.env},
           {"state", to_string(job.state)},
           {"exit_code", job.exit_code ? json(*job.exit_code) : json(nullptr)},
           {"reason", job.reason ? json(to_string(*job.reason)) : json(nullptr)},
           {"node", job.node ? json(*job.node) : json(nullptr)},
           {"resources_used", job.resources_used},
           {"submitted_ms", opt_time(job.submitted)},
           {"started_ms", opt_time(job.started)},
           {"ended_ms", opt_time(job.ended)},
           {"comment", job.comment}};
}

void from_json(const json& j, ClusterJob& job) {
  job.id = j.at("id").get<std::string>();
  job.seq = j.at("seq").get<std::uint64_t>();
  job.name = j.value("name", "");
  job.owner = j.value("owner", "");
  job.queue = j.value("queue", "");
  job.resources = j.at("resources").get<ResourceRequest>();
  job.command = j.value("command", "");
  job.working_dir = j.value("working_dir", "");
  job.env = j.value("env", std::map<std::string, std::string>{});
  job.state = job_state_from_string(j.at("state").get<std::string>());
  job.exit_code.reset();
  job.reason.reset();
  job.node.reset();
  if (!j.value("exit_code", json(nullptr)).is_null()) job.exit_code = j.at("exit_code").get<int>();
  if (!j.value("reason", json(nullptr)).is_null()) job.reason = termination_reason_from_string(j.at("reason").get<std::string>());
  if (!j.value("node", json(nullptr)).is_null()) job.node = j.at("node").get<std::string>();
  job.resources_used = j.value("resources_used", ResourcesUsed{});
  job.submitted = read_time(j, "submitted_ms");
  job.started = read_time(j, "started_ms");
  job.ended = read_time(j, "ended_ms");
  job.comment = j.value("comment", "");
}

void to_json(json& j, const ClusterSummary& s) {
  j = json{{"nodes_online", s.nodes_online},
           {"nodes_offline", s.nodes_offline},
           {"utilization", s.utilization},
           {"jobs_running", s.jobs_running},
           {"jobs_queued", s.jobs_queued},
           {"disk_available_bytes", s.disk_available_bytes}};
}

}  // namespace jms::cluster
