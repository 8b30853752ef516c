#include "jms/orchestrator/job.hpp"

#include "jms/common/error.hpp"

namespace jms::orchestrator {

namespace {

using nlohmann::json;

using FractionalMillis = std::chrono::duration<double, std::milli>;

// Milliseconds since the epoch with a fractional part, so event order
// survives a round trip through the record.
double encode_time(Timestamp t) { return FractionalMillis(t.time_since_epoch()).count(); }

Timestamp decode_time(const json& v) {
  return Timestamp{std::chrono::duration_cast<Timestamp::duration>(FractionalMillis(v.get<double>()))};
}

void put_time(json& j, const char* key, const std::optional<Timestamp>& t) {
  if (t) j[key] = encode_time(*t);
}

std::optional<Timestamp> get_time(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return decode_time(j.at(key));
}

}  // namespace

StageRun* Job::find(std::string_view stage) {
  for (auto& r : stages) {
    if (r.stage == stage) return &r;
  }
  return nullptr;
}

const StageRun* Job::find(std::string_view stage) const {
  for (const auto& r : stages) {
    if (r.stage == stage) return &r;
  }
  return nullptr;
}

void to_json(json& j, const StageRun& r) {
  j = json{{"stage", r.stage},
           {"state", r.state},
           {"resources", r.resources},
           {"command", r.command},
           {"node", r.node},
           {"resources_used", r.resources_used},
           {"missing_outputs", r.missing_outputs},
           {"restored", r.restored}};
  j["cluster_id"] = r.cluster_id ? json(*r.cluster_id) : json(nullptr);
  // A killed stage reports the synthetic code its dependents matched against.
  if (r.state.kind == deps::StageState::Kind::kKilled) {
    j["exit_code"] = kKilledExitCode;
  } else {
    j["exit_code"] = r.state.exit_code ? json(*r.state.exit_code) : json(nullptr);
  }
  j["snapshot"] = r.snapshot ? json(*r.snapshot) : json(nullptr);
  j["stdout"] = r.cluster_id ? json(r.stdout_file()) : json(nullptr);
  j["stderr"] = r.cluster_id ? json(r.stderr_file()) : json(nullptr);
  json samples = json::array();
  for (const auto& s : r.samples) samples.push_back({{"at", encode_time(s.at)}, {"used", s.used}});
  j["samples"] = std::move(samples);
  put_time(j, "snapshot_at", r.snapshot_at);
  put_time(j, "submitted_at", r.submitted_at);
  put_time(j, "started_at", r.started_at);
  put_time(j, "ended_at", r.ended_at);
}

void from_json(const json& j, StageRun& r) {
  r = StageRun{};
  r.stage = j.at("stage").get<std::string>();
  r.state = j.at("state").get<deps::StageState>();
  r.resources = j.at("resources").get<ResourceRequest>();
  r.command = j.value("command", std::string{});
  r.node = j.value("node", std::string{});
  r.resources_used = j.at("resources_used").get<ResourcesUsed>();
  r.missing_outputs = j.value("missing_outputs", std::vector<std::string>{});
  r.restored = j.value("restored", false);
  if (j.contains("cluster_id") && !j.at("cluster_id").is_null()) r.cluster_id = j.at("cluster_id").get<std::string>();
  if (j.contains("snapshot") && !j.at("snapshot").is_null()) r.snapshot = j.at("snapshot").get<std::string>();
  for (const auto& s : j.value("samples", json::array())) {
    r.samples.push_back({decode_time(s.at("at")), s.at("used").get<ResourcesUsed>()});
  }
  r.snapshot_at = get_time(j, "snapshot_at");
  r.submitted_at = get_time(j, "submitted_at");
  r.started_at = get_time(j, "started_at");
  r.ended_at = get_time(j, "ended_at");
}

void to_json(json& j, const Job& job) {
  json ran = json::array();
  json skipped = json::array();
  for (const auto& r : job.stages) {
    if (r.state.executed()) ran.push_back(r.stage);
    if (r.state.kind == deps::StageState::Kind::kSkipped) skipped.push_back(r.stage);
  }
  j = json{{"id", job.id},
           {"owner", job.owner},
           {"workflow", job.workflow},
           {"inputs", job.inputs},
           {"scripts", job.scripts},
           {"input_files", job.input_files},
           {"working_dir", job.working_dir},
           {"stages", job.stages},
           {"executed", ran},
           {"skipped", skipped},
           {"graph", job.graph.to_json()},
           {"verdict", {{"state", deps::to_string(job.verdict.kind)}, {"reason", job.verdict.reason}}},
           {"terminal", job.terminal()},
           {"submitted_at", encode_time(job.submitted_at)},
           {"held", job.held},
           {"shares", job.shares}};
  put_time(j, "ended_at", job.ended_at);
  j["repeat_of"] = job.repeat_of ? json(*job.repeat_of) : json(nullptr);
  j["from_stage"] = job.from_stage ? json(*job.from_stage) : json(nullptr);
}

void from_json(const json& j, Job& job) {
  job = Job{};
  job.id = j.at("id").get<std::string>();
  job.owner = j.at("owner").get<std::string>();
  job.workflow = j.at("workflow").get<workflow::Workflow>();
  job.inputs = j.at("inputs").get<workflow::InputValues>();
  job.scripts = j.at("scripts").get<std::map<std::string, std::string>>();
  job.input_files = j.at("input_files").get<std::map<std::string, std::string>>();
  job.working_dir = j.at("working_dir").get<std::string>();
  job.stages = j.at("stages").get<std::vector<StageRun>>();
  job.graph = deps::DependencyGraph::from_json(j.at("graph"));
  job.verdict = deps::job_verdict(job.graph);
  job.submitted_at = decode_time(j.at("submitted_at"));
  job.ended_at = get_time(j, "ended_at");
  job.held = j.value("held", false);
  job.shares = j.at("shares").get<Grants>();
  if (j.contains("repeat_of") && !j.at("repeat_of").is_null()) job.repeat_of = j.at("repeat_of").get<std::string>();
  if (j.contains("from_stage") && !j.at("from_stage").is_null()) job.from_stage = j.at("from_stage").get<std::string>();
}

std::string_view to_string(AlterationRequest::State s) {
  switch (s) {
    case AlterationRequest::State::kPending: return "Pending";
    case AlterationRequest::State::kApproved: return "Approved";
    case AlterationRequest::State::kDenied: return "Denied";
  }
  return "Pending";
}

void to_json(json& j, const AlterationRequest& a) {
  j = json{{"id", a.id},
           {"job_id", a.job_id},
           {"requester", a.requester},
           {"changes", a.changes},
           {"state", to_string(a.state)},
           {"created_at", encode_time(a.created_at)},
           {"applied_to", a.applied_to}};
  j["decided_by"] = a.decided_by ? json(*a.decided_by) : json(nullptr);
  put_time(j, "decided_at", a.decided_at);
}

void from_json(const json& j, AlterationRequest& a) {
  a = AlterationRequest{};
  a.id = j.at("id").get<std::string>();
  a.job_id = j.at("job_id").get<std::string>();
  a.requester = j.at("requester").get<std::string>();
  a.changes = j.at("changes");
  const auto state = j.at("state").get<std::string>();
  a.state = state == "Approved"  ? AlterationRequest::State::kApproved
            : state == "Denied" ? AlterationRequest::State::kDenied
                                : AlterationRequest::State::kPending;
  a.created_at = decode_time(j.at("created_at"));
  a.applied_to = j.value("applied_to", std::vector<std::string>{});
  if (j.contains("decided_by") && !j.at("decided_by").is_null()) a.decided_by = j.at("decided_by").get<std::string>();
  a.decided_at = get_time(j, "decided_at");
}

}  // namespace jms::orchestrator
