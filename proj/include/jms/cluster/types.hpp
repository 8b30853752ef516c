#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "jms/common/clock.hpp"
#include "jms/common/types.hpp"

namespace jms::cluster {

enum class NodeState { kOnline, kOffline };

std::string_view to_string(NodeState s);
NodeState node_state_from_string(std::string_view s);

// Nodes are accounting fictions: every process runs on the host.
struct Node {
  std::string name;
  int cores_total = 1;
  std::int64_t memory_total = 0;
  NodeState state = NodeState::kOnline;
  std::set<std::string> running;  // cluster job ids holding resources here
  int cores_used = 0;
  std::int64_t memory_used = 0;
};

void to_json(nlohmann::json& j, const Node& n);
void from_json(const nlohmann::json& j, Node& n);

enum class QueueState { kEnabled, kDisabled };

std::string_view to_string(QueueState s);
QueueState queue_state_from_string(std::string_view s);

struct ClusterQueue {
  std::string name;
  QueueState state = QueueState::kEnabled;
  std::optional<std::int64_t> max_walltime;  // seconds
  std::optional<int> max_queued;             // Queued + Held jobs
  ResourceRequest defaults;
};

void to_json(nlohmann::json& j, const ClusterQueue& q);
void from_json(const nlohmann::json& j, ClusterQueue& q);

struct ServerSettings {
  std::string server_name = "jms";
  double tick_interval_seconds = 1.0;
  std::string default_queue = "batch";
  double kill_grace_seconds = 5.0;
};

void to_json(nlohmann::json& j, const ServerSettings& s);
void from_json(const nlohmann::json& j, ServerSettings& s);

// What a caller hands to submit().
struct JobSpec {
  std::string name;
  std::string owner;
  ResourceRequest resources;  // resources.queue empty -> default queue
  std::string command;
  std::string working_dir;
  std::map<std::string, std::string> env;
};

enum class JobState { kQueued, kHeld, kRunning, kSuspended, kExited, kKilled };

std::string_view to_string(JobState s);
JobState job_state_from_string(std::string_view s);
inline bool is_terminal(JobState s) { return s == JobState::kExited || s == JobState::kKilled; }

struct ClusterJob {
  std::string id;  // "<seq>.<server>"
  std::uint64_t seq = 0;
  std::string name;
  std::string owner;
  std::string queue;
  ResourceRequest resources;
  std::string command;
  std::string working_dir;
  std::map<std::string, std::string> env;

  JobState state = JobState::kQueued;
  std::optional<int> exit_code;              // Exited only
  std::optional<TerminationReason> reason;   // Killed only
  std::optional<std::string> node;           // set from assignment onwards
  ResourcesUsed resources_used;
  std::optional<Timestamp> submitted;
  std::optional<Timestamp> started;
  std::optional<Timestamp> ended;
  std::string comment;

  // Exit status reported upstream: the exit code, or 271 when killed.
  int reported_exit() const { return state == JobState::kKilled ? kKilledExitCode : exit_code.value_or(0); }
};

void to_json(nlohmann::json& j, const ClusterJob& job);
void from_json(const nlohmann::json& j, ClusterJob& job);

struct ClusterSummary {
  int nodes_online = 0;
  int nodes_offline = 0;
  double utilization = 0.0;
  int jobs_running = 0;
  int jobs_queued = 0;
  std::uintmax_t disk_available_bytes = 0;
};

void to_json(nlohmann::json& j, const ClusterSummary& s);

struct Assignment {
  std::string job_id;
  std::string node;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

}  // namespace jms::cluster
