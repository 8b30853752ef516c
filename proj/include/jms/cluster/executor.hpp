#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "jms/cluster/launcher.hpp"
#include "jms/cluster/qstat.hpp"
#include "jms/cluster/types.hpp"
#include "jms/common/clock.hpp"

namespace jms::cluster {

struct ExecutorOptions {
  const Clock* clock = nullptr;            // null: system clock
  std::shared_ptr<Launcher> launcher;      // null: ProcessLauncher
  std::filesystem::path state_file;        // empty: nothing persisted
  std::filesystem::path disk_path = ".";   // filesystem reported by summary()
  ServerSettings settings;                 // ignored when state_file already exists
};

// The embedded resource manager. All mutations happen under one lock;
// prologue and epilogue hooks always run without it, in the thread that
// called step(), so hooks may call back into the executor.
class Executor {
 public:
  using Hook = std::function<void(const ClusterJob&)>;

  explicit Executor(ExecutorOptions opts);
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  // Hooks fire once per job: prologue before the command starts, epilogue
  // after the job is final. A job canceled before it ever started gets
  // only the epilogue.
  void add_hooks(Hook prologue, Hook epilogue);

  // Throws kUnknownQueue, kQueueDisabled, kResourceLimitExceeded, kQueueFull.
  std::string submit(const JobSpec& spec, bool hold = false);

  // Throw kUnknownJob or kInvalidTransition; return the new state.
  JobState cancel(const std::string& id);
  JobState hold(const std::string& id);
  JobState release(const std::string& id);
  JobState suspend(const std::string& id);
  JobState resume(const std::string& id);

  ClusterJob job(const std::string& id) const;
  std::vector<ClusterJob> jobs() const;
  // Final usage for finished jobs; a live sample with elapsed walltime otherwise.
  ResourcesUsed usage(const std::string& id) const;
  QstatRecord query_status(const std::string& id) const;
  ClusterSummary summary() const;

  std::vector<Node> nodes() const;
  std::vector<ClusterQueue> queues() const;
  ServerSettings settings() const;

  void add_node(const std::string& name, int cores, std::int64_t memory_bytes);
  void set_node_state(const std::string& name, NodeState state);
  void remove_node(const std::string& name);
  void create_queue(const ClusterQueue& q);
  void set_queue(const ClusterQueue& q);
  void delete_queue(const std::string& name);
  void set_settings(const ServerSettings& s);

  // One scheduler iteration: collect exits, enforce walltime, assign and
  // start queued jobs, then run hooks. Returns the assignments made.
  std::vector<Assignment> step();
  std::uint64_t ticks() const;

  // Background loop stepping every tick interval and on every submit or exit.
  void start();
  void stop();

 private:
  ClusterJob& find_locked(const std::string& id);
  const ClusterJob& find_locked(const std::string& id) const;
  ClusterQueue* queue_locked(const std::string& name);
  void release_locked(ClusterJob& job);
  void finalize_exit_locked(const ExitReport& report, Timestamp now);
  void kill_locked(ClusterJob& job, TerminationReason reason, Timestamp now);
  void enforce_walltime_locked(Timestamp now);
  std::vector<Assignment> schedule_locked(Timestamp now);
  void start_job(const Assignment& a);
  void dispatch_epilogues();
  void persist_locked();
  void load_locked(const nlohmann::json& doc, Timestamp now);
  void kick();

  std::unique_ptr<Clock> owned_clock_;
  const Clock* clock_;
  std::shared_ptr<Launcher> launcher_;
  std::filesystem::path state_file_;
  std::filesystem::path disk_path_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  ServerSettings settings_;
  std::map<std::string, Node> nodes_;
  std::map<std::string, ClusterQueue> queues_;
  std::map<std::string, ClusterJob> jobs_;
  std::vector<std::string> order_;          // job ids in submit order
  std::set<std::string> launched_;          // jobs whose process is (or was) alive
  std::set<std::string> holding_;           // jobs currently charged to a node
  std::uint64_t next_seq_ = 1;
  std::uint64_t ticks_ = 0;
  std::vector<ExitReport> inbox_;
  std::deque<ClusterJob> epilogues_;
  std::vector<std::pair<Hook, Hook>> hooks_;

  std::mutex step_mu_;
  std::thread loop_;
  bool stop_ = false;
  bool kicked_ = false;
};

}  // namespace jms::cluster
