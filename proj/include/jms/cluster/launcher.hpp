#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "jms/common/clock.hpp"
#include "jms/common/types.hpp"

namespace jms::cluster {

struct LaunchRequest {
  std::string job_id;
  std::string command;
  std::string working_dir;
  std::map<std::string, std::string> env;
  std::string stdout_path;
  std::string stderr_path;
};

// Delivered once per launched job, from whatever thread noticed the exit.
struct ExitReport {
  std::string job_id;
  int exit_code = 0;  // 128 + signal when the process died of a signal
  ResourcesUsed usage;  // cpu and memory only; walltime is the executor's business
};

// Starts and signals job processes. Implementations must never call the
// exit sink while the caller of one of their methods is still inside it.
class Launcher {
 public:
  using ExitSink = std::function<void(ExitReport)>;

  virtual ~Launcher() = default;

  virtual void set_exit_sink(ExitSink sink) = 0;
  // Throws Error(kSpawnFailure).
  virtual void launch(const LaunchRequest& req) = 0;
  virtual void suspend(const std::string& job_id) = 0;
  virtual void resume(const std::string& job_id) = 0;
  // Polite termination, then force after `grace`.
  virtual void terminate(const std::string& job_id, std::chrono::milliseconds grace) = 0;
  // Live cpu/memory of a running job, if it is still alive.
  virtual std::optional<ResourcesUsed> sample(const std::string& job_id) = 0;
  // Called by the executor at the start of every step, outside its lock.
  virtual void pump() {}
  // Kills whatever is still running and stops delivering exits.
  virtual void shutdown() = 0;
};

// Runs each job as `/bin/sh -c <command>` in its own process group.
class ProcessLauncher final : public Launcher {
 public:
  ProcessLauncher() = default;
  ~ProcessLauncher() override;

  void set_exit_sink(ExitSink sink) override;
  void launch(const LaunchRequest& req) override;
  void suspend(const std::string& job_id) override;
  void resume(const std::string& job_id) override;
  void terminate(const std::string& job_id, std::chrono::milliseconds grace) override;
  std::optional<ResourcesUsed> sample(const std::string& job_id) override;
  void shutdown() override;

 private:
  struct Proc {
    int pid = 0;
    bool exited = false;
    bool kill_pending = false;
    std::chrono::steady_clock::time_point kill_deadline;
    std::int64_t peak_rss = 0;
  };

  void wait_for(std::string job_id, int pid);
  void reaper_loop();
  void signal_group(int pid, int sig);

  std::mutex mu_;
  std::condition_variable cv_;
  ExitSink sink_;
  std::map<std::string, Proc> procs_;
  std::vector<std::thread> waiters_;
  std::vector<std::thread::id> finished_;  // waiters done with their job, awaiting join
  std::thread reaper_;
  bool stopping_ = false;
};

// Deterministic stand-in driven by a Clock. Each launched job follows the
// behaviour chosen for it; terminations are delivered on the next pump().
class SimulatedLauncher final : public Launcher {
 public:
  struct Behavior {
    std::optional<std::chrono::milliseconds> duration;  // nullopt: runs until finish() or killed
    int exit_code = 0;
    double cpu_fraction = 1.0;  // cpu seconds per running second
    std::int64_t memory_bytes = 1 << 20;
  };
  using BehaviorFn = std::function<Behavior(const LaunchRequest&)>;

  explicit SimulatedLauncher(const Clock& clock, BehaviorFn behavior = {});

  void set_exit_sink(ExitSink sink) override;
  void launch(const LaunchRequest& req) override;
  void suspend(const std::string& job_id) override;
  void resume(const std::string& job_id) override;
  void terminate(const std::string& job_id, std::chrono::milliseconds grace) override;
  std::optional<ResourcesUsed> sample(const std::string& job_id) override;
  void pump() override;
  void shutdown() override;

  // Makes a running job exit with `code` on the next pump().
  void finish(const std::string& job_id, int code);
  // Makes the next launch of any job fail with kSpawnFailure.
  void fail_next_launch() { fail_next_ = true; }

  std::vector<LaunchRequest> launched() const;
  std::vector<std::string> terminated() const;
  bool is_suspended(const std::string& job_id) const;
  std::size_t live_count() const;

 private:
  struct Sim {
    LaunchRequest req;
    Behavior behavior;
    Timestamp started;
    double run_seconds = 0.0;  // accumulated while not suspended
    Timestamp last_update;
    bool suspended = false;
    std::optional<int> pending_exit;
  };

  void advance(Sim& s, Timestamp now) const;

  const Clock& clock_;
  BehaviorFn behavior_;
  mutable std::mutex mu_;
  ExitSink sink_;
  std::map<std::string, Sim> live_;
  std::vector<LaunchRequest> launched_;
  std::vector<std::string> terminated_;
  bool fail_next_ = false;
  bool stopped_ = false;
};

}  // namespace jms::cluster
