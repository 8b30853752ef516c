#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "jms/cluster/adapter.hpp"
#include "jms/cluster/executor.hpp"
#include "jms/common/clock.hpp"
#include "jms/common/types.hpp"

namespace jms::history {

inline constexpr std::chrono::milliseconds kDefaultPollInterval{30'000};

// Periodically reads `qstat -f` status for every running cluster job and
// hands the resources_used figures to `sink`, which touches nothing else.
class Poller {
 public:
  // Returns true when a record was refreshed.
  using Sink = std::function<bool(const std::string& cluster_id, const ResourcesUsed& used, Timestamp at)>;

  Poller(cluster::Executor& executor, cluster::ResourceManagerAdapter& adapter, const Clock& clock, Sink sink);
  ~Poller();

  int poll_once();
  void start(std::chrono::milliseconds interval = kDefaultPollInterval);
  void stop();
  void set_interval(std::chrono::milliseconds interval);
  std::chrono::milliseconds interval() const;

 private:
  cluster::Executor& executor_;
  cluster::ResourceManagerAdapter& adapter_;
  const Clock& clock_;
  Sink sink_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::chrono::milliseconds interval_ = kDefaultPollInterval;
  std::thread thread_;
  bool stop_ = false;
};

// Parses resources_used.* attributes out of a qstat record.
ResourcesUsed resources_from_qstat(const cluster::QstatRecord& rec);

}  // namespace jms::history
