#include "jms/history/poller.hpp"

#include <cstdio>
#include <iostream>

#include "jms/common/error.hpp"

namespace jms::history {

ResourcesUsed resources_from_qstat(const cluster::QstatRecord& rec) {
  ResourcesUsed u;
  if (auto it = rec.find("resources_used.cput"); it != rec.end()) u.cpu_seconds = cluster::parse_duration(it->second);
  if (auto it = rec.find("resources_used.walltime"); it != rec.end()) u.walltime_seconds = cluster::parse_duration(it->second);
  if (auto it = rec.find("resources_used.mem"); it != rec.end()) {
    long long kb = 0;
    if (std::sscanf(it->second.c_str(), "%lldkb", &kb) == 1) u.peak_memory_bytes = kb * 1024;
  }
  return u;
}

Poller::Poller(cluster::Executor& executor, cluster::ResourceManagerAdapter& adapter, const Clock& clock, Sink sink)
    : executor_(executor), adapter_(adapter), clock_(clock), sink_(std::move(sink)) {}

Poller::~Poller() { stop(); }

int Poller::poll_once() {
  int refreshed = 0;
  for (const auto& job : executor_.jobs()) {
    if (job.state != cluster::JobState::kRunning && job.state != cluster::JobState::kSuspended) continue;
    try {
      auto rec = adapter_.status(job.id);
      if (rec.at("job_state") != "R" && rec.at("job_state") != "S") continue;
      if (sink_(job.id, resources_from_qstat(rec), clock_.now())) ++refreshed;
    } catch (const std::exception& e) {
      std::cerr << "poller: skipping " << job.id << ": " << e.what() << "\n";
    }
  }
  return refreshed;
}

void Poller::start(std::chrono::milliseconds interval) {
  std::lock_guard lock(mu_);
  interval_ = interval;
  if (thread_.joinable()) return;
  stop_ = false;
  thread_ = std::thread([this] {
    std::unique_lock lock(mu_);
    while (!stop_) {
      cv_.wait_for(lock, interval_, [&] { return stop_; });
      if (stop_) return;
      lock.unlock();
      poll_once();
      lock.lock();
    }
  });
}

void Poller::stop() {
  std::thread t;
  {
    std::lock_guard lock(mu_);
    stop_ = true;
    t.swap(thread_);
  }
  cv_.notify_all();
  if (t.joinable()) t.join();
}

void Poller::set_interval(std::chrono::milliseconds interval) {
  if (interval.count() <= 0) throw Error(ErrorCode::kBadRequest, "poll interval must be positive");
  {
    std::lock_guard lock(mu_);
    interval_ = interval;
  }
  cv_.notify_all();
}

std::chrono::milliseconds Poller::interval() const {
  std::lock_guard lock(mu_);
  return interval_;
}

}  // namespace jms::history
