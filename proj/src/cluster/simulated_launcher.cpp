#include "jms/cluster/launcher.hpp"
#include "jms/common/error.hpp"

namespace jms::cluster {

SimulatedLauncher::SimulatedLauncher(const Clock& clock, BehaviorFn behavior)
    : clock_(clock), behavior_(std::move(behavior)) {}

void SimulatedLauncher::set_exit_sink(ExitSink sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

void SimulatedLauncher::launch(const LaunchRequest& req) {
  std::lock_guard lock(mu_);
  if (fail_next_ || stopped_) {
    fail_next_ = false;
    throw Error(ErrorCode::kSpawnFailure, "simulated spawn failure for " + req.job_id);
  }
  const auto now = clock_.now();
  Sim s{req, behavior_ ? behavior_(req) : Behavior{}, now, 0.0, now, false, std::nullopt};
  live_[req.job_id] = std::move(s);
  launched_.push_back(req);
}

void SimulatedLauncher::advance(Sim& s, Timestamp now) const {
  if (!s.suspended) s.run_seconds += seconds_between(s.last_update, now);
  s.last_update = now;
}

void SimulatedLauncher::suspend(const std::string& job_id) {
  std::lock_guard lock(mu_);
  auto it = live_.find(job_id);
  if (it == live_.end()) return;
  advance(it->second, clock_.now());
  it->second.suspended = true;
}

void SimulatedLauncher::resume(const std::string& job_id) {
  std::lock_guard lock(mu_);
  auto it = live_.find(job_id);
  if (it == live_.end()) return;
  advance(it->second, clock_.now());
  it->second.suspended = false;
}

void SimulatedLauncher::terminate(const std::string& job_id, std::chrono::milliseconds) {
  std::lock_guard lock(mu_);
  auto it = live_.find(job_id);
  if (it == live_.end()) return;
  terminated_.push_back(job_id);
  if (!it->second.pending_exit) it->second.pending_exit = 128 + 15;
}

void SimulatedLauncher::finish(const std::string& job_id, int code) {
  std::lock_guard lock(mu_);
  auto it = live_.find(job_id);
  if (it != live_.end() && !it->second.pending_exit) it->second.pending_exit = code;
}

std::optional<ResourcesUsed> SimulatedLauncher::sample(const std::string& job_id) {
  std::lock_guard lock(mu_);
  auto it = live_.find(job_id);
  if (it == live_.end()) return std::nullopt;
  advance(it->second, clock_.now());
  return ResourcesUsed{it->second.run_seconds * it->second.behavior.cpu_fraction, it->second.behavior.memory_bytes, 0.0};
}

void SimulatedLauncher::pump() {
  std::vector<ExitReport> reports;
  ExitSink sink;
  {
    std::lock_guard lock(mu_);
    if (stopped_) return;
    const auto now = clock_.now();
    for (auto it = live_.begin(); it != live_.end();) {
      Sim& s = it->second;
      advance(s, now);
      std::optional<int> code = s.pending_exit;
      if (!code && s.behavior.duration &&
          s.run_seconds * 1000.0 >= static_cast<double>(s.behavior.duration->count())) {
        code = s.behavior.exit_code;
      }
      if (!code) {
        ++it;
        continue;
      }
      reports.push_back(ExitReport{it->first, *code, {s.run_seconds * s.behavior.cpu_fraction, s.behavior.memory_bytes, 0.0}});
      it = live_.erase(it);
    }
    sink = sink_;
  }
  if (!sink) return;
  for (auto& r : reports) sink(std::move(r));
}

void SimulatedLauncher::shutdown() {
  std::lock_guard lock(mu_);
  stopped_ = true;
  live_.clear();
}

std::vector<LaunchRequest> SimulatedLauncher::launched() const {
  std::lock_guard lock(mu_);
  return launched_;
}

std::vector<std::string> SimulatedLauncher::terminated() const {
  std::lock_guard lock(mu_);
  return terminated_;
}

bool SimulatedLauncher::is_suspended(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  auto it = live_.find(job_id);
  return it != live_.end() && it->second.suspended;
}

std::size_t SimulatedLauncher::live_count() const {
  std::lock_guard lock(mu_);
  return live_.size();
}

}  // namespace jms::cluster
