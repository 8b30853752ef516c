#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jms/cluster/launcher.hpp"
#include "jms/common/error.hpp"

extern char** environ;

namespace jms::cluster {

namespace {

// Sums cpu and resident memory over every live process in group `pgid`.
std::optional<ResourcesUsed> sample_group(int pgid) {
  static const long ticks = ::sysconf(_SC_CLK_TCK);
  static const long page = ::sysconf(_SC_PAGESIZE);
  ResourcesUsed u;
  bool any = false;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator("/proc", ec)) {
    const std::string pid = entry.path().filename().string();
    if (pid.empty() || pid.find_first_not_of("0123456789") != std::string::npos) continue;
    std::ifstream in(entry.path() / "stat");
    std::string line;
    if (!std::getline(in, line)) continue;
    const auto close = line.rfind(')');
    if (close == std::string::npos) continue;
    std::istringstream fields(line.substr(close + 2));
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    // f[0] is field 3 (state); pgrp is field 5, utime..cstime 14..17, rss 24.
    if (f.size() < 22 || std::stol(f[2]) != pgid) continue;
    any = true;
    const double t = std::stod(f[11]) + std::stod(f[12]) + std::stod(f[13]) + std::stod(f[14]);
    u.cpu_seconds += t / static_cast<double>(ticks);
    u.peak_memory_bytes += std::stoll(f[21]) * page;
  }
  if (!any) return std::nullopt;
  return u;
}

}  // namespace

ProcessLauncher::~ProcessLauncher() { shutdown(); }

void ProcessLauncher::set_exit_sink(ExitSink sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

void ProcessLauncher::signal_group(int pid, int sig) {
  if (::kill(-pid, sig) != 0 && errno == ESRCH) ::kill(pid, sig);
}

void ProcessLauncher::launch(const LaunchRequest& req) {
  const int out = ::open(req.stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (out < 0) throw Error(ErrorCode::kSpawnFailure, "cannot open " + req.stdout_path + ": " + std::strerror(errno));
  const int err = ::open(req.stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (err < 0) {
    const int saved = errno;
    ::close(out);
    throw Error(ErrorCode::kSpawnFailure, "cannot open " + req.stderr_path + ": " + std::strerror(saved));
  }

  // Everything the child touches is prepared before fork.
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : req.env) env[k] = v;
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::string sh = "/bin/sh", dash_c = "-c", cmd = req.command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  const std::string chdir_msg = "jms: cannot enter working directory " + req.working_dir + "\n";

  std::lock_guard lock(mu_);
  if (stopping_) {
    ::close(out);
    ::close(err);
    throw Error(ErrorCode::kSpawnFailure, "launcher is shut down");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    const int saved = errno;
    ::close(out);
    ::close(err);
    throw Error(ErrorCode::kSpawnFailure, std::string("fork failed: ") + std::strerror(saved));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    sigset_t none;
    sigemptyset(&none);
    ::sigprocmask(SIG_SETMASK, &none, nullptr);
    ::signal(SIGPIPE, SIG_DFL);
    ::dup2(out, STDOUT_FILENO);
    ::dup2(err, STDERR_FILENO);
    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (!req.working_dir.empty() && ::chdir(req.working_dir.c_str()) != 0) {
      [[maybe_unused]] auto n = ::write(STDERR_FILENO, chdir_msg.data(), chdir_msg.size());
      ::_exit(127);
    }
    ::execve(argv[0], argv, envp.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(out);
  ::close(err);
  procs_[req.job_id] = Proc{pid, false, false, {}, 0};
  for (auto it = waiters_.begin(); it != waiters_.end();) {
    if (std::find(finished_.begin(), finished_.end(), it->get_id()) == finished_.end()) {
      ++it;
      continue;
    }
    finished_.erase(std::find(finished_.begin(), finished_.end(), it->get_id()));
    it->join();
    it = waiters_.erase(it);
  }
  waiters_.emplace_back(&ProcessLauncher::wait_for, this, req.job_id, static_cast<int>(pid));
}

void ProcessLauncher::wait_for(std::string job_id, int pid) {
  int status = 0;
  struct rusage ru {};
  while (::wait4(pid, &status, 0, &ru) < 0 && errno == EINTR) {
  }
  ExitReport report;
  report.job_id = job_id;
  if (WIFEXITED(status)) {
    report.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    report.exit_code = 128 + WTERMSIG(status);
  }
  report.usage.cpu_seconds = static_cast<double>(ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) +
                             static_cast<double>(ru.ru_utime.tv_usec + ru.ru_stime.tv_usec) / 1e6;
  report.usage.peak_memory_bytes = static_cast<std::int64_t>(ru.ru_maxrss) * 1024;

  ExitSink sink;
  {
    std::lock_guard lock(mu_);
    // Stragglers left in the group die with the job.
    ::kill(-pid, SIGKILL);
    auto it = procs_.find(job_id);
    if (it != procs_.end()) {
      report.usage.peak_memory_bytes = std::max(report.usage.peak_memory_bytes, it->second.peak_rss);
      procs_.erase(it);
    }
    if (!stopping_) sink = sink_;
  }
  cv_.notify_all();
  if (sink) sink(std::move(report));
  std::lock_guard lock(mu_);
  finished_.push_back(std::this_thread::get_id());
}

void ProcessLauncher::suspend(const std::string& job_id) {
  std::lock_guard lock(mu_);
  auto it = procs_.find(job_id);
  if (it != procs_.end()) signal_group(it->second.pid, SIGSTOP);
}

void ProcessLauncher::resume(const std::string& job_id) {
  std::lock_guard lock(mu_);
  auto it = procs_.find(job_id);
  if (it != procs_.end()) signal_group(it->second.pid, SIGCONT);
}

void ProcessLauncher::terminate(const std::string& job_id, std::chrono::milliseconds grace) {
  std::lock_guard lock(mu_);
  auto it = procs_.find(job_id);
  if (it == procs_.end()) return;
  if (grace.count() <= 0) {
    signal_group(it->second.pid, SIGKILL);
    return;
  }
  signal_group(it->second.pid, SIGTERM);
  signal_group(it->second.pid, SIGCONT);
  it->second.kill_pending = true;
  it->second.kill_deadline = std::chrono::steady_clock::now() + grace;
  if (!reaper_.joinable()) reaper_ = std::thread(&ProcessLauncher::reaper_loop, this);
  cv_.notify_all();
}

void ProcessLauncher::reaper_loop() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    auto next = std::chrono::steady_clock::time_point::max();
    const auto now = std::chrono::steady_clock::now();
    for (auto& [id, p] : procs_) {
      if (!p.kill_pending) continue;
      if (p.kill_deadline <= now) {
        signal_group(p.pid, SIGKILL);
        p.kill_pending = false;
      } else {
        next = std::min(next, p.kill_deadline);
      }
    }
    if (next == std::chrono::steady_clock::time_point::max()) {
      cv_.wait(lock);
    } else {
      cv_.wait_until(lock, next);
    }
  }
}

std::optional<ResourcesUsed> ProcessLauncher::sample(const std::string& job_id) {
  int pid = 0;
  {
    std::lock_guard lock(mu_);
    auto it = procs_.find(job_id);
    if (it == procs_.end()) return std::nullopt;
    pid = it->second.pid;
  }
  auto u = sample_group(pid);
  if (!u) return std::nullopt;
  std::lock_guard lock(mu_);
  auto it = procs_.find(job_id);
  if (it != procs_.end()) {
    it->second.peak_rss = std::max(it->second.peak_rss, u->peak_memory_bytes);
    u->peak_memory_bytes = it->second.peak_rss;
  }
  return u;
}

void ProcessLauncher::shutdown() {
  std::vector<std::thread> waiters;
  std::thread reaper;
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    for (auto& [id, p] : procs_) {
      signal_group(p.pid, SIGKILL);
      signal_group(p.pid, SIGCONT);
    }
    waiters.swap(waiters_);
    reaper.swap(reaper_);
  }
  cv_.notify_all();
  for (auto& t : waiters) t.join();
  if (reaper.joinable()) reaper.join();
}

}  // namespace jms::cluster
