#include "jms/cluster/qstat.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "jms/common/error.hpp"

namespace jms::cluster {

namespace {

std::string kb(std::int64_t bytes) { return std::to_string((bytes + 1023) / 1024) + "kb"; }

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

char job_state_letter(JobState s) {
  switch (s) {
    case JobState::kQueued: return 'Q';
    case JobState::kHeld: return 'H';
    case JobState::kRunning: return 'R';
    case JobState::kSuspended: return 'S';
    case JobState::kExited:
    case JobState::kKilled: return 'C';
  }
  return 'Q';
}

std::string format_duration(double seconds) {
  auto total = static_cast<long long>(std::llround(std::max(0.0, seconds)));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", total / 3600, (total / 60) % 60, total % 60);
  return buf;
}

double parse_duration(const std::string& text) {
  long long h = 0, m = 0, s = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lld:%lld:%lld%c", &h, &m, &s, &tail) != 3) {
    throw Error(ErrorCode::kBadRequest, "bad duration: " + text);
  }
  return static_cast<double>(h * 3600 + m * 60 + s);
}

QstatRecord qstat_record(const ClusterJob& job, const ResourcesUsed& live) {
  QstatRecord r;
  const auto dot = job.id.find('.');
  const std::string server = dot == std::string::npos ? std::string("localhost") : job.id.substr(dot + 1);
  r["Job_Name"] = one_line(job.name);
  r["Job_Owner"] = one_line(job.owner) + "@" + server;
  r["job_state"] = std::string(1, job_state_letter(job.state));
  r["queue"] = job.queue;
  r["Resource_List.ncpus"] = std::to_string(job.resources.cores);
  r["Resource_List.mem"] = kb(job.resources.memory_bytes);
  r["Resource_List.walltime"] = format_duration(static_cast<double>(job.resources.walltime_seconds));
  if (job.node) {
    r["exec_host"] = *job.node + "/" + (job.resources.cores > 1 ? "0-" + std::to_string(job.resources.cores - 1) : "0");
  }
  if (job.started) {
    r["resources_used.cput"] = format_duration(live.cpu_seconds);
    r["resources_used.mem"] = kb(live.peak_memory_bytes);
    r["resources_used.walltime"] = format_duration(live.walltime_seconds);
  }
  if (is_terminal(job.state)) r["exit_status"] = std::to_string(job.reported_exit());
  std::string comment = job.comment;
  if (job.reason) comment = "Killed: " + std::string(to_string(*job.reason)) + (comment.empty() ? "" : "; " + comment);
  if (!comment.empty()) r["comment"] = one_line(comment);
  return r;
}

std::string format_qstat(const std::string& id, const QstatRecord& rec) {
  std::string out = "Job Id: " + id + "\n";
  for (const auto& [k, v] : rec) out += "    " + k + " = " + v + "\n";
  return out;
}

std::vector<std::pair<std::string, QstatRecord>> parse_qstat(const std::string& text) {
  std::vector<std::pair<std::string, QstatRecord>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line.rfind("Job Id: ", 0) == 0) {
      out.emplace_back(line.substr(8), QstatRecord{});
      continue;
    }
    const auto eq = line.find(" = ");
    const auto start = line.find_first_not_of(" \t");
    if (out.empty() || start == 0 || eq == std::string::npos || eq < start) {
      throw Error(ErrorCode::kBadRequest, "malformed qstat line " + std::to_string(line_no), {{"line", line_no}});
    }
    out.back().second[line.substr(start, eq - start)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace jms::cluster
