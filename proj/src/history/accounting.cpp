#include "jms/history/accounting.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "jms/common/error.hpp"

namespace jms::history {

using nlohmann::json;

void to_json(json& j, const AccountingRecord& r) {
  j = json{{"job_id", r.job_id},
           {"event", r.event == AccountingRecord::Event::kStart ? "start" : "end"},
           {"timestamp_ms", to_millis(r.timestamp)},
           {"node", r.node}};
  if (r.event == AccountingRecord::Event::kEnd) {
    j["outcome"] = r.outcome;
    j["exit_code"] = r.exit_code ? json(*r.exit_code) : json(nullptr);
    j["reason"] = r.reason ? json(to_string(*r.reason)) : json(nullptr);
    j["resources_used"] = r.resources_used;
    if (r.start_absent) j["start_absent"] = true;
  }
}

void from_json(const json& j, AccountingRecord& r) {
  r.job_id = j.at("job_id").get<std::string>();
  r.event = j.at("event").get<std::string>() == "start" ? AccountingRecord::Event::kStart : AccountingRecord::Event::kEnd;
  r.timestamp = from_millis(j.at("timestamp_ms").get<std::int64_t>());
  r.node = j.value("node", "");
  r.outcome = j.value("outcome", "");
  r.exit_code.reset();
  r.reason.reset();
  if (!j.value("exit_code", json(nullptr)).is_null()) r.exit_code = j.at("exit_code").get<int>();
  if (!j.value("reason", json(nullptr)).is_null()) r.reason = termination_reason_from_string(j.at("reason").get<std::string>());
  r.resources_used = j.value("resources_used", ResourcesUsed{});
  r.start_absent = j.value("start_absent", false);
}

AccountingLog::AccountingLog(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  for (const auto& r : records()) {
    (r.event == AccountingRecord::Event::kStart ? started_ : ended_).insert(r.job_id);
  }
}

void AccountingLog::record(const AccountingRecord& r) {
  std::lock_guard lock(mu_);
  const bool is_start = r.event == AccountingRecord::Event::kStart;
  if (is_start ? started_.count(r.job_id) : ended_.count(r.job_id)) {
    throw Error(ErrorCode::kDuplicateEvent,
                std::string("duplicate ") + (is_start ? "start" : "end") + " event for " + r.job_id,
                {{"job", r.job_id}});
  }
  if (is_start && ended_.count(r.job_id)) {
    throw Error(ErrorCode::kDuplicateEvent, "start after end for " + r.job_id, {{"job", r.job_id}});
  }
  if (!is_start && !started_.count(r.job_id) && !r.start_absent) {
    throw Error(ErrorCode::kDuplicateEvent, "end without start for " + r.job_id, {{"job", r.job_id}});
  }
  const std::string line = json(r).dump() + "\n";
  const int fd = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIoFailure, "cannot open " + file_.string() + ": " + std::strerror(errno));
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) {
      const int err = errno;
      ::close(fd);
      throw Error(ErrorCode::kIoFailure, "append failed for " + file_.string() + ": " + std::strerror(err));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  (is_start ? started_ : ended_).insert(r.job_id);
}

std::vector<AccountingRecord> AccountingLog::records() const {
  std::vector<AccountingRecord> out;
  std::ifstream in(file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // A torn final line from a crash is ignored.
    auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) continue;
    out.push_back(doc.get<AccountingRecord>());
  }
  return out;
}

std::vector<AccountingRecord> AccountingLog::records_for(const std::string& job_id) const {
  std::vector<AccountingRecord> out;
  for (auto& r : records()) {
    if (r.job_id == job_id) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace jms::history
