#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jms/common/clock.hpp"
#include "jms/common/types.hpp"

namespace jms::history {

struct AccountingRecord {
  enum class Event { kStart, kEnd };

  std::string job_id;  // cluster job id
  Event event = Event::kStart;
  Timestamp timestamp;
  std::string node;
  // End only.
  std::string outcome;  // "Exited" or "Killed"
  std::optional<int> exit_code;
  std::optional<TerminationReason> reason;
  ResourcesUsed resources_used;
  bool start_absent = false;  // End for a job that never started

  friend bool operator==(const AccountingRecord&, const AccountingRecord&) = default;
};

void to_json(nlohmann::json& j, const AccountingRecord& r);
void from_json(const nlohmann::json& j, AccountingRecord& r);

// Append-only JSON-lines log. At most one Start and one End per job id;
// an End without a Start is accepted only when flagged start_absent.
class AccountingLog {
 public:
  explicit AccountingLog(std::filesystem::path file);

  // Throws kDuplicateEvent; nothing is written in that case.
  void record(const AccountingRecord& r);
  std::vector<AccountingRecord> records() const;
  std::vector<AccountingRecord> records_for(const std::string& job_id) const;

 private:
  std::filesystem::path file_;
  mutable std::mutex mu_;
  std::set<std::string> started_;
  std::set<std::string> ended_;
};

}  // namespace jms::history
