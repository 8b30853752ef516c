#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace jms {

// Resources requested for one cluster job. An empty queue means "the
// server's default queue".
struct ResourceRequest {
  int cores = 1;
  std::int64_t memory_bytes = 256LL << 20;
  std::int64_t walltime_seconds = 3600;
  std::string queue;

  friend bool operator==(const ResourceRequest&, const ResourceRequest&) = default;
};

void to_json(nlohmann::json& j, const ResourceRequest& r);
void from_json(const nlohmann::json& j, ResourceRequest& r);

enum class TerminationReason { kWalltimeExceeded, kCanceled, kNodeOffline };

std::string_view to_string(TerminationReason r);
TerminationReason termination_reason_from_string(std::string_view s);

// Exit status reported upstream for killed jobs: 256 + SIGTERM.
inline constexpr int kKilledExitCode = 271;

struct ResourcesUsed {
  double cpu_seconds = 0.0;
  std::int64_t peak_memory_bytes = 0;
  double walltime_seconds = 0.0;

  friend bool operator==(const ResourcesUsed&, const ResourcesUsed&) = default;
};

void to_json(nlohmann::json& j, const ResourcesUsed& r);
void from_json(const nlohmann::json& j, ResourcesUsed& r);

// Who is asking. Admins implicitly hold every permission.
struct Requester {
  std::string username;
  bool is_admin = false;
  std::vector<std::string> groups;
};

}  // namespace jms
