#include "jms/common/types.hpp"

#include "jms/common/error.hpp"

namespace jms {

void to_json(nlohmann::json& j, const ResourceRequest& r) {
  j = nlohmann::json{{"cores", r.cores},
                     {"memory", r.memory_bytes},
                     {"walltime", r.walltime_seconds},
                     {"queue", r.queue}};
}

void from_json(const nlohmann::json& j, ResourceRequest& r) {
  ResourceRequest d;
  r.cores = j.value("cores", d.cores);
  r.memory_bytes = j.value("memory", d.memory_bytes);
  r.walltime_seconds = j.value("walltime", d.walltime_seconds);
  r.queue = j.value("queue", std::string{});
}

std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::kWalltimeExceeded: return "WalltimeExceeded";
    case TerminationReason::kCanceled: return "Canceled";
    case TerminationReason::kNodeOffline: return "NodeOffline";
  }
  return "Canceled";
}

TerminationReason termination_reason_from_string(std::string_view s) {
  if (s == "WalltimeExceeded") return TerminationReason::kWalltimeExceeded;
  if (s == "Canceled") return TerminationReason::kCanceled;
  if (s == "NodeOffline") return TerminationReason::kNodeOffline;
  throw Error(ErrorCode::kBadRequest, "unknown termination reason: " + std::string(s));
}

void to_json(nlohmann::json& j, const ResourcesUsed& r) {
  j = nlohmann::json{{"cpu_seconds", r.cpu_seconds},
                     {"peak_memory_bytes", r.peak_memory_bytes},
                     {"walltime_seconds", r.walltime_seconds}};
}

void from_json(const nlohmann::json& j, ResourcesUsed& r) {
  r.cpu_seconds = j.value("cpu_seconds", 0.0);
  r.peak_memory_bytes = j.value("peak_memory_bytes", std::int64_t{0});
  r.walltime_seconds = j.value("walltime_seconds", 0.0);
}

}  // namespace jms
