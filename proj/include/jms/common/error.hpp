#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace jms {

// Every failure the library reports carries one of these codes. The HTTP
// layer maps each code to exactly one status (see api/error_status.hpp).
enum class ErrorCode {
  // workflow-model
  kValidation,
  kMissingRequiredParameter,
  kUnknownParameter,
  kInvalidParameterValue,
  kMissingScript,
  kCorruptArchive,
  kInvalidManifest,
  kUnknownColumn,
  kRowArity,
  kEmptyFile,
  // dependency-engine
  kUnknownStage,
  kAlreadyTerminal,
  // cluster-executor
  kUnknownQueue,
  kQueueDisabled,
  kResourceLimitExceeded,
  kQueueFull,
  kInvalidTransition,
  kUnknownJob,
  kUnknownNode,
  kSpawnFailure,
  kNodeBusy,
  kQueueBusy,
  kDuplicateName,
  kDefaultQueueProtected,
  // job-orchestrator
  kPermissionDenied,
  kUpstreamIncomplete,
  kInvalidChange,
  kJobTerminal,
  kJobRunning,
  kRowError,
  // history-monitor
  kMissingBlob,
  kIoFailure,
  kDuplicateEvent,
  // api-service
  kInvalidCredentials,
  kAccountDisabled,
  kUnauthenticated,
  kNotFound,
  kBadRequest,
  kInternal,
};

inline constexpr std::size_t kErrorCodeCount = static_cast<std::size_t>(ErrorCode::kInternal) + 1;

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nullptr)
      : std::runtime_error(message), code_(code), details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace jms
