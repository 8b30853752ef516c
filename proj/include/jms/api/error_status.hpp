#pragma once

#include <array>
#include <utility>

#include "jms/common/error.hpp"

namespace jms::api {

// One HTTP status per error code. Kept as data so a test can prove the
// table is exhaustive and unambiguous.
inline constexpr std::array<std::pair<ErrorCode, int>, kErrorCodeCount> kErrorStatus{{
    {ErrorCode::kValidation, 400},
    {ErrorCode::kMissingRequiredParameter, 400},
    {ErrorCode::kUnknownParameter, 400},
    {ErrorCode::kInvalidParameterValue, 400},
    {ErrorCode::kMissingScript, 400},
    {ErrorCode::kCorruptArchive, 400},
    {ErrorCode::kInvalidManifest, 400},
    {ErrorCode::kUnknownColumn, 400},
    {ErrorCode::kRowArity, 400},
    {ErrorCode::kEmptyFile, 400},
    {ErrorCode::kUnknownStage, 404},
    {ErrorCode::kAlreadyTerminal, 409},
    {ErrorCode::kUnknownQueue, 404},
    {ErrorCode::kQueueDisabled, 409},
    {ErrorCode::kResourceLimitExceeded, 400},
    {ErrorCode::kQueueFull, 409},
    {ErrorCode::kInvalidTransition, 409},
    {ErrorCode::kUnknownJob, 404},
    {ErrorCode::kUnknownNode, 404},
    {ErrorCode::kSpawnFailure, 500},
    {ErrorCode::kNodeBusy, 409},
    {ErrorCode::kQueueBusy, 409},
    {ErrorCode::kDuplicateName, 409},
    {ErrorCode::kDefaultQueueProtected, 409},
    {ErrorCode::kPermissionDenied, 403},
    {ErrorCode::kUpstreamIncomplete, 409},
    {ErrorCode::kInvalidChange, 400},
    {ErrorCode::kJobTerminal, 409},
    {ErrorCode::kJobRunning, 409},
    {ErrorCode::kRowError, 400},
    {ErrorCode::kMissingBlob, 500},
    {ErrorCode::kIoFailure, 500},
    {ErrorCode::kDuplicateEvent, 409},
    {ErrorCode::kInvalidCredentials, 401},
    {ErrorCode::kAccountDisabled, 403},
    {ErrorCode::kUnauthenticated, 401},
    {ErrorCode::kNotFound, 404},
    {ErrorCode::kBadRequest, 400},
    {ErrorCode::kInternal, 500},
}};

constexpr int http_status(ErrorCode code) {
  for (const auto& [c, status] : kErrorStatus) {
    if (c == code) return status;
  }
  return 500;
}

}  // namespace jms::api
