#include "jms/common/error.hpp"

namespace jms {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation: return "Validation";
    case ErrorCode::kMissingRequiredParameter: return "MissingRequiredParameter";
    case ErrorCode::kUnknownParameter: return "UnknownParameter";
    case ErrorCode::kInvalidParameterValue: return "InvalidParameterValue";
    case ErrorCode::kMissingScript: return "MissingScript";
    case ErrorCode::kCorruptArchive: return "CorruptArchive";
    case ErrorCode::kInvalidManifest: return "InvalidManifest";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kRowArity: return "RowArity";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kUnknownStage: return "UnknownStage";
    case ErrorCode::kAlreadyTerminal: return "AlreadyTerminal";
    case ErrorCode::kUnknownQueue: return "UnknownQueue";
    case ErrorCode::kQueueDisabled: return "QueueDisabled";
    case ErrorCode::kResourceLimitExceeded: return "ResourceLimitExceeded";
    case ErrorCode::kQueueFull: return "QueueFull";
    case ErrorCode::kInvalidTransition: return "InvalidTransition";
    case ErrorCode::kUnknownJob: return "UnknownJob";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kSpawnFailure: return "SpawnFailure";
    case ErrorCode::kNodeBusy: return "NodeBusy";
    case ErrorCode::kQueueBusy: return "QueueBusy";
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kDefaultQueueProtected: return "DefaultQueueProtected";
    case ErrorCode::kPermissionDenied: return "PermissionDenied";
    case ErrorCode::kUpstreamIncomplete: return "UpstreamIncomplete";
    case ErrorCode::kInvalidChange: return "InvalidChange";
    case ErrorCode::kJobTerminal: return "JobTerminal";
    case ErrorCode::kJobRunning: return "JobRunning";
    case ErrorCode::kRowError: return "RowError";
    case ErrorCode::kMissingBlob: return "MissingBlob";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kDuplicateEvent: return "DuplicateEvent";
    case ErrorCode::kInvalidCredentials: return "InvalidCredentials";
    case ErrorCode::kAccountDisabled: return "AccountDisabled";
    case ErrorCode::kUnauthenticated: return "Unauthenticated";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kBadRequest: return "BadRequest";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

}  // namespace jms
