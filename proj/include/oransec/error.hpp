#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oransec {

// Closed set of failure codes shared by every module. The string form is the
// machine code surfaced by the CLI and the HTTP API, so values are stable.
enum class ErrorCode {
  // kb
  FileUnreadable,
  SchemaViolation,
  DuplicateTechniqueId,
  EmptyCorpus,
  EmptyIndex,
  UnknownTechniqueId,
  RemoteBackendUnavailable,
  // telemetry
  DuplicateTraceId,
  AllRecordsRejected,
  UnknownTraceId,
  InvalidWindow,
  UnknownUeId,
  // agent_core
  ProviderUnavailable,
  ScriptExhausted,
  UnknownRole,
  UnknownTool,
  InvalidToolParams,
  MutatingToolNotAllowed,
  // ran_control
  EmptyChangeSet,
  UnknownPath,
  InvariantViolation,
  AlreadyDecided,
  UnknownApprovalId,
  VersionConflict,
  NotApproved,
  VerificationMismatch,
  ApplyFailed,
  // pipeline
  PlanValidationError,
  IllegalTransition,
  UnknownIncident,
  EscalatedConfigurationError,
  // evalkit
  ScenarioFixtureMissing,
  MissingScenarioDefinition,
  EmptyRecords,
  // service / cli
  InvalidRequest,
  InvalidConfig,
  NotFound,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace oransec
