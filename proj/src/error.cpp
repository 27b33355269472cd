#include "oransec/error.hpp"

namespace oransec {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileUnreadable: return "FILE_UNREADABLE";
    case ErrorCode::SchemaViolation: return "SCHEMA_VIOLATION";
    case ErrorCode::DuplicateTechniqueId: return "DUPLICATE_TECHNIQUE_ID";
    case ErrorCode::EmptyCorpus: return "EMPTY_CORPUS";
    case ErrorCode::EmptyIndex: return "EMPTY_INDEX";
    case ErrorCode::UnknownTechniqueId: return "UNKNOWN_TECHNIQUE_ID";
    case ErrorCode::RemoteBackendUnavailable: return "REMOTE_BACKEND_UNAVAILABLE";
    case ErrorCode::DuplicateTraceId: return "DUPLICATE_TRACE_ID";
    case ErrorCode::AllRecordsRejected: return "ALL_RECORDS_REJECTED";
    case ErrorCode::UnknownTraceId: return "UNKNOWN_TRACE_ID";
    case ErrorCode::InvalidWindow: return "INVALID_WINDOW";
    case ErrorCode::UnknownUeId: return "UNKNOWN_UE_ID";
    case ErrorCode::ProviderUnavailable: return "PROVIDER_UNAVAILABLE";
    case ErrorCode::ScriptExhausted: return "SCRIPT_EXHAUSTED";
    case ErrorCode::UnknownRole: return "UNKNOWN_ROLE";
    case ErrorCode::UnknownTool: return "UNKNOWN_TOOL";
    case ErrorCode::InvalidToolParams: return "INVALID_TOOL_PARAMS";
    case ErrorCode::MutatingToolNotAllowed: return "MUTATING_TOOL_NOT_ALLOWED";
    case ErrorCode::EmptyChangeSet: return "EMPTY_CHANGE_SET";
    case ErrorCode::UnknownPath: return "UNKNOWN_PATH";
    case ErrorCode::InvariantViolation: return "INVARIANT_VIOLATION";
    case ErrorCode::AlreadyDecided: return "ALREADY_DECIDED";
    case ErrorCode::UnknownApprovalId: return "UNKNOWN_APPROVAL";
    case ErrorCode::VersionConflict: return "VERSION_CONFLICT";
    case ErrorCode::NotApproved: return "NOT_APPROVED";
    case ErrorCode::VerificationMismatch: return "VERIFICATION_MISMATCH";
    case ErrorCode::ApplyFailed: return "APPLY_FAILED";
    case ErrorCode::PlanValidationError: return "PLAN_VALIDATION_ERROR";
    case ErrorCode::IllegalTransition: return "ILLEGAL_TRANSITION";
    case ErrorCode::UnknownIncident: return "UNKNOWN_INCIDENT";
    case ErrorCode::EscalatedConfigurationError: return "ESCALATED_CONFIGURATION_ERROR";
    case ErrorCode::ScenarioFixtureMissing: return "SCENARIO_FIXTURE_MISSING";
    case ErrorCode::MissingScenarioDefinition: return "MISSING_SCENARIO_DEFINITION";
    case ErrorCode::EmptyRecords: return "EMPTY_RECORDS";
    case ErrorCode::InvalidRequest: return "INVALID_REQUEST";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

}  // namespace oransec
