#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oransec/tools.hpp"
#include "oransec/util.hpp"

namespace oransec::agent {

// Completions above this size are rejected before any parsing.
inline constexpr std::size_t kMaxCompletionBytes = 64 * 1024;

enum class GuardrailStage { sanitize, schema, whitelist };

std::string_view to_string(GuardrailStage s) noexcept;

struct GuardrailVerdict {
  GuardrailStage stage = GuardrailStage::sanitize;
  bool passed = false;
  std::optional<std::string> violation;
  bool repaired = false;  // only ever true when passed
  std::vector<std::string> dropped_keys;
};

Json to_json(const GuardrailVerdict& v);
GuardrailVerdict verdict_from_json(const Json& j);

struct SanitizeResult {
  std::optional<Json> payload;
  GuardrailVerdict verdict;
};

// Trims whitespace, removes one enclosing ``` fence, cuts the first balanced
// {...} object (string-aware) and parses it.
SanitizeResult sanitize_completion(std::string_view raw,
                                   std::size_t max_bytes = kMaxCompletionBytes);

enum class FieldType { String, NonEmptyString, StringList, Object, Array, Boolean, Enum };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::String;
  bool required = true;
  std::vector<std::string> allowed;  // Enum only
};

// Per-agent shape of the `final` object plus an optional semantic check that
// runs after the structural one.
struct FinalSchema {
  std::string name;
  std::vector<FieldSpec> fields;
  std::function<std::optional<std::string>(const Json&)> extra_check;
};

struct ToolCall {
  std::string tool_name;
  Json params = Json::object();
};

struct FinalAnswer {
  Json payload = Json::object();
};

struct ParsedAction {
  std::string thought;
  bool is_final = false;
  ToolCall call;
  FinalAnswer final;
};

struct SchemaCheck {
  GuardrailVerdict verdict;
  std::optional<ParsedAction> action;
};

// Schema stage then whitelist stage; returns the verdict of the first stage
// that fails, or a passing whitelist verdict. Unknown keys are dropped.
SchemaCheck validate_against_schema(Json payload, const ToolRegistry& registry, AgentRole role,
                                    const FinalSchema& final_schema);

}  // namespace oransec::agent
