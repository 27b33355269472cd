#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "oransec/guardrails.hpp"
#include "oransec/tools.hpp"
#include "oransec/util.hpp"

namespace oransec::agent {

// Provider turns per loop; each turn may add one repair turn.
inline constexpr int kMaxIterations = 5;

struct CompletionRequest {
  std::string prompt;
  std::vector<std::string> context_documents;
  std::string scenario_id;
  AgentRole role = AgentRole::analysis;
  int step_index = 1;  // 1-based provider-call ordinal within one loop
  bool repair = false;
};

// Must tolerate concurrent calls from independent loops.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  // Throws Error{ProviderUnavailable} or Error{ScriptExhausted}.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Replays canned completions keyed by "<scenario_id>/<role>/<step_index>".
class ScriptedProvider final : public CompletionProvider {
 public:
  ScriptedProvider() = default;
  explicit ScriptedProvider(std::map<std::string, std::string> script);
  ScriptedProvider(const ScriptedProvider& other);
  ScriptedProvider(ScriptedProvider&& other) noexcept;
  ScriptedProvider& operator=(ScriptedProvider other) noexcept;

  static ScriptedProvider from_json(const Json& doc);
  static ScriptedProvider load(const std::filesystem::path& path);

  static std::string key(std::string_view scenario_id, AgentRole role, int step_index);

  void set(const std::string& key, std::string completion);
  void merge(const ScriptedProvider& other);
  std::size_t size() const;

  std::string complete(const CompletionRequest& request) override;
  std::string name() const override { return "scripted"; }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> script_;
};

// Role preambles with few-shot exemplars. The built-in set covers all roles;
// a library missing a role raises UnknownRole at render time.
class PromptLibrary {
 public:
  static PromptLibrary builtin();
  void set(AgentRole role, std::string preamble);
  const std::string& preamble(AgentRole role) const;

 private:
  std::map<AgentRole, std::string> preambles_;
};

struct TaskContext {
  std::string incident_id;
  std::string scenario_id;
  std::string task;
  std::vector<std::string> documents;
};

struct ReactStep {
  int index = 1;
  std::string thought;
  std::variant<ToolCall, FinalAnswer> action;
  std::optional<std::string> observation;  // absent on the final step

  bool is_final() const { return std::holds_alternative<FinalAnswer>(action); }
};

enum class LoopOutcome { final_answer, iteration_limit, guardrail_abort, provider_failure };

std::string_view to_string(LoopOutcome o) noexcept;

struct ProviderCall {
  int index = 1;
  bool repair = false;
  std::string completion;
};

struct AgentTranscript {
  std::string transcript_id;
  AgentRole role = AgentRole::analysis;
  std::string incident_id;
  std::string scenario_id;
  std::vector<ReactStep> steps;
  LoopOutcome outcome = LoopOutcome::provider_failure;
  std::optional<std::string> failure_detail;
  std::vector<ProviderCall> provider_calls;
  std::vector<GuardrailVerdict> guardrail_log;
  std::vector<std::string> tools_executed;
  double wall_clock_ms = 0.0;

  const Json* final_payload() const;
};

// One line per ReactStep followed by a terminal summary line.
std::string transcript_to_jsonl(const AgentTranscript& t, bool include_wall_clock = true);
AgentTranscript transcript_from_jsonl(std::string_view jsonl);
Json to_json(const AgentTranscript& t);
AgentTranscript transcript_from_json(const Json& j);

// Script that reproduces `t` when replayed through run_react_loop.
ScriptedProvider script_from_transcript(const AgentTranscript& t);

std::string render_prompt(const PromptLibrary& prompts, const ToolRegistry& registry, AgentRole role,
                          const TaskContext& context, const std::vector<ReactStep>& steps);

std::string render_repair_prompt(const std::string& prompt, std::string_view rejected,
                                 const GuardrailVerdict& verdict);

struct LoopConfig {
  AgentRole role = AgentRole::analysis;
  FinalSchema final_schema;
  std::string transcript_id;
};

AgentTranscript run_react_loop(const LoopConfig& config, CompletionProvider& provider,
                               const ToolRegistry& registry, const PromptLibrary& prompts,
                               const TaskContext& context);

}  // namespace oransec::agent
