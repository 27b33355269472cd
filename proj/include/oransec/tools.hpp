#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oransec/util.hpp"

namespace oransec::agent {

enum class AgentRole { analysis, classification, response };

std::string_view to_string(AgentRole role) noexcept;
// Throws Error{UnknownRole}.
AgentRole parse_role(std::string_view s);

enum class ParamType { String, Integer, Boolean, Object, Array, Timestamp, TechniqueId };

std::string_view to_string(ParamType t) noexcept;

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::String;
  bool required = true;
  std::string description;
  // Optional domain check run after the type check; returns a violation.
  std::function<std::optional<std::string>(const Json&)> check;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  bool mutating = false;
  std::set<AgentRole> allowed_agents;
};

// Returns the first violation of `params` against the tool's parameter schema
// and strips keys the schema does not declare (their names go to `dropped`).
std::optional<std::string> check_params(const ToolSpec& spec, Json& params,
                                        std::vector<std::string>* dropped = nullptr);

// Read-only tools return an observation; errors are thrown as oransec::Error
// and surface to the agent as observation text.
using ToolHandler = std::function<Json(const Json& params)>;

class ToolRegistry {
 public:
  // Throws InvalidConfig on duplicate names or when a mutating tool lists the
  // analysis or classification role.
  void add(ToolSpec spec, ToolHandler handler = {});

  const ToolSpec* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::vector<const ToolSpec*> for_role(AgentRole role) const;
  std::vector<std::string> names() const;

  // Executable from an agent loop only when registered, allowed for `role`
  // and not mutating.
  bool callable_by(std::string_view name, AgentRole role) const;

  // Throws UnknownTool / MutatingToolNotAllowed / InvalidToolParams, or
  // whatever the handler throws.
  Json execute(std::string_view name, const Json& params, AgentRole role) const;

 private:
  struct Entry {
    ToolSpec spec;
    ToolHandler handler;
  };
  std::map<std::string, Entry, std::less<>> tools_;
};

}  // namespace oransec::agent
