#include "oransec/tools.hpp"

#include <algorithm>

#include "oransec/error.hpp"
#include "oransec/kb.hpp"

namespace oransec::agent {

std::string_view to_string(AgentRole role) noexcept {
  switch (role) {
    case AgentRole::analysis: return "analysis";
    case AgentRole::classification: return "classification";
    case AgentRole::response: return "response";
  }
  return "analysis";
}

AgentRole parse_role(std::string_view s) {
  if (s == "analysis") return AgentRole::analysis;
  if (s == "classification") return AgentRole::classification;
  if (s == "response") return AgentRole::response;
  throw Error(ErrorCode::UnknownRole, "unknown agent role '" + std::string(s) + "'");
}

std::string_view to_string(ParamType t) noexcept {
  switch (t) {
    case ParamType::String: return "string";
    case ParamType::Integer: return "integer";
    case ParamType::Boolean: return "boolean";
    case ParamType::Object: return "object";
    case ParamType::Array: return "array";
    case ParamType::Timestamp: return "timestamp_us";
    case ParamType::TechniqueId: return "technique_id";
  }
  return "string";
}

namespace {

bool type_matches(ParamType t, const Json& v) {
  switch (t) {
    case ParamType::String: return v.is_string();
    case ParamType::Integer: return v.is_number_integer();
    case ParamType::Boolean: return v.is_boolean();
    case ParamType::Object: return v.is_object();
    case ParamType::Array: return v.is_array();
    case ParamType::Timestamp: return v.is_number_integer() && v.get<std::int64_t>() >= 0;
    case ParamType::TechniqueId:
      return v.is_string() && kb::is_valid_technique_id(v.get<std::string>());
  }
  return false;
}

}  // namespace

std::optional<std::string> check_params(const ToolSpec& spec, Json& params,
                                        std::vector<std::string>* dropped) {
  if (!params.is_object()) return "action_input must be an object";
  for (auto it = params.begin(); it != params.end();) {
    const bool declared = std::any_of(spec.params.begin(), spec.params.end(),
                                      [&](const ParamSpec& p) { return p.name == it.key(); });
    if (declared) {
      ++it;
      continue;
    }
    if (dropped) dropped->push_back(it.key());
    it = params.erase(it);
  }
  for (const auto& p : spec.params) {
    auto it = params.find(p.name);
    if (it == params.end() || it->is_null()) {
      if (p.required) return "missing required param '" + p.name + "' for " + spec.name;
      continue;
    }
    if (!type_matches(p.type, *it)) {
      return "param '" + p.name + "' of " + spec.name + " must be " +
             std::string(to_string(p.type));
    }
    if (p.check) {
      if (auto v = p.check(*it)) return "param '" + p.name + "' of " + spec.name + ": " + *v;
    }
  }
  return std::nullopt;
}

void ToolRegistry::add(ToolSpec spec, ToolHandler handler) {
  if (spec.mutating && (spec.allowed_agents.count(AgentRole::analysis) ||
                        spec.allowed_agents.count(AgentRole::classification))) {
    throw Error(ErrorCode::InvalidConfig,
                "mutating tool " + spec.name + " cannot be granted to analysis/classification");
  }
  const std::string name = spec.name;
  if (!tools_.emplace(name, Entry{std::move(spec), std::move(handler)}).second) {
    throw Error(ErrorCode::InvalidConfig, "duplicate tool name " + name);
  }
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
  auto it = tools_.find(name);
  return it == tools_.end() ? nullptr : &it->second.spec;
}

std::vector<const ToolSpec*> ToolRegistry::for_role(AgentRole role) const {
  std::vector<const ToolSpec*> out;
  for (const auto& [_, e] : tools_) {
    if (e.spec.allowed_agents.count(role)) out.push_back(&e.spec);
  }
  return out;
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : tools_) out.push_back(name);
  return out;
}

bool ToolRegistry::callable_by(std::string_view name, AgentRole role) const {
  const ToolSpec* spec = find(name);
  return spec && !spec->mutating && spec->allowed_agents.count(role);
}

Json ToolRegistry::execute(std::string_view name, const Json& params, AgentRole role) const {
  auto it = tools_.find(name);
  if (it == tools_.end()) throw Error(ErrorCode::UnknownTool, "unknown tool " + std::string(name));
  const auto& entry = it->second;
  if (entry.spec.mutating) {
    throw Error(ErrorCode::MutatingToolNotAllowed,
                entry.spec.name + " only runs inside an approval-gated workflow");
  }
  if (!entry.spec.allowed_agents.count(role)) {
    throw Error(ErrorCode::UnknownTool,
                entry.spec.name + " is not available to the " + std::string(to_string(role)) + " agent");
  }
  Json checked = params;
  if (auto v = check_params(entry.spec, checked)) throw Error(ErrorCode::InvalidToolParams, *v);
  if (!entry.handler) throw Error(ErrorCode::UnknownTool, entry.spec.name + " has no handler");
  return entry.handler(checked);
}

}  // namespace oransec::agent
