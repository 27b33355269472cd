#include "oransec/guardrails.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

namespace oransec::agent {

std::string_view to_string(GuardrailStage s) noexcept {
  switch (s) {
    case GuardrailStage::sanitize: return "sanitize";
    case GuardrailStage::schema: return "schema";
    case GuardrailStage::whitelist: return "whitelist";
  }
  return "sanitize";
}

Json to_json(const GuardrailVerdict& v) {
  Json j{{"stage", to_string(v.stage)}, {"passed", v.passed}, {"repaired", v.repaired}};
  j["violation"] = v.violation ? Json(*v.violation) : Json(nullptr);
  if (!v.dropped_keys.empty()) j["dropped_keys"] = v.dropped_keys;
  return j;
}

GuardrailVerdict verdict_from_json(const Json& j) {
  GuardrailVerdict v;
  const auto stage = j.at("stage").get<std::string>();
  v.stage = stage == "schema"      ? GuardrailStage::schema
            : stage == "whitelist" ? GuardrailStage::whitelist
                                   : GuardrailStage::sanitize;
  v.passed = j.at("passed").get<bool>();
  v.repaired = j.at("repaired").get<bool>();
  if (!j.at("violation").is_null()) v.violation = j.at("violation").get<std::string>();
  if (j.contains("dropped_keys")) v.dropped_keys = j.at("dropped_keys").get<std::vector<std::string>>();
  return v;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool strip_fence(std::string_view& s) {
  if (s.size() < 6 || s.substr(0, 3) != "```" || s.substr(s.size() - 3) != "```") return false;
  std::string_view inner = s.substr(3, s.size() - 6);
  // Optional language tag such as ```json followed by whitespace.
  std::size_t tag = 0;
  while (tag < inner.size() && (std::isalnum(static_cast<unsigned char>(inner[tag])) ||
                                inner[tag] == '_' || inner[tag] == '-')) {
    ++tag;
  }
  if (tag > 0 && tag < inner.size() && is_space(inner[tag])) inner.remove_prefix(tag);
  s = trim(inner);
  return true;
}

// Index one past the '}' that closes the object opening at `open`, or npos.
std::size_t match_object(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

GuardrailVerdict fail(GuardrailStage stage, std::string why) {
  GuardrailVerdict v;
  v.stage = stage;
  v.passed = false;
  v.violation = std::move(why);
  return v;
}

bool field_type_ok(const FieldSpec& f, const Json& v, std::string& why) {
  switch (f.type) {
    case FieldType::String:
      if (v.is_string()) return true;
      why = "must be a string";
      return false;
    case FieldType::NonEmptyString:
      if (v.is_string() && !v.get<std::string>().empty()) return true;
      why = "must be a non-empty string";
      return false;
    case FieldType::StringList:
      if (v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
        return true;
      }
      why = "must be a list of strings";
      return false;
    case FieldType::Object:
      if (v.is_object()) return true;
      why = "must be an object";
      return false;
    case FieldType::Array:
      if (v.is_array()) return true;
      why = "must be an array";
      return false;
    case FieldType::Boolean:
      if (v.is_boolean()) return true;
      why = "must be a boolean";
      return false;
    case FieldType::Enum:
      if (v.is_string() &&
          std::find(f.allowed.begin(), f.allowed.end(), v.get<std::string>()) != f.allowed.end()) {
        return true;
      }
      why = "must be one of {" + join(f.allowed, ", ") + "}";
      return false;
  }
  return false;
}

}  // namespace

SanitizeResult sanitize_completion(std::string_view raw, std::size_t max_bytes) {
  SanitizeResult out;
  if (raw.size() > max_bytes) {
    out.verdict = fail(GuardrailStage::sanitize,
                       "oversized completion (" + std::to_string(raw.size()) + " bytes)");
    return out;
  }
  std::string_view s = trim(raw);
  bool repaired = strip_fence(s);

  const std::size_t open = s.find('{');
  if (open == std::string_view::npos) {
    out.verdict = fail(GuardrailStage::sanitize, "no JSON object found");
    return out;
  }
  const std::size_t close = match_object(s, open);
  if (close == std::string_view::npos) {
    out.verdict = fail(GuardrailStage::sanitize, "unbalanced braces");
    return out;
  }
  if (!trim(s.substr(0, open)).empty() || !trim(s.substr(close)).empty()) repaired = true;

  try {
    out.payload = Json::parse(s.substr(open, close - open));
  } catch (const Json::parse_error& e) {
    out.verdict = fail(GuardrailStage::sanitize, std::string("invalid JSON: ") + e.what());
    return out;
  }
  out.verdict.stage = GuardrailStage::sanitize;
  out.verdict.passed = true;
  out.verdict.repaired = repaired;
  return out;
}

SchemaCheck validate_against_schema(Json payload, const ToolRegistry& registry, AgentRole role,
                                    const FinalSchema& final_schema) {
  SchemaCheck out;
  std::vector<std::string> dropped;
  if (!payload.is_object()) {
    out.verdict = fail(GuardrailStage::schema, "payload must be a JSON object");
    return out;
  }
  for (auto it = payload.begin(); it != payload.end();) {
    const auto& k = it.key();
    if (k == "thought" || k == "action" || k == "action_input" || k == "final") {
      ++it;
    } else {
      dropped.push_back(k);
      it = payload.erase(it);
    }
  }

  auto schema_fail = [&](std::string why) {
    out.verdict = fail(GuardrailStage::schema, std::move(why));
    out.verdict.dropped_keys = dropped;
    return out;
  };

  auto thought = payload.find("thought");
  if (thought == payload.end()) return schema_fail("missing required key 'thought'");
  if (!thought->is_string()) return schema_fail("'thought' must be a string");

  const bool has_action = payload.contains("action");
  const bool has_final = payload.contains("final");
  if (has_action == has_final) return schema_fail("exactly one of 'action' or 'final' is required");

  ParsedAction action;
  action.thought = thought->get<std::string>();

  if (has_action) {
    const Json& name = payload["action"];
    if (!name.is_string() || name.get<std::string>().empty()) {
      return schema_fail("'action' must be a non-empty string");
    }
    auto input = payload.find("action_input");
    if (input == payload.end()) return schema_fail("missing required key 'action_input'");
    if (!input->is_object()) return schema_fail("'action_input' must be an object");
    action.call.tool_name = name.get<std::string>();
    action.call.params = *input;
    if (const ToolSpec* spec = registry.find(action.call.tool_name)) {
      std::vector<std::string> dropped_params;
      if (auto v = check_params(*spec, action.call.params, &dropped_params)) return schema_fail(*v);
      for (auto& p : dropped_params) dropped.push_back("action_input." + p);
    }
  } else {
    if (payload.contains("action_input")) {
      dropped.push_back("action_input");
      payload.erase("action_input");
    }
    Json final = payload["final"];
    if (!final.is_object()) return schema_fail("'final' must be an object");
    for (auto it = final.begin(); it != final.end();) {
      const bool declared =
          std::any_of(final_schema.fields.begin(), final_schema.fields.end(),
                      [&](const FieldSpec& f) { return f.name == it.key(); });
      if (declared) {
        ++it;
      } else {
        dropped.push_back("final." + it.key());
        it = final.erase(it);
      }
    }
    for (const auto& f : final_schema.fields) {
      auto it = final.find(f.name);
      if (it == final.end() || it->is_null()) {
        if (f.required) return schema_fail("final answer missing required key '" + f.name + "'");
        continue;
      }
      std::string why;
      if (!field_type_ok(f, *it, why)) return schema_fail("final." + f.name + " " + why);
    }
    if (final_schema.extra_check) {
      if (auto v = final_schema.extra_check(final)) return schema_fail(*v);
    }
    action.is_final = true;
    action.final.payload = std::move(final);
  }

  if (!dropped.empty()) {
    spdlog::warn("guardrail dropped unknown keys: {}", join(dropped, ", "));
  }

  if (!action.is_final && !registry.callable_by(action.call.tool_name, role)) {
    const bool known = registry.contains(action.call.tool_name);
    out.verdict = fail(GuardrailStage::whitelist,
                       "tool '" + action.call.tool_name + "' is " +
                           (known ? "not in the allowed set of the " : "not registered for the ") +
                           std::string(to_string(role)) + " agent");
    out.verdict.dropped_keys = dropped;
    return out;
  }

  out.verdict.stage = GuardrailStage::whitelist;
  out.verdict.passed = true;
  out.verdict.dropped_keys = std::move(dropped);
  out.action = std::move(action);
  return out;
}

}  // namespace oransec::agent
