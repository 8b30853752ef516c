#include <algorithm>

#include "jms/common/error.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::workflow {

using nlohmann::json;

std::string_view to_string(ParameterKind k) {
  switch (k) {
    case ParameterKind::kText: return "text";
    case ParameterKind::kNumber: return "number";
    case ParameterKind::kFlag: return "flag";
    case ParameterKind::kInputFile: return "input-file";
  }
  return "text";
}

ParameterKind parameter_kind_from_string(std::string_view s) {
  if (s == "text") return ParameterKind::kText;
  if (s == "number") return ParameterKind::kNumber;
  if (s == "flag") return ParameterKind::kFlag;
  if (s == "input-file") return ParameterKind::kInputFile;
  throw Error(ErrorCode::kValidation, "unknown parameter kind: " + std::string(s));
}

const Parameter* Stage::find_parameter(std::string_view n) const {
  auto it = std::find_if(parameters.begin(), parameters.end(), [&](const Parameter& p) { return p.name == n; });
  return it == parameters.end() ? nullptr : &*it;
}

const Stage* Workflow::find_stage(std::string_view n) const {
  auto it = std::find_if(stages.begin(), stages.end(), [&](const Stage& s) { return s.name == n; });
  return it == stages.end() ? nullptr : &*it;
}

Stage* Workflow::find_stage(std::string_view n) {
  auto it = std::find_if(stages.begin(), stages.end(), [&](const Stage& s) { return s.name == n; });
  return it == stages.end() ? nullptr : &*it;
}

std::map<std::string, Parameter> Workflow::parameters() const {
  std::map<std::string, Parameter> out;
  for (const auto& s : stages) {
    for (const auto& p : s.parameters) {
      auto [it, inserted] = out.emplace(p.name, p);
      if (!inserted) {
        // Shared name: required anywhere means required; first default wins.
        it->second.required = it->second.required || p.required;
        if (!it->second.default_value && p.default_value) it->second.default_value = p.default_value;
      }
    }
  }
  return out;
}

std::set<std::string> Workflow::script_names() const {
  std::set<std::string> out;
  for (const auto& s : stages) out.insert(s.scripts.begin(), s.scripts.end());
  return out;
}

bool semantically_equal(const Workflow& a, const Workflow& b) {
  return a.name == b.name && a.description == b.description && a.stages == b.stages;
}

void to_json(json& j, const Parameter& p) {
  j = json{{"name", p.name}, {"kind", to_string(p.kind)}, {"required", p.required}};
  if (p.default_value) j["default"] = *p.default_value;
  if (!p.flag_token.empty()) j["flag_token"] = p.flag_token;
}

void from_json(const json& j, Parameter& p) {
  p.name = j.at("name").get<std::string>();
  p.kind = parameter_kind_from_string(j.value("kind", std::string("text")));
  p.required = j.value("required", false);
  p.default_value.reset();
  if (auto it = j.find("default"); it != j.end() && !it->is_null()) {
    if (it->is_string()) {
      p.default_value = it->get<std::string>();
    } else if (it->is_boolean()) {
      p.default_value = it->get<bool>() ? "true" : "false";
    } else {
      p.default_value = it->dump();
    }
  }
  p.flag_token = j.value("flag_token", std::string{});
}

void to_json(json& j, const DependencyCondition& c) {
  switch (c.kind()) {
    case DependencyCondition::Kind::kSuccess: j = json{{"type", "success"}}; break;
    case DependencyCondition::Kind::kFailure: j = json{{"type", "failure"}}; break;
    case DependencyCondition::Kind::kAlways: j = json{{"type", "always"}}; break;
    case DependencyCondition::Kind::kExitCodes: j = json{{"type", "exit_codes"}, {"codes", c.codes()}}; break;
  }
}

void from_json(const json& j, DependencyCondition& c) {
  const auto type = j.at("type").get<std::string>();
  if (type == "success") {
    c = DependencyCondition::success();
  } else if (type == "failure") {
    c = DependencyCondition::failure();
  } else if (type == "always") {
    c = DependencyCondition::always();
  } else if (type == "exit_codes") {
    c = DependencyCondition::exit_codes(j.at("codes").get<std::set<int>>());
  } else {
    throw Error(ErrorCode::kValidation, "unknown dependency condition: " + type);
  }
}

void to_json(json& j, const Stage& s) {
  json deps = json::array();
  for (const auto& d : s.dependencies) deps.push_back(json{{"stage", d.upstream}, {"condition", d.condition}});
  j = json{{"name", s.name},
           {"command", s.command_template},
           {"parameters", s.parameters},
           {"expected_outputs", s.expected_outputs},
           {"resources", s.resources},
           {"dependencies", std::move(deps)},
           {"scripts", s.scripts}};
}

void from_json(const json& j, Stage& s) {
  s.name = j.at("name").get<std::string>();
  s.command_template = j.value("command", std::string{});
  s.parameters = j.value("parameters", std::vector<Parameter>{});
  s.expected_outputs = j.value("expected_outputs", std::vector<std::string>{});
  s.resources = j.value("resources", ResourceRequest{});
  s.dependencies.clear();
  for (const auto& d : j.value("dependencies", json::array())) {
    s.dependencies.push_back(Dependency{d.at("stage").get<std::string>(),
                                        d.value("condition", json{{"type", "success"}}).get<DependencyCondition>()});
  }
  s.scripts = j.value("scripts", std::vector<std::string>{});
}

void to_json(json& j, const Workflow& w) {
  j = json{{"id", w.id},
           {"name", w.name},
           {"description", w.description},
           {"owner", w.owner},
           {"stages", w.stages},
           {"created_ms", w.created_ms},
           {"modified_ms", w.modified_ms}};
}

void from_json(const json& j, Workflow& w) {
  w.id = j.value("id", std::string{});
  w.name = j.value("name", std::string{});
  w.description = j.value("description", std::string{});
  w.owner = j.value("owner", std::string{});
  w.stages = j.value("stages", std::vector<Stage>{});
  w.created_ms = j.value("created_ms", std::int64_t{0});
  w.modified_ms = j.value("modified_ms", std::int64_t{0});
}

void to_json(json& j, const InputProfile& p) {
  j = json{{"id", p.id}, {"workflow_id", p.workflow_id}, {"name", p.name}, {"values", p.values}};
}

void from_json(const json& j, InputProfile& p) {
  p.id = j.value("id", std::string{});
  p.workflow_id = j.value("workflow_id", std::string{});
  p.name = j.value("name", std::string{});
  p.values.clear();
  const json values = j.value("values", json::object());
  for (const auto& [k, v] : values.items()) {
    p.values[k] = v.is_string() ? v.get<std::string>() : (v.is_boolean() ? (v.get<bool>() ? "true" : "false") : v.dump());
  }
}

void to_json(json& j, const Violation& v) {
  j = json{{"code", v.code}, {"stage", v.stage}, {"message", v.message}, {"subjects", v.subjects}};
}

}  // namespace jms::workflow
