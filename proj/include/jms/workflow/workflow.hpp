#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "jms/common/types.hpp"

namespace jms::workflow {

enum class ParameterKind { kText, kNumber, kFlag, kInputFile };

std::string_view to_string(ParameterKind k);
ParameterKind parameter_kind_from_string(std::string_view s);

struct Parameter {
  std::string name;
  ParameterKind kind = ParameterKind::kText;
  bool required = false;
  std::optional<std::string> default_value;
  // Token emitted for a true flag; empty means "--<name>".
  std::string flag_token;

  std::string effective_flag_token() const { return flag_token.empty() ? "--" + name : flag_token; }

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

class DependencyCondition {
 public:
  enum class Kind { kSuccess, kFailure, kExitCodes, kAlways };

  static DependencyCondition success() { return DependencyCondition(Kind::kSuccess, {}); }
  static DependencyCondition failure() { return DependencyCondition(Kind::kFailure, {}); }
  static DependencyCondition always() { return DependencyCondition(Kind::kAlways, {}); }
  static DependencyCondition exit_codes(std::set<int> codes) {
    return DependencyCondition(Kind::kExitCodes, std::move(codes));
  }

  DependencyCondition() = default;

  Kind kind() const { return kind_; }
  const std::set<int>& codes() const { return codes_; }

  friend bool operator==(const DependencyCondition&, const DependencyCondition&) = default;

 private:
  DependencyCondition(Kind k, std::set<int> codes) : kind_(k), codes_(std::move(codes)) {}

  Kind kind_ = Kind::kSuccess;
  std::set<int> codes_;
};

struct Dependency {
  std::string upstream;
  DependencyCondition condition;

  friend bool operator==(const Dependency&, const Dependency&) = default;
};

struct Stage {
  std::string name;
  std::string command_template;
  std::vector<Parameter> parameters;
  std::vector<std::string> expected_outputs;
  ResourceRequest resources;
  std::vector<Dependency> dependencies;
  std::vector<std::string> scripts;

  const Parameter* find_parameter(std::string_view n) const;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct Workflow {
  std::string id;
  std::string name;
  std::string description;
  std::string owner;
  std::vector<Stage> stages;
  std::int64_t created_ms = 0;
  std::int64_t modified_ms = 0;

  const Stage* find_stage(std::string_view n) const;
  Stage* find_stage(std::string_view n);

  // All declared parameters, keyed by name. Stages declaring the same name
  // share one input value.
  std::map<std::string, Parameter> parameters() const;

  // Every script named by any stage, sorted and deduplicated.
  std::set<std::string> script_names() const;
};

// Semantic equality: everything except id, owner and timestamps.
bool semantically_equal(const Workflow& a, const Workflow& b);

using InputValues = std::map<std::string, std::string>;

struct InputProfile {
  std::string id;
  std::string workflow_id;
  std::string name;
  InputValues values;
};

// JSON forms. The stage/dependency layout doubles as the archive manifest.
void to_json(nlohmann::json& j, const Parameter& p);
void from_json(const nlohmann::json& j, Parameter& p);
void to_json(nlohmann::json& j, const DependencyCondition& c);
void from_json(const nlohmann::json& j, DependencyCondition& c);
void to_json(nlohmann::json& j, const Stage& s);
void from_json(const nlohmann::json& j, Stage& s);
void to_json(nlohmann::json& j, const Workflow& w);
void from_json(const nlohmann::json& j, Workflow& w);
void to_json(nlohmann::json& j, const InputProfile& p);
void from_json(const nlohmann::json& j, InputProfile& p);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;
  std::string stage;
  std::string message;
  std::vector<std::string> subjects;
};

using ValidationReport = std::vector<Violation>;

void to_json(nlohmann::json& j, const Violation& v);

ValidationReport validate_workflow(const Workflow& wf);

// Stage names in a dependency-respecting order, ties broken by declaration
// order. Empty optional when the graph has a cycle or dangling reference.
std::optional<std::vector<std::string>> topological_order(const Workflow& wf);

// ---------------------------------------------------------------------------
// Command templates
// ---------------------------------------------------------------------------

struct TemplatePiece {
  bool is_placeholder = false;
  std::string text;  // literal text or placeholder name
};

// Splits a template into literal and `${name}` pieces; `$$` is a literal `$`.
// Throws kValidation on an unterminated `${`.
std::vector<TemplatePiece> parse_template(std::string_view tmpl);

// Quotes a value as one shell word when it contains anything beyond a
// conservative safe character set.
std::string shell_quote(std::string_view value);

std::string render_command(const Stage& stage, const InputValues& values);

bool parse_flag(std::string_view value);

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

InputValues resolve_inputs(const Workflow& wf, const InputProfile* profile, const InputValues& overrides);

// Values relevant to one stage (its declared parameters only).
InputValues stage_values(const Stage& stage, const InputValues& resolved);

struct BatchRow {
  std::size_t line = 0;
  InputValues values;
};

std::vector<BatchRow> parse_batch_file(std::string_view text, const Workflow& wf);

}  // namespace jms::workflow
