#include <algorithm>
#include <cctype>

#include "jms/common/error.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::workflow {

std::vector<TemplatePiece> parse_template(std::string_view tmpl) {
  std::vector<TemplatePiece> pieces;
  std::string literal;
  auto flush = [&] {
    if (!literal.empty()) pieces.push_back(TemplatePiece{false, std::move(literal)});
    literal.clear();
  };
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    char c = tmpl[i];
    if (c != '$' || i + 1 >= tmpl.size()) {
      literal.push_back(c);
      continue;
    }
    char next = tmpl[i + 1];
    if (next == '$') {
      literal.push_back('$');
      ++i;
    } else if (next == '{') {
      auto close = tmpl.find('}', i + 2);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::kValidation, "unterminated placeholder at offset " + std::to_string(i));
      }
      flush();
      pieces.push_back(TemplatePiece{true, std::string(tmpl.substr(i + 2, close - i - 2))});
      i = close;
    } else {
      // Shell variables such as $HOME pass through untouched.
      literal.push_back('$');
    }
  }
  flush();
  return pieces;
}

std::string shell_quote(std::string_view value) {
  auto safe = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("_./:=,+@%^-").find(c) != std::string_view::npos;
  };
  if (!value.empty() && std::all_of(value.begin(), value.end(), safe)) return std::string(value);
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

bool parse_flag(std::string_view value) {
  std::string v(value);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off" || v.empty()) return false;
  throw Error(ErrorCode::kInvalidParameterValue, "not a flag value: " + std::string(value));
}

namespace {

bool is_number(std::string_view s) {
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    (void)std::stod(std::string(s), &used);
    return used == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

std::string render_command(const Stage& stage, const InputValues& values) {
  for (const auto& [name, _] : values) {
    if (stage.find_parameter(name) == nullptr) {
      throw Error(ErrorCode::kUnknownParameter, "unknown parameter " + name, {{"parameter", name}});
    }
  }

  std::string out;
  for (const auto& piece : parse_template(stage.command_template)) {
    if (!piece.is_placeholder) {
      out += piece.text;
      continue;
    }
    const Parameter* p = stage.find_parameter(piece.text);
    if (p == nullptr) {
      throw Error(ErrorCode::kValidation, "undeclared placeholder " + piece.text);
    }
    std::optional<std::string> value;
    if (auto it = values.find(p->name); it != values.end()) {
      value = it->second;
    } else if (p->default_value) {
      value = p->default_value;
    } else if (p->required) {
      throw Error(ErrorCode::kMissingRequiredParameter, "missing required parameter " + p->name, {{"parameter", p->name}});
    }

    std::string rendered;
    switch (p->kind) {
      case ParameterKind::kFlag:
        if (value && parse_flag(*value)) rendered = shell_quote(p->effective_flag_token());
        break;
      case ParameterKind::kNumber:
        if (value) {
          if (!is_number(*value)) {
            throw Error(ErrorCode::kInvalidParameterValue, "parameter " + p->name + " is not a number",
                        {{"parameter", p->name}});
          }
          rendered = *value;
        }
        break;
      case ParameterKind::kText:
      case ParameterKind::kInputFile:
        if (value) rendered = shell_quote(*value);
        break;
    }
    if (rendered.empty() && p->kind == ParameterKind::kFlag && !out.empty() && out.back() == ' ') {
      out.pop_back();
    }
    out += rendered;
  }
  return out;
}

}  // namespace jms::workflow
