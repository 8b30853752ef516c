#include <algorithm>
#include <sstream>

#include "jms/common/error.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::workflow {
namespace {

void check_value(const Parameter& p, const std::string& value) {
  if (p.kind == ParameterKind::kFlag) {
    (void)parse_flag(value);
  } else if (p.kind == ParameterKind::kNumber) {
    try {
      std::size_t used = 0;
      (void)std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (...) {
      throw Error(ErrorCode::kInvalidParameterValue, "parameter " + p.name + " is not a number: " + value,
                  {{"parameter", p.name}});
    }
  }
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \r\n");
  return std::string(s.substr(b, e - b + 1));
}

// One delimited record; double quotes group a field and `""` escapes a quote.
std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

}  // namespace

InputValues resolve_inputs(const Workflow& wf, const InputProfile* profile, const InputValues& overrides) {
  const auto params = wf.parameters();
  if (profile != nullptr && !profile->workflow_id.empty() && !wf.id.empty() && profile->workflow_id != wf.id) {
    throw Error(ErrorCode::kValidation, "profile " + profile->id + " belongs to another workflow");
  }
  auto check_keys = [&](const InputValues& m) {
    for (const auto& [k, _] : m) {
      if (!params.count(k)) throw Error(ErrorCode::kUnknownParameter, "unknown parameter " + k, {{"parameter", k}});
    }
  };
  if (profile != nullptr) check_keys(profile->values);
  check_keys(overrides);

  InputValues out;
  for (const auto& [name, p] : params) {
    std::optional<std::string> v;
    if (auto it = overrides.find(name); it != overrides.end()) {
      v = it->second;
    } else if (profile != nullptr && profile->values.count(name)) {
      v = profile->values.at(name);
    } else if (p.default_value) {
      v = p.default_value;
    }
    if (!v) {
      if (p.required) {
        throw Error(ErrorCode::kMissingRequiredParameter, "missing required parameter " + name, {{"parameter", name}});
      }
      continue;
    }
    check_value(p, *v);
    out.emplace(name, std::move(*v));
  }
  return out;
}

InputValues stage_values(const Stage& stage, const InputValues& resolved) {
  InputValues out;
  for (const auto& p : stage.parameters) {
    if (auto it = resolved.find(p.name); it != resolved.end()) out.emplace(p.name, it->second);
  }
  return out;
}

std::vector<BatchRow> parse_batch_file(std::string_view text, const Workflow& wf) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (!trim(line).empty()) lines.emplace_back(no, line);
    }
  }
  if (lines.empty()) throw Error(ErrorCode::kEmptyFile, "batch file is empty");

  const std::string& header_line = lines.front().second;
  const char delim = header_line.find('\t') != std::string::npos ? '\t' : ',';
  const auto header = split_record(header_line, delim);
  const auto params = wf.parameters();
  for (const auto& col : header) {
    if (!params.count(col)) throw Error(ErrorCode::kUnknownColumn, "unknown column " + col, {{"column", col}});
  }

  std::vector<BatchRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [no, line] = lines[i];
    auto fields = split_record(line, delim);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kRowArity,
                  "line " + std::to_string(no) + " has " + std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()),
                  {{"line", no}});
    }
    BatchRow row{no, {}};
    for (std::size_t c = 0; c < header.size(); ++c) {
      // Empty cells fall back to profile/default values.
      if (!fields[c].empty()) row.values.emplace(header[c], fields[c]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace jms::workflow
