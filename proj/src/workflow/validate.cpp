#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <queue>

#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::workflow {
namespace {

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool is_stage_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

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

// Tarjan's strongly connected components over stage indices; returns the
// components that form cycles (size > 1, or a self-loop).
std::vector<std::vector<std::size_t>> cyclic_components(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  int counter = 0;

  std::function<void(std::size_t)> strongconnect = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : adj[v]) {
      if (index[w] < 0) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      bool self_loop = std::find(adj[v].begin(), adj[v].end(), v) != adj[v].end();
      if (comp.size() > 1 || self_loop) out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (index[v] < 0) strongconnect(v);
  }
  return out;
}

}  // namespace

ValidationReport validate_workflow(const Workflow& wf) {
  ValidationReport report;
  auto add = [&](std::string code, std::string stage, std::string message, std::vector<std::string> subjects = {}) {
    report.push_back(Violation{std::move(code), std::move(stage), std::move(message), std::move(subjects)});
  };

  if (wf.name.empty()) add("empty_workflow_name", "", "workflow name must be nonempty");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < wf.stages.size(); ++i) {
    const auto& s = wf.stages[i];
    if (!is_stage_name(s.name)) {
      add("invalid_stage_name", s.name, "stage name must be nonempty and use [A-Za-z0-9_.-]");
    }
    if (!index.emplace(s.name, i).second) {
      add("duplicate_stage", s.name, "stage name '" + s.name + "' is not unique", {s.name});
    }
  }

  std::map<std::string, ParameterKind> kinds;
  for (const auto& s : wf.stages) {
    std::set<std::string> seen;
    for (const auto& p : s.parameters) {
      if (!is_identifier(p.name)) add("invalid_parameter_name", s.name, "parameter name '" + p.name + "' is not an identifier", {p.name});
      if (!seen.insert(p.name).second) add("duplicate_parameter", s.name, "parameter '" + p.name + "' declared twice", {p.name});
      auto [it, inserted] = kinds.emplace(p.name, p.kind);
      if (!inserted && it->second != p.kind) {
        add("conflicting_parameter", s.name, "parameter '" + p.name + "' declared with different kinds", {p.name});
      }
      if (p.default_value) {
        if (p.kind == ParameterKind::kNumber && !is_number(*p.default_value)) {
          add("invalid_default", s.name, "default of '" + p.name + "' is not a number", {p.name});
        }
        if (p.kind == ParameterKind::kFlag) {
          try {
            (void)parse_flag(*p.default_value);
          } catch (const Error&) {
            add("invalid_default", s.name, "default of '" + p.name + "' is not a flag value", {p.name});
          }
        }
      }
    }

    try {
      for (const auto& piece : parse_template(s.command_template)) {
        if (piece.is_placeholder && s.find_parameter(piece.text) == nullptr) {
          add("undeclared_placeholder", s.name, "undeclared placeholder " + piece.text, {piece.text});
        }
      }
    } catch (const Error& e) {
      add("unterminated_placeholder", s.name, e.what());
    }

    for (const auto& out : s.expected_outputs) {
      if (!fs::is_confined_relative(out)) {
        add("output_path_escape", s.name, "expected output '" + out + "' escapes the working directory", {out});
      }
    }

    const auto& r = s.resources;
    if (r.cores <= 0 || r.memory_bytes <= 0 || r.walltime_seconds <= 0) {
      add("nonpositive_resource", s.name, "cores, memory and walltime must be strictly positive");
    }

    for (const auto& script : s.scripts) {
      if (!fs::is_plain_name(script)) add("invalid_script_name", s.name, "script name '" + script + "' is not a plain file name", {script});
    }

    for (const auto& d : s.dependencies) {
      if (!index.count(d.upstream)) {
        add("unknown_dependency", s.name, "dependency on unknown stage '" + d.upstream + "'", {d.upstream});
      }
      if (d.condition.kind() == DependencyCondition::Kind::kExitCodes) {
        if (d.condition.codes().empty()) add("empty_exit_codes", s.name, "exit-code condition needs at least one code", {d.upstream});
        for (int c : d.condition.codes()) {
          if (c < 0 || c > 255) {
            add("exit_code_range", s.name, "exit code " + std::to_string(c) + " outside [0,255]", {d.upstream});
          }
        }
      }
    }
  }

  std::vector<std::vector<std::size_t>> adj(wf.stages.size());
  for (std::size_t i = 0; i < wf.stages.size(); ++i) {
    for (const auto& d : wf.stages[i].dependencies) {
      if (auto it = index.find(d.upstream); it != index.end()) adj[it->second].push_back(i);
    }
  }
  for (auto& comp : cyclic_components(adj)) {
    std::vector<std::string> names;
    for (auto v : comp) names.push_back(wf.stages[v].name);
    std::sort(names.begin(), names.end());
    std::string joined;
    for (const auto& n : names) joined += (joined.empty() ? "" : ",") + n;
    add("cycle", "", "dependency cycle among {" + joined + "}", names);
  }
  return report;
}

std::optional<std::vector<std::string>> topological_order(const Workflow& wf) {
  const std::size_t n = wf.stages.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(wf.stages[i].name, i);

  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& d : wf.stages[i].dependencies) {
      auto it = index.find(d.upstream);
      if (it == index.end()) return std::nullopt;
      adj[it->second].push_back(i);
      ++indegree[i];
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    order.push_back(wf.stages[v].name);
    for (auto w : adj[v]) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

}  // namespace jms::workflow
