#pragma once

// Conditional-dependency fixture workflows shared by the test suites.
// Each stage appends its name to trace.txt, optionally sleeps, then exits
// with the code supplied by its `<stage>_exit` parameter.

#include <cctype>
#include <random>
#include <string>
#include <vector>

#include "jms/workflow/workflow.hpp"

namespace jms::testing {

using workflow::Dependency;
using workflow::DependencyCondition;
using workflow::Parameter;
using workflow::ParameterKind;
using workflow::Stage;
using workflow::Workflow;

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline Stage stub_stage(const std::string& name, std::vector<Dependency> deps, int default_exit = 0) {
  Stage s;
  s.name = name;
  const std::string exit_param = lower(name) + "_exit";
  s.command_template = "echo " + name + " >> trace.txt; sleep ${pause}; exit ${" + exit_param + "}";
  s.parameters = {Parameter{"pause", ParameterKind::kNumber, false, "0", {}},
                  Parameter{exit_param, ParameterKind::kNumber, false, std::to_string(default_exit), {}}};
  s.resources.cores = 1;
  s.resources.memory_bytes = 64LL << 20;
  s.resources.walltime_seconds = 60;
  s.dependencies = std::move(deps);
  return s;
}

// A -> B on success, A -> C on failure.
inline Workflow success_failure_fork() {
  Workflow wf;
  wf.id = "success-failure-fork";
  wf.name = "conditional fork on success/failure";
  wf.owner = "alice";
  wf.stages = {stub_stage("A", {}),
               stub_stage("B", {{"A", DependencyCondition::success()}}),
               stub_stage("C", {{"A", DependencyCondition::failure()}})};
  return wf;
}

// A -> B on exit 1, A -> C on exit 2; anything else fails the job.
inline Workflow exit_code_branch() {
  Workflow wf;
  wf.id = "exit-code-branch";
  wf.name = "branch on exit status";
  wf.owner = "alice";
  wf.stages = {stub_stage("A", {}, 1),
               stub_stage("B", {{"A", DependencyCondition::exit_codes({1})}}),
               stub_stage("C", {{"A", DependencyCondition::exit_codes({2})}})};
  return wf;
}

// A -> {B, C} in parallel -> D; D exit 5 -> E.
inline Workflow parallel_gate() {
  Workflow wf;
  wf.id = "parallel-gate";
  wf.name = "parallel stages with exit-code gate";
  wf.owner = "alice";
  wf.stages = {stub_stage("A", {}),
               stub_stage("B", {{"A", DependencyCondition::success()}}),
               stub_stage("C", {{"A", DependencyCondition::success()}}),
               stub_stage("D", {{"B", DependencyCondition::success()}, {"C", DependencyCondition::success()}}, 5),
               stub_stage("E", {{"D", DependencyCondition::exit_codes({5})}})};
  return wf;
}

inline DependencyCondition random_condition(std::mt19937& rng) {
  switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
    case 0: return DependencyCondition::success();
    case 1: return DependencyCondition::failure();
    case 2: return DependencyCondition::exit_codes({1});
    case 3: return DependencyCondition::exit_codes({2});
    default: return DependencyCondition::always();
  }
}

// Random DAG: edges only point from lower to higher stage index.
inline Workflow random_dag(std::mt19937& rng, int max_stages = 5, double edge_probability = 0.45) {
  Workflow wf;
  wf.id = "random";
  wf.name = "random dag";
  wf.owner = "alice";
  const int n = std::uniform_int_distribution<int>(1, max_stages)(rng);
  std::bernoulli_distribution edge(edge_probability);
  for (int i = 0; i < n; ++i) {
    std::vector<Dependency> deps;
    for (int u = 0; u < i; ++u) {
      if (edge(rng)) deps.push_back(Dependency{"S" + std::to_string(u), random_condition(rng)});
    }
    wf.stages.push_back(stub_stage("S" + std::to_string(i), std::move(deps)));
  }
  return wf;
}

}  // namespace jms::testing
