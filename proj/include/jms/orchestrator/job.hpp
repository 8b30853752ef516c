#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jms/common/access.hpp"
#include "jms/common/clock.hpp"
#include "jms/common/types.hpp"
#include "jms/deps/dependency_graph.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::orchestrator {

struct ResourceSample {
  Timestamp at;
  ResourcesUsed used;
};

struct StageRun {
  std::string stage;
  std::optional<std::string> cluster_id;  // set once submitted
  deps::StageState state;
  ResourceRequest resources;  // effective request, alterations included
  std::string command;
  std::string node;
  ResourcesUsed resources_used;
  std::vector<ResourceSample> samples;
  std::optional<std::string> snapshot;  // manifest blob hash; iff state.executed()
  std::optional<Timestamp> snapshot_at;
  std::optional<Timestamp> submitted_at;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> ended_at;
  std::vector<std::string> missing_outputs;
  bool restored = false;  // outcome copied from the repeated job

  std::string stdout_file() const { return cluster_id ? *cluster_id + ".OU" : std::string{}; }
  std::string stderr_file() const { return cluster_id ? *cluster_id + ".ER" : std::string{}; }
};

struct Job {
  std::string id;
  std::string owner;
  workflow::Workflow workflow;  // frozen at submit
  workflow::InputValues inputs;
  std::map<std::string, std::string> scripts;      // name -> blob hash
  std::map<std::string, std::string> input_files;  // file name -> blob hash
  std::string working_dir;
  std::vector<StageRun> stages;  // workflow declaration order
  deps::DependencyGraph graph;
  deps::Verdict verdict;
  Timestamp submitted_at;
  std::optional<Timestamp> ended_at;
  bool held = false;
  Grants shares;
  std::optional<std::string> repeat_of;
  std::optional<std::string> from_stage;

  StageRun* find(std::string_view stage);
  const StageRun* find(std::string_view stage) const;
  // Every stage terminal; in-flight stages of a failed job still count.
  bool terminal() const { return graph.all_terminal(); }
};

void to_json(nlohmann::json& j, const StageRun& r);
void from_json(const nlohmann::json& j, StageRun& r);
void to_json(nlohmann::json& j, const Job& job);
void from_json(const nlohmann::json& j, Job& job);

struct AlterationRequest {
  enum class State { kPending, kApproved, kDenied };

  std::string id;
  std::string job_id;
  std::string requester;
  nlohmann::json changes;  // subset of walltime, memory, cores, queue
  State state = State::kPending;
  std::optional<std::string> decided_by;
  Timestamp created_at;
  std::optional<Timestamp> decided_at;
  std::vector<std::string> applied_to;  // stages whose request changed
};

std::string_view to_string(AlterationRequest::State s);
void to_json(nlohmann::json& j, const AlterationRequest& a);
void from_json(const nlohmann::json& j, AlterationRequest& a);

}  // namespace jms::orchestrator
