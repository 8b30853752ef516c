#include "jms/deps/dependency_graph.hpp"

#include <algorithm>

#include "jms/common/error.hpp"

namespace jms::deps {

using nlohmann::json;
using K = StageState::Kind;

std::string_view to_string(StageState::Kind k) {
  switch (k) {
    case K::kPending: return "Pending";
    case K::kReady: return "Ready";
    case K::kSubmitted: return "Submitted";
    case K::kRunning: return "Running";
    case K::kHeld: return "Held";
    case K::kSuspended: return "Suspended";
    case K::kSucceeded: return "Succeeded";
    case K::kFailed: return "Failed";
    case K::kSkipped: return "Skipped";
    case K::kKilled: return "Killed";
  }
  return "Pending";
}

StageState::Kind stage_state_kind_from_string(std::string_view s) {
  for (auto k : {K::kPending, K::kReady, K::kSubmitted, K::kRunning, K::kHeld, K::kSuspended, K::kSucceeded,
                 K::kFailed, K::kSkipped, K::kKilled}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::kBadRequest, "unknown stage state " + std::string(s));
}

void to_json(json& j, const StageState& s) {
  j = json{{"state", to_string(s.kind)}};
  if (s.exit_code) j["exit_code"] = *s.exit_code;
  if (s.reason) j["reason"] = to_string(*s.reason);
  if (!s.note.empty()) j["note"] = s.note;
}

void from_json(const json& j, StageState& s) {
  s.kind = stage_state_kind_from_string(j.at("state").get<std::string>());
  s.exit_code.reset();
  s.reason.reset();
  if (j.contains("exit_code")) s.exit_code = j.at("exit_code").get<int>();
  if (j.contains("reason")) s.reason = termination_reason_from_string(j.at("reason").get<std::string>());
  s.note = j.value("note", std::string{});
}

std::string_view to_string(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::kRunning: return "Running";
    case Verdict::Kind::kCompleted: return "Completed";
    case Verdict::Kind::kFailed: return "Failed";
  }
  return "Running";
}

bool condition_matches(const DependencyCondition& cond, int exit_code) {
  switch (cond.kind()) {
    case DependencyCondition::Kind::kSuccess: return exit_code == 0;
    case DependencyCondition::Kind::kFailure: return exit_code != 0;
    case DependencyCondition::Kind::kExitCodes: return cond.codes().count(exit_code) > 0;
    case DependencyCondition::Kind::kAlways: return true;
  }
  return false;
}

bool edge_satisfied(const DependencyCondition& cond, const StageOutcome& outcome) {
  using C = DependencyCondition::Kind;
  switch (outcome.kind) {
    case StageOutcome::Kind::kSkipped:
      return false;
    case StageOutcome::Kind::kKilled:
      return condition_matches(cond, kKilledExitCode);
    case StageOutcome::Kind::kSucceeded:
    case StageOutcome::Kind::kFailed:
      // A stage downgraded to Failed with exit 0 (missing output) must not
      // satisfy Success edges, so Success/Failure follow the outcome.
      if (cond.kind() == C::kSuccess) return outcome.kind == StageOutcome::Kind::kSucceeded;
      if (cond.kind() == C::kFailure) return outcome.kind == StageOutcome::Kind::kFailed;
      return condition_matches(cond, outcome.exit_code);
  }
  return false;
}

DependencyGraph::DependencyGraph(std::vector<std::string> stages, std::vector<Edge> edges)
    : names_(std::move(stages)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], i);
  out_edges_.resize(names_.size());
  in_edges_.resize(names_.size());
  states_.resize(names_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto up = index_of(edges_[e].upstream);
    const auto down = index_of(edges_[e].downstream);
    edge_up_.push_back(up);
    edge_down_.push_back(down);
    out_edges_[up].push_back(e);
    in_edges_[down].push_back(e);
  }
  resolution_.assign(edges_.size(), EdgeResolution::kUnresolved);
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (in_edges_[i].empty()) states_[i].kind = K::kReady;
  }
}

DependencyGraph DependencyGraph::build(const workflow::Workflow& wf) {
  std::vector<std::string> names;
  std::vector<Edge> edges;
  for (const auto& s : wf.stages) {
    names.push_back(s.name);
    for (const auto& d : s.dependencies) edges.push_back(Edge{d.upstream, s.name, d.condition});
  }
  return DependencyGraph(std::move(names), std::move(edges));
}

std::size_t DependencyGraph::index_of(std::string_view stage) const {
  auto it = index_.find(std::string(stage));
  if (it == index_.end()) {
    throw Error(ErrorCode::kUnknownStage, "unknown stage " + std::string(stage), {{"stage", stage}});
  }
  return it->second;
}

const StageState& DependencyGraph::state(std::string_view stage) const { return states_[index_of(stage)]; }

std::set<std::string> DependencyGraph::stages_in(StageState::Kind kind) const {
  std::set<std::string> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (states_[i].kind == kind) out.insert(names_[i]);
  }
  return out;
}

std::set<std::string> DependencyGraph::ran() const {
  std::set<std::string> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (states_[i].executed()) out.insert(names_[i]);
  }
  return out;
}

std::set<std::string> DependencyGraph::skipped() const { return stages_in(K::kSkipped); }

bool DependencyGraph::all_terminal() const {
  return std::all_of(states_.begin(), states_.end(), [](const StageState& s) { return s.terminal(); });
}

void DependencyGraph::set_progress(std::string_view stage, StageState::Kind kind) {
  const auto i = index_of(stage);
  auto& st = states_[i];
  const bool in_flight_kind = kind == K::kSubmitted || kind == K::kRunning || kind == K::kHeld || kind == K::kSuspended;
  if (!in_flight_kind || st.terminal() || st.kind == K::kPending) {
    throw Error(ErrorCode::kInvalidTransition,
                "stage " + std::string(stage) + " cannot move from " + std::string(to_string(st.kind)) + " to " +
                    std::string(to_string(kind)));
  }
  st.kind = kind;
}

void DependencyGraph::resolve_outgoing(std::size_t node, const StageOutcome& outcome) {
  for (auto e : out_edges_[node]) {
    resolution_[e] = edge_satisfied(edges_[e].condition, outcome) ? EdgeResolution::kSatisfied
                                                                  : EdgeResolution::kUnsatisfied;
  }
}

void DependencyGraph::settle_downstream(std::size_t node, TransitionSet& out) {
  std::vector<std::size_t> work{node};
  while (!work.empty()) {
    const auto u = work.back();
    work.pop_back();
    for (auto e : out_edges_[u]) {
      const auto d = edge_down_[e];
      if (states_[d].kind != K::kPending) continue;
      bool any_unsatisfied = false;
      bool all_satisfied = true;
      for (auto in : in_edges_[d]) {
        any_unsatisfied = any_unsatisfied || resolution_[in] == EdgeResolution::kUnsatisfied;
        all_satisfied = all_satisfied && resolution_[in] == EdgeResolution::kSatisfied;
      }
      if (any_unsatisfied) {
        // Never ran: every outgoing edge, Always included, is unsatisfied.
        states_[d] = StageState{K::kSkipped, std::nullopt, std::nullopt, {}};
        resolve_outgoing(d, StageOutcome::skipped());
        out.newly_skipped.insert(names_[d]);
        work.push_back(d);
      } else if (all_satisfied) {
        states_[d].kind = K::kReady;
        out.newly_ready.insert(names_[d]);
      }
    }
  }
}

TransitionSet DependencyGraph::on_stage_terminal(std::string_view stage, const StageOutcome& outcome) {
  const auto i = index_of(stage);
  if (states_[i].terminal()) {
    throw Error(ErrorCode::kAlreadyTerminal, "stage " + std::string(stage) + " is already terminal",
                {{"stage", stage}, {"state", to_string(states_[i].kind)}});
  }

  StageState next;
  switch (outcome.kind) {
    case StageOutcome::Kind::kSucceeded: next = StageState{K::kSucceeded, outcome.exit_code, std::nullopt, outcome.note}; break;
    case StageOutcome::Kind::kFailed: next = StageState{K::kFailed, outcome.exit_code, std::nullopt, outcome.note}; break;
    case StageOutcome::Kind::kKilled: next = StageState{K::kKilled, std::nullopt, outcome.reason, outcome.note}; break;
    case StageOutcome::Kind::kSkipped: next = StageState{K::kSkipped, std::nullopt, std::nullopt, outcome.note}; break;
  }
  states_[i] = next;
  resolve_outgoing(i, outcome);

  if (!aborted() && outcome.kind != StageOutcome::Kind::kSkipped) {
    const auto& outgoing = out_edges_[i];
    const std::string who = "stage " + names_[i];
    const std::string what = outcome.kind == StageOutcome::Kind::kKilled
                                 ? "killed (" + std::string(to_string(outcome.reason)) + ")"
                                 : "exit " + std::to_string(outcome.exit_code) +
                                       (outcome.note.empty() ? "" : " (" + outcome.note + ")");
    if (!outgoing.empty()) {
      bool any = std::any_of(outgoing.begin(), outgoing.end(),
                             [&](std::size_t e) { return resolution_[e] == EdgeResolution::kSatisfied; });
      if (!any) failures_.emplace(i, who + " " + what + " matched no dependency condition");
    } else if (outcome.kind != StageOutcome::Kind::kSucceeded) {
      failures_.emplace(i, who + " " + (outcome.kind == StageOutcome::Kind::kKilled ? what : "failed with " + what));
    }
  }

  TransitionSet out;
  settle_downstream(i, out);
  out.verdict = verdict();
  return out;
}

TransitionSet DependencyGraph::abort(const std::string& reason) {
  if (!abort_reason_) abort_reason_ = reason;
  TransitionSet out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (states_[i].kind == K::kReady) {
      states_[i] = StageState{K::kKilled, std::nullopt, TerminationReason::kCanceled, {}};
      out.newly_killed.insert(names_[i]);
    } else if (states_[i].kind == K::kPending) {
      states_[i] = StageState{K::kSkipped, std::nullopt, std::nullopt, {}};
      out.newly_skipped.insert(names_[i]);
    } else {
      continue;
    }
    for (auto e : out_edges_[i]) resolution_[e] = EdgeResolution::kUnsatisfied;
  }
  out.verdict = verdict();
  return out;
}

Verdict DependencyGraph::verdict() const {
  if (!failures_.empty()) return Verdict{Verdict::Kind::kFailed, failures_.begin()->second};
  if (abort_reason_) return Verdict{Verdict::Kind::kFailed, *abort_reason_};
  if (all_terminal()) return Verdict{Verdict::Kind::kCompleted, {}};
  return Verdict{Verdict::Kind::kRunning, {}};
}

Verdict job_verdict(const DependencyGraph& g) { return g.verdict(); }

json DependencyGraph::to_json() const {
  json edges = json::array();
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const char* res = resolution_[e] == EdgeResolution::kSatisfied     ? "satisfied"
                      : resolution_[e] == EdgeResolution::kUnsatisfied ? "unsatisfied"
                                                                       : "unresolved";
    edges.push_back(json{{"upstream", edges_[e].upstream},
                         {"downstream", edges_[e].downstream},
                         {"condition", edges_[e].condition},
                         {"resolution", res}});
  }
  json states = json::object();
  for (std::size_t i = 0; i < names_.size(); ++i) states[names_[i]] = states_[i];
  json failures = json::object();
  for (const auto& [i, why] : failures_) failures[names_[i]] = why;
  json j{{"stages", names_}, {"edges", std::move(edges)}, {"states", std::move(states)}, {"failures", std::move(failures)}};
  if (abort_reason_) j["abort_reason"] = *abort_reason_;
  return j;
}

DependencyGraph DependencyGraph::from_json(const json& j) {
  std::vector<Edge> edges;
  std::vector<std::string> resolutions;
  for (const auto& e : j.at("edges")) {
    edges.push_back(Edge{e.at("upstream").get<std::string>(), e.at("downstream").get<std::string>(),
                         e.at("condition").get<DependencyCondition>()});
    resolutions.push_back(e.value("resolution", std::string("unresolved")));
  }
  DependencyGraph g(j.at("stages").get<std::vector<std::string>>(), std::move(edges));
  for (std::size_t e = 0; e < resolutions.size(); ++e) {
    g.resolution_[e] = resolutions[e] == "satisfied"     ? EdgeResolution::kSatisfied
                       : resolutions[e] == "unsatisfied" ? EdgeResolution::kUnsatisfied
                                                         : EdgeResolution::kUnresolved;
  }
  for (const auto& [name, st] : j.at("states").items()) g.states_[g.index_of(name)] = st.get<StageState>();
  const json failures = j.value("failures", json::object());
  for (const auto& [name, why] : failures.items()) {
    g.failures_.emplace(g.index_of(name), why.get<std::string>());
  }
  if (j.contains("abort_reason")) g.abort_reason_ = j.at("abort_reason").get<std::string>();
  return g;
}

}  // namespace jms::deps
