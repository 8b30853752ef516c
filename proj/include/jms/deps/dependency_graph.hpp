#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "jms/common/types.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::deps {

using workflow::DependencyCondition;

struct StageState {
  enum class Kind { kPending, kReady, kSubmitted, kRunning, kHeld, kSuspended, kSucceeded, kFailed, kSkipped, kKilled };

  Kind kind = Kind::kPending;
  std::optional<int> exit_code;               // present iff the process ran to completion
  std::optional<TerminationReason> reason;    // present iff kKilled
  std::string note;

  bool terminal() const {
    return kind == Kind::kSucceeded || kind == Kind::kFailed || kind == Kind::kSkipped || kind == Kind::kKilled;
  }
  bool executed() const { return kind == Kind::kSucceeded || kind == Kind::kFailed || kind == Kind::kKilled; }

  friend bool operator==(const StageState&, const StageState&) = default;
};

std::string_view to_string(StageState::Kind k);
StageState::Kind stage_state_kind_from_string(std::string_view s);
void to_json(nlohmann::json& j, const StageState& s);
void from_json(const nlohmann::json& j, StageState& s);

// How a stage ended, as reported to the engine.
struct StageOutcome {
  enum class Kind { kSucceeded, kFailed, kKilled, kSkipped };

  Kind kind = Kind::kSucceeded;
  int exit_code = 0;
  TerminationReason reason = TerminationReason::kCanceled;
  std::string note;

  static StageOutcome exited(int code) {
    code = ((code % 256) + 256) % 256;
    return StageOutcome{code == 0 ? Kind::kSucceeded : Kind::kFailed, code, {}, {}};
  }
  static StageOutcome failed(int code, std::string note) {
    return StageOutcome{Kind::kFailed, ((code % 256) + 256) % 256, {}, std::move(note)};
  }
  static StageOutcome killed(TerminationReason r) { return StageOutcome{Kind::kKilled, kKilledExitCode, r, {}}; }
  static StageOutcome skipped() { return StageOutcome{Kind::kSkipped, 0, {}, {}}; }
};

struct Verdict {
  enum class Kind { kRunning, kCompleted, kFailed };

  Kind kind = Kind::kRunning;
  std::string reason;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

std::string_view to_string(Verdict::Kind k);

struct TransitionSet {
  std::set<std::string> newly_ready;
  std::set<std::string> newly_skipped;
  std::set<std::string> newly_killed;  // only produced by abort()
  Verdict verdict;
};

// Success <-> exit 0; Failure <-> exit != 0; ExitCodes(S) <-> exit in S;
// Always <-> true.
bool condition_matches(const DependencyCondition& cond, int exit_code);

// Whether an edge out of a finished stage is satisfied. Succeeded/Failed
// decide Success/Failure by outcome and ExitCodes by the exit code; a killed
// stage behaves as a failure with exit 271; a skipped stage satisfies nothing.
bool edge_satisfied(const DependencyCondition& cond, const StageOutcome& outcome);

// The per-job conditional dependency state machine. Single owner; copy it
// to hand a snapshot to readers.
class DependencyGraph {
 public:
  struct Edge {
    std::string upstream;
    std::string downstream;
    DependencyCondition condition;
  };

  DependencyGraph() = default;
  DependencyGraph(std::vector<std::string> stages, std::vector<Edge> edges);

  // Precondition: validate_workflow(wf) is empty.
  static DependencyGraph build(const workflow::Workflow& wf);

  const std::vector<std::string>& stages() const { return names_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool contains(std::string_view stage) const { return index_.count(std::string(stage)) > 0; }
  const StageState& state(std::string_view stage) const;

  std::set<std::string> stages_in(StageState::Kind kind) const;
  std::set<std::string> ran() const;
  std::set<std::string> skipped() const;
  bool all_terminal() const;

  // Records a non-terminal progress state (Submitted, Running, Held,
  // Suspended) for a stage that is Ready or already in flight.
  void set_progress(std::string_view stage, StageState::Kind kind);

  // Throws kUnknownStage or kAlreadyTerminal.
  TransitionSet on_stage_terminal(std::string_view stage, const StageOutcome& outcome);

  // Stops the job: Pending stages become Skipped and Ready (not yet
  // submitted) stages become Killed(Canceled). In-flight stages are left for
  // the caller to cancel; their later outcomes no longer trigger the failure
  // rules or make anything ready. The verdict becomes Failed(reason) unless
  // a failure rule already fired.
  TransitionSet abort(const std::string& reason);
  bool aborted() const { return abort_reason_.has_value(); }

  Verdict verdict() const;

  nlohmann::json to_json() const;
  static DependencyGraph from_json(const nlohmann::json& j);

 private:
  enum class EdgeResolution { kUnresolved, kSatisfied, kUnsatisfied };

  std::size_t index_of(std::string_view stage) const;
  void settle_downstream(std::size_t node, TransitionSet& out);
  void resolve_outgoing(std::size_t node, const StageOutcome& outcome);

  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> edge_up_;
  std::vector<std::size_t> edge_down_;
  std::vector<EdgeResolution> resolution_;
  std::vector<std::vector<std::size_t>> out_edges_;
  std::vector<std::vector<std::size_t>> in_edges_;
  std::vector<StageState> states_;
  // Stage index -> failure description, for stages that fired a failure rule.
  std::map<std::size_t, std::string> failures_;
  std::optional<std::string> abort_reason_;
};

Verdict job_verdict(const DependencyGraph& g);

}  // namespace jms::deps
