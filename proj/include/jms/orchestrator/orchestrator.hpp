#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jms/cluster/adapter.hpp"
#include "jms/cluster/executor.hpp"
#include "jms/history/accounting.hpp"
#include "jms/history/blob_store.hpp"
#include "jms/history/history_store.hpp"
#include "jms/orchestrator/job.hpp"

namespace jms::orchestrator {

struct SubmitRequest {
  workflow::Workflow workflow;                  // copied into the job
  std::map<std::string, std::string> scripts;   // name -> content
  workflow::InputValues inputs;                 // already resolved
  std::map<std::string, std::string> files;     // uploaded input files, name -> bytes
};

// Owns every Job. Submits ready stages through the adapter and advances the
// dependency graph from executor epilogues. All job state sits behind one
// lock, which is always taken before any executor call.
//
// Access: the owner and admins hold Edit, shares grant View. A requester
// without View sees kUnknownJob, never kPermissionDenied.
class Orchestrator {
 public:
  Orchestrator(std::filesystem::path data_dir, cluster::Executor& executor, cluster::ResourceManagerAdapter& adapter,
               history::BlobStore& blobs, history::AccountingLog& accounting, history::HistoryCache& cache,
               const Clock& clock);
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  Job submit(const SubmitRequest& req, const std::string& owner);
  // Rows are resolved against `profile` then submitted in order. The first
  // failing row throws kRowError carrying the line and the ids submitted so far.
  std::vector<std::string> batch_submit(const SubmitRequest& base, const workflow::InputProfile* profile,
                                        const std::vector<workflow::BatchRow>& rows, const std::string& owner);
  Job repeat(const std::string& job_id, const std::optional<std::string>& from_stage, const Requester& who);

  Job cancel(const std::string& job_id, const Requester& who);
  Job hold(const std::string& job_id, const Requester& who);
  Job release(const std::string& job_id, const Requester& who);
  Job suspend_stage(const std::string& job_id, const std::string& stage, const Requester& who);
  Job resume_stage(const std::string& job_id, const std::string& stage, const Requester& who);

  AlterationRequest request_alteration(const std::string& job_id, const nlohmann::json& changes, const Requester& who);
  AlterationRequest decide_alteration(const std::string& request_id, bool approve, const Requester& who);
  std::vector<AlterationRequest> alterations(const std::string& job_id, const Requester& who);
  // Every request across jobs; administrators only.
  std::vector<AlterationRequest> all_alterations(const Requester& who);

  void delete_job(const std::string& job_id, const Requester& who);
  void share_job(const std::string& job_id, const std::string& subject, bool is_group, const Requester& who);

  // Reads come from the history cache and never touch the executor.
  Job job(const std::string& job_id, const Requester& who);
  std::vector<Job> jobs(const Requester& who);
  // A regular file inside the job's working directory.
  std::filesystem::path job_file(const std::string& job_id, const std::string& rel, const Requester& who);

  // Poller sink: refreshes resources_used and samples of a live stage only.
  bool record_usage(const std::string& cluster_id, const ResourcesUsed& used, Timestamp at);

  std::filesystem::path working_dir_of(const std::string& owner, const std::string& job_id) const;
  // Blobs still referenced by some job.
  std::set<std::string> referenced_blobs();

 private:
  struct Location {
    std::string job_id;
    std::string stage;
  };

  void on_prologue(const cluster::ClusterJob& cj);
  void on_epilogue(const cluster::ClusterJob& cj);

  Job& access_locked(const std::string& job_id, const Requester& who, Permission need);
  Job materialize_locked(const SubmitRequest& req, const std::string& owner);
  void start_locked(Job& job, deps::TransitionSet t);
  void apply_locked(Job& job, const deps::TransitionSet& t);
  void submit_stage_locked(Job& job, StageRun& run);
  void finish_stage_locked(Job& job, StageRun& run, const deps::StageOutcome& outcome);
  void epilogue_locked(Job& job, StageRun& run, const cluster::ClusterJob& cj);
  void abort_locked(Job& job, const std::string& reason);
  void snapshot_locked(Job& job, StageRun& run);
  void sync_locked(Job& job);
  void persist_locked(const Job& job);
  void persist_locked(const AlterationRequest& a);
  void apply_alteration_locked(Job& job, AlterationRequest& a);
  void recover_locked();
  std::set<std::string> referenced_blobs_locked();
  void collect_garbage_locked();

  std::filesystem::path data_dir_;
  cluster::Executor& executor_;
  cluster::ResourceManagerAdapter& adapter_;
  history::BlobStore& blobs_;
  history::AccountingLog& accounting_;
  history::HistoryCache& cache_;
  const Clock& clock_;

  std::mutex mu_;
  std::map<std::string, Job> jobs_;
  std::map<std::string, Location> by_cluster_id_;
  std::map<std::string, AlterationRequest> alterations_;
};

// Checks a change set; throws kInvalidChange.
void validate_changes(const nlohmann::json& changes);

}  // namespace jms::orchestrator
