#pragma once

#include <chrono>
#include <filesystem>
#include <memory>

#include "jms/cluster/adapter.hpp"
#include "jms/cluster/executor.hpp"
#include "jms/common/clock.hpp"
#include "jms/history/accounting.hpp"
#include "jms/history/blob_store.hpp"
#include "jms/history/history_store.hpp"
#include "jms/history/poller.hpp"
#include "jms/orchestrator/orchestrator.hpp"
#include "jms/orchestrator/workflow_store.hpp"

namespace jms::api {

struct ServicesOptions {
  std::filesystem::path data_dir = "data";
  const Clock* clock = nullptr;                 // null: system clock
  std::shared_ptr<cluster::Launcher> launcher;  // null: real processes
  cluster::ServerSettings settings;             // first start only
  std::chrono::milliseconds poll_interval = history::kDefaultPollInterval;
  // Adds a node sized to this host when the cluster has none.
  bool bootstrap_local_node = true;
};

// Every primary module wired together over one data directory:
//   <data>/cluster/state.json, <data>/blobs/, <data>/history/,
//   <data>/accounting.jsonl, <data>/workflows/, <data>/users/.
class Services {
 public:
  explicit Services(ServicesOptions opts);
  ~Services();
  Services(const Services&) = delete;
  Services& operator=(const Services&) = delete;

  // Starts the executor loop and the poller.
  void start();
  // Stops the poller, then the executor loop; idempotent.
  void stop();

  const std::filesystem::path& data_dir() const { return data_dir_; }
  const Clock& clock() const { return *clock_; }

  cluster::Executor& executor() { return *executor_; }
  cluster::ResourceManagerAdapter& adapter() { return *adapter_; }
  history::BlobStore& blobs() { return *blobs_; }
  history::AccountingLog& accounting() { return *accounting_; }
  history::HistoryStore& history() { return *history_; }
  history::HistoryCache& cache() { return *cache_; }
  orchestrator::WorkflowStore& workflows() { return *workflows_; }
  orchestrator::Orchestrator& orchestrator() { return *orchestrator_; }
  history::Poller& poller() { return *poller_; }

 private:
  std::filesystem::path data_dir_;
  std::unique_ptr<Clock> owned_clock_;
  const Clock* clock_;
  std::chrono::milliseconds poll_interval_;
  std::unique_ptr<history::BlobStore> blobs_;
  std::unique_ptr<history::AccountingLog> accounting_;
  std::unique_ptr<history::HistoryStore> history_;
  std::unique_ptr<history::HistoryCache> cache_;
  std::unique_ptr<orchestrator::WorkflowStore> workflows_;
  std::unique_ptr<cluster::Executor> executor_;
  std::unique_ptr<cluster::EmbeddedAdapter> adapter_;
  std::unique_ptr<orchestrator::Orchestrator> orchestrator_;
  std::unique_ptr<history::Poller> poller_;
  bool started_ = false;
};

}  // namespace jms::api
