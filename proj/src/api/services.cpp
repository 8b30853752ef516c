#include "jms/api/services.hpp"

#include <unistd.h>

#include <thread>

namespace jms::api {

Services::Services(ServicesOptions opts) : data_dir_(std::move(opts.data_dir)), poll_interval_(opts.poll_interval) {
  if (opts.clock) {
    clock_ = opts.clock;
  } else {
    owned_clock_ = std::make_unique<SystemClock>();
    clock_ = owned_clock_.get();
  }
  std::filesystem::create_directories(data_dir_ / "cluster");
  blobs_ = std::make_unique<history::BlobStore>(data_dir_ / "blobs");
  accounting_ = std::make_unique<history::AccountingLog>(data_dir_ / "accounting.jsonl");
  history_ = std::make_unique<history::HistoryStore>(data_dir_ / "history");
  cache_ = std::make_unique<history::HistoryCache>(*history_);
  workflows_ = std::make_unique<orchestrator::WorkflowStore>(data_dir_ / "workflows", *clock_);

  cluster::ExecutorOptions eo;
  eo.clock = clock_;
  eo.launcher = opts.launcher;
  eo.state_file = data_dir_ / "cluster" / "state.json";
  eo.disk_path = data_dir_;
  eo.settings = opts.settings;
  executor_ = std::make_unique<cluster::Executor>(eo);
  if (opts.bootstrap_local_node && executor_->nodes().empty()) {
    const int cores = std::max(1u, std::thread::hardware_concurrency());
    const long pages = ::sysconf(_SC_PHYS_PAGES);
    const long page_size = ::sysconf(_SC_PAGE_SIZE);
    const std::int64_t memory = pages > 0 && page_size > 0 ? std::int64_t{pages} * page_size : 1LL << 30;
    executor_->add_node("localhost", cores, memory);
  }
  adapter_ = std::make_unique<cluster::EmbeddedAdapter>(*executor_);
  orchestrator_ = std::make_unique<orchestrator::Orchestrator>(data_dir_, *executor_, *adapter_, *blobs_, *accounting_,
                                                               *cache_, *clock_);
  poller_ = std::make_unique<history::Poller>(
      *executor_, *adapter_, *clock_, [this](const std::string& id, const ResourcesUsed& used, Timestamp at) {
        return orchestrator_->record_usage(id, used, at);
      });
}

Services::~Services() { stop(); }

void Services::start() {
  if (started_) return;
  started_ = true;
  executor_->start();
  poller_->start(poll_interval_);
}

void Services::stop() {
  if (poller_) poller_->stop();
  if (executor_) executor_->stop();
  started_ = false;
}

}  // namespace jms::api
