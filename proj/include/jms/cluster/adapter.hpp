#pragma once

#include <string>

#include "jms/cluster/executor.hpp"
#include "jms/cluster/qstat.hpp"
#include "jms/cluster/types.hpp"

namespace jms::cluster {

// The only coupling point between the orchestrator and a resource manager.
// A Torque-backed implementation would shell out to qsub/qstat/qdel/qhold/qrls/qsig.
class ResourceManagerAdapter {
 public:
  virtual ~ResourceManagerAdapter() = default;
  virtual std::string submit(const JobSpec& spec, bool hold) = 0;
  virtual QstatRecord status(const std::string& id) = 0;
  virtual void cancel(const std::string& id) = 0;
  virtual void hold(const std::string& id) = 0;
  virtual void release(const std::string& id) = 0;
  virtual void suspend(const std::string& id) = 0;
  virtual void resume(const std::string& id) = 0;
};

class EmbeddedAdapter final : public ResourceManagerAdapter {
 public:
  explicit EmbeddedAdapter(Executor& executor) : executor_(executor) {}

  std::string submit(const JobSpec& spec, bool hold) override { return executor_.submit(spec, hold); }
  // Round-trips through the qstat text format, as a Torque adapter would.
  QstatRecord status(const std::string& id) override {
    return parse_qstat(format_qstat(id, executor_.query_status(id))).at(0).second;
  }
  void cancel(const std::string& id) override { executor_.cancel(id); }
  void hold(const std::string& id) override { executor_.hold(id); }
  void release(const std::string& id) override { executor_.release(id); }
  void suspend(const std::string& id) override { executor_.suspend(id); }
  void resume(const std::string& id) override { executor_.resume(id); }

 private:
  Executor& executor_;
};

}  // namespace jms::cluster
