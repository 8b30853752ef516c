#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "jms/common/access.hpp"
#include "jms/common/clock.hpp"
#include "jms/workflow/workflow.hpp"

namespace jms::orchestrator {

struct StoredWorkflow {
  workflow::Workflow workflow;
  Grants grants;
};

// Workflow definitions with their uploaded scripts, input profiles and
// grants, laid out as <root>/<wf_id>/{workflow.json,scripts/<name>}.
// Stored definitions always pass validate_workflow. Permission checks are
// the caller's business.
class WorkflowStore {
 public:
  WorkflowStore(std::filesystem::path root, const Clock& clock);

  // Assigns id and timestamps. Throws kValidation with the violations.
  workflow::Workflow create(workflow::Workflow wf, const std::string& owner);
  // Keeps id, owner and created time. Throws kNotFound or kValidation.
  workflow::Workflow update(const std::string& id, workflow::Workflow wf);
  void remove(const std::string& id);
  StoredWorkflow get(const std::string& id) const;  // throws kNotFound
  std::vector<StoredWorkflow> list() const;

  void set_grant(const std::string& id, const std::string& subject, bool is_group, Permission level);

  // Throws kBadRequest for names that are not plain file names.
  void put_script(const std::string& id, const std::string& name, std::string_view content);
  std::optional<std::string> script(const std::string& id, const std::string& name) const;
  // Every script the workflow references; throws kMissingScript.
  std::map<std::string, std::string> referenced_scripts(const std::string& id) const;
  std::filesystem::path scripts_dir(const std::string& id) const;

  workflow::InputProfile create_profile(const std::string& wf_id, workflow::InputProfile p);
  workflow::InputProfile update_profile(const std::string& wf_id, const std::string& pid, workflow::InputProfile p);
  void remove_profile(const std::string& wf_id, const std::string& pid);
  workflow::InputProfile profile(const std::string& wf_id, const std::string& pid) const;
  std::vector<workflow::InputProfile> profiles(const std::string& wf_id) const;

 private:
  struct Entry {
    StoredWorkflow stored;
    std::map<std::string, workflow::InputProfile> profiles;
  };

  Entry& find_locked(const std::string& id);
  const Entry& find_locked(const std::string& id) const;
  void persist_locked(const Entry& e);
  void check_profile_locked(const Entry& e, const workflow::InputProfile& p) const;

  std::filesystem::path root_;
  const Clock& clock_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
};

}  // namespace jms::orchestrator
