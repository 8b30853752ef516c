#include "jms/orchestrator/workflow_store.hpp"

#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::orchestrator {

namespace {

void require_valid(const workflow::Workflow& wf) {
  auto report = workflow::validate_workflow(wf);
  if (!report.empty()) throw Error(ErrorCode::kValidation, "workflow is invalid", nlohmann::json(report));
}

}  // namespace

WorkflowStore::WorkflowStore(std::filesystem::path root, const Clock& clock) : root_(std::move(root)), clock_(clock) {
  std::filesystem::create_directories(root_);
  for (const auto& dirent : std::filesystem::directory_iterator(root_)) {
    auto doc = fs::read_json(dirent.path() / "workflow.json");
    if (!doc) continue;
    Entry e;
    e.stored.workflow = doc->at("workflow").get<workflow::Workflow>();
    e.stored.grants = doc->at("grants").get<Grants>();
    for (const auto& p : doc->at("profiles")) {
      auto prof = p.get<workflow::InputProfile>();
      e.profiles[prof.id] = prof;
    }
    entries_[e.stored.workflow.id] = std::move(e);
  }
}

WorkflowStore::Entry& WorkflowStore::find_locked(const std::string& id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::kNotFound, "no workflow '" + id + "'");
  return it->second;
}

const WorkflowStore::Entry& WorkflowStore::find_locked(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::kNotFound, "no workflow '" + id + "'");
  return it->second;
}

void WorkflowStore::persist_locked(const Entry& e) {
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& [_, p] : e.profiles) profiles.push_back(p);
  fs::write_json_atomic(root_ / e.stored.workflow.id / "workflow.json",
                        {{"workflow", e.stored.workflow}, {"grants", e.stored.grants}, {"profiles", profiles}});
}

workflow::Workflow WorkflowStore::create(workflow::Workflow wf, const std::string& owner) {
  require_valid(wf);
  std::lock_guard lock(mu_);
  do {
    wf.id = crypto::random_hex(8);
  } while (entries_.count(wf.id));
  wf.owner = owner;
  wf.created_ms = wf.modified_ms = to_millis(clock_.now());
  std::filesystem::create_directories(scripts_dir(wf.id));
  Entry e;
  e.stored.workflow = wf;
  persist_locked(e);
  entries_[wf.id] = std::move(e);
  return wf;
}

workflow::Workflow WorkflowStore::update(const std::string& id, workflow::Workflow wf) {
  require_valid(wf);
  std::lock_guard lock(mu_);
  auto& e = find_locked(id);
  wf.id = id;
  wf.owner = e.stored.workflow.owner;
  wf.created_ms = e.stored.workflow.created_ms;
  wf.modified_ms = to_millis(clock_.now());
  e.stored.workflow = wf;
  persist_locked(e);
  return wf;
}

void WorkflowStore::remove(const std::string& id) {
  std::lock_guard lock(mu_);
  find_locked(id);
  entries_.erase(id);
  std::filesystem::remove_all(root_ / id);
}

StoredWorkflow WorkflowStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  return find_locked(id).stored;
}

std::vector<StoredWorkflow> WorkflowStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<StoredWorkflow> out;
  for (const auto& [_, e] : entries_) out.push_back(e.stored);
  return out;
}

void WorkflowStore::set_grant(const std::string& id, const std::string& subject, bool is_group, Permission level) {
  std::lock_guard lock(mu_);
  auto& e = find_locked(id);
  auto& table = is_group ? e.stored.grants.groups : e.stored.grants.users;
  if (level == Permission::kNone) {
    table.erase(subject);
  } else {
    table[subject] = level;
  }
  persist_locked(e);
}

std::filesystem::path WorkflowStore::scripts_dir(const std::string& id) const { return root_ / id / "scripts"; }

void WorkflowStore::put_script(const std::string& id, const std::string& name, std::string_view content) {
  if (!fs::is_plain_name(name)) throw Error(ErrorCode::kBadRequest, "script name must be a plain file name");
  std::lock_guard lock(mu_);
  auto& e = find_locked(id);
  std::filesystem::create_directories(scripts_dir(id));
  fs::write_file_atomic(scripts_dir(id) / name, content);
  e.stored.workflow.modified_ms = to_millis(clock_.now());
  persist_locked(e);
}

std::optional<std::string> WorkflowStore::script(const std::string& id, const std::string& name) const {
  if (!fs::is_plain_name(name)) return std::nullopt;
  std::lock_guard lock(mu_);
  find_locked(id);
  const auto p = scripts_dir(id) / name;
  if (!std::filesystem::is_regular_file(p)) return std::nullopt;
  return fs::read_file(p);
}

std::map<std::string, std::string> WorkflowStore::referenced_scripts(const std::string& id) const {
  std::map<std::string, std::string> out;
  const auto wf = get(id).workflow;
  for (const auto& name : wf.script_names()) {
    auto body = script(id, name);
    if (!body) throw Error(ErrorCode::kMissingScript, "script '" + name + "' has not been uploaded", {{"name", name}});
    out[name] = std::move(*body);
  }
  return out;
}

void WorkflowStore::check_profile_locked(const Entry& e, const workflow::InputProfile& p) const {
  const auto params = e.stored.workflow.parameters();
  for (const auto& [name, _] : p.values) {
    if (!params.count(name)) {
      throw Error(ErrorCode::kUnknownParameter, "profile sets undeclared parameter '" + name + "'", {{"name", name}});
    }
  }
}

workflow::InputProfile WorkflowStore::create_profile(const std::string& wf_id, workflow::InputProfile p) {
  std::lock_guard lock(mu_);
  auto& e = find_locked(wf_id);
  check_profile_locked(e, p);
  do {
    p.id = crypto::random_hex(6);
  } while (e.profiles.count(p.id));
  p.workflow_id = wf_id;
  e.profiles[p.id] = p;
  persist_locked(e);
  return p;
}

workflow::InputProfile WorkflowStore::update_profile(const std::string& wf_id, const std::string& pid,
                                                     workflow::InputProfile p) {
  std::lock_guard lock(mu_);
  auto& e = find_locked(wf_id);
  if (!e.profiles.count(pid)) throw Error(ErrorCode::kNotFound, "no profile '" + pid + "'");
  check_profile_locked(e, p);
  p.id = pid;
  p.workflow_id = wf_id;
  e.profiles[pid] = p;
  persist_locked(e);
  return p;
}

void WorkflowStore::remove_profile(const std::string& wf_id, const std::string& pid) {
  std::lock_guard lock(mu_);
  auto& e = find_locked(wf_id);
  if (!e.profiles.erase(pid)) throw Error(ErrorCode::kNotFound, "no profile '" + pid + "'");
  persist_locked(e);
}

workflow::InputProfile WorkflowStore::profile(const std::string& wf_id, const std::string& pid) const {
  std::lock_guard lock(mu_);
  const auto& e = find_locked(wf_id);
  auto it = e.profiles.find(pid);
  if (it == e.profiles.end()) throw Error(ErrorCode::kNotFound, "no profile '" + pid + "'");
  return it->second;
}

std::vector<workflow::InputProfile> WorkflowStore::profiles(const std::string& wf_id) const {
  std::lock_guard lock(mu_);
  std::vector<workflow::InputProfile> out;
  for (const auto& [_, p] : find_locked(wf_id).profiles) out.push_back(p);
  return out;
}

}  // namespace jms::orchestrator
