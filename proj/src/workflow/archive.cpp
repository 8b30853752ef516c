#include "jms/workflow/archive.hpp"

#include <algorithm>
#include <set>

#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::workflow {

using nlohmann::json;

std::vector<std::string> ordered_script_names(const Workflow& wf) {
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const auto& stage : wf.stages) {
    std::vector<std::string> names(stage.scripts.begin(), stage.scripts.end());
    std::sort(names.begin(), names.end());
    for (auto& n : names) {
      if (seen.insert(n).second) order.push_back(std::move(n));
    }
  }
  return order;
}

std::string manifest_json(const Workflow& wf, const std::map<std::string, std::string>& scripts) {
  json listed = json::array();
  for (const auto& name : ordered_script_names(wf)) {
    const auto& bytes = scripts.at(name);
    listed.push_back(json{{"name", name}, {"sha256", crypto::sha256_hex(bytes)}, {"size", bytes.size()}});
  }
  json doc{{"format", kManifestFormat},
           {"name", wf.name},
           {"description", wf.description},
           {"stages", wf.stages},
           {"scripts", std::move(listed)}};
  return doc.dump(2) + "\n";
}

std::string export_workflow(const Workflow& wf, const ScriptSource& scripts) {
  if (auto report = validate_workflow(wf); !report.empty()) {
    throw Error(ErrorCode::kValidation, "workflow is invalid", json(report));
  }
  std::map<std::string, std::string> bytes;
  for (const auto& name : ordered_script_names(wf)) {
    auto content = scripts ? scripts(name) : std::nullopt;
    if (!content) throw Error(ErrorCode::kMissingScript, "missing script " + name, {{"script", name}});
    bytes.emplace(name, std::move(*content));
  }

  std::vector<ZipEntry> entries;
  entries.push_back(ZipEntry{std::string(kManifestName), manifest_json(wf, bytes)});
  for (const auto& name : ordered_script_names(wf)) {
    entries.push_back(ZipEntry{std::string(kScriptPrefix) + name, bytes.at(name)});
  }
  return zip_write(entries);
}

ImportedWorkflow import_workflow(std::string_view archive, const std::string& new_owner, const std::string& new_id) {
  const auto entries = zip_read(archive);

  const ZipEntry* manifest = nullptr;
  std::map<std::string, std::string> files;
  for (const auto& e : entries) {
    if (e.name == kManifestName) {
      manifest = &e;
    } else if (e.name.rfind(kScriptPrefix, 0) == 0) {
      auto name = e.name.substr(kScriptPrefix.size());
      if (!fs::is_plain_name(name)) throw Error(ErrorCode::kCorruptArchive, "bad script entry " + e.name);
      files.emplace(std::move(name), e.data);
    }
  }
  if (manifest == nullptr) throw Error(ErrorCode::kCorruptArchive, "archive has no manifest.json");

  ImportedWorkflow out;
  json doc;
  try {
    doc = json::parse(manifest->data);
    if (doc.value("format", std::string{}) != kManifestFormat) {
      throw Error(ErrorCode::kInvalidManifest, "unsupported manifest format");
    }
    out.workflow.name = doc.at("name").get<std::string>();
    out.workflow.description = doc.value("description", std::string{});
    out.workflow.stages = doc.at("stages").get<std::vector<Stage>>();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidManifest) throw;
    throw Error(ErrorCode::kInvalidManifest, std::string("invalid manifest: ") + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidManifest, std::string("invalid manifest: ") + e.what());
  }
  out.workflow.id = new_id;
  out.workflow.owner = new_owner;

  if (auto report = validate_workflow(out.workflow); !report.empty()) {
    throw Error(ErrorCode::kInvalidManifest, "manifest describes an invalid workflow", json(report));
  }

  for (const auto& entry : doc.value("scripts", json::array())) {
    const auto name = entry.at("name").get<std::string>();
    auto it = files.find(name);
    if (it == files.end()) throw Error(ErrorCode::kCorruptArchive, "archive lacks script " + name);
    if (crypto::sha256_hex(it->second) != entry.value("sha256", std::string{})) {
      throw Error(ErrorCode::kCorruptArchive, "script digest mismatch for " + name);
    }
    out.scripts.emplace(name, it->second);
  }
  for (const auto& name : out.workflow.script_names()) {
    if (!out.scripts.count(name)) throw Error(ErrorCode::kCorruptArchive, "archive lacks script " + name);
  }
  return out;
}

}  // namespace jms::workflow
