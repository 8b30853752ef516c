#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jms/workflow/workflow.hpp"

namespace jms::workflow {

struct ZipEntry {
  std::string name;
  std::string data;
};

// Minimal ZIP container (deflate, no zip64). Timestamps are pinned to the
// DOS epoch so identical input gives identical bytes.
std::string zip_write(const std::vector<ZipEntry>& entries);

// Throws kCorruptArchive on any structural, size or CRC mismatch.
std::vector<ZipEntry> zip_read(std::string_view bytes);

inline constexpr std::string_view kManifestName = "manifest.json";
inline constexpr std::string_view kScriptPrefix = "scripts/";
inline constexpr std::string_view kManifestFormat = "jms-workflow/1";

using ScriptSource = std::function<std::optional<std::string>(const std::string& name)>;

// Script names in archive order: by first referencing stage, then
// lexicographic within a stage.
std::vector<std::string> ordered_script_names(const Workflow& wf);

std::string manifest_json(const Workflow& wf, const std::map<std::string, std::string>& scripts);

// Throws kValidation (invalid workflow) or kMissingScript.
std::string export_workflow(const Workflow& wf, const ScriptSource& scripts);

struct ImportedWorkflow {
  Workflow workflow;
  std::map<std::string, std::string> scripts;
};

// Throws kCorruptArchive or kInvalidManifest (details carry violations).
ImportedWorkflow import_workflow(std::string_view archive, const std::string& new_owner, const std::string& new_id);

}  // namespace jms::workflow
