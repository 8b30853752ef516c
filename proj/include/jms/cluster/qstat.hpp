#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jms/cluster/types.hpp"

namespace jms::cluster {

// Flat `qstat -f` attribute map, keyed by Torque attribute name.
using QstatRecord = std::map<std::string, std::string>;

// job_state letters: Q queued, H held, R running, S suspended, C complete.
char job_state_letter(JobState s);

// `live` overrides job.resources_used for jobs still holding resources.
QstatRecord qstat_record(const ClusterJob& job, const ResourcesUsed& live);

// HH:MM:SS, hours unbounded.
std::string format_duration(double seconds);
double parse_duration(const std::string& text);

// "Job Id: <id>" followed by one "    attr = value" line per attribute.
std::string format_qstat(const std::string& id, const QstatRecord& rec);
// Accepts any number of concatenated records separated by blank lines.
std::vector<std::pair<std::string, QstatRecord>> parse_qstat(const std::string& text);

}  // namespace jms::cluster
