#pragma once

#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "jms/common/types.hpp"

namespace jms {

// Totally ordered: a higher level implies every lower one.
enum class Permission { kNone = 0, kView = 1, kRun = 2, kEdit = 3 };

std::string_view to_string(Permission p);
Permission permission_from_string(std::string_view s);  // throws kBadRequest

// Direct grants on one resource.
struct Grants {
  std::map<std::string, Permission> users;
  std::map<std::string, Permission> groups;

  friend bool operator==(const Grants&, const Grants&) = default;
};

void to_json(nlohmann::json& j, const Grants& g);
void from_json(const nlohmann::json& j, Grants& g);

// Owner and admins hold Edit; everyone else gets the highest of their user
// grant and the grants of every group they belong to.
Permission effective_permission(const std::string& owner, const Grants& grants, const Requester& who);

inline bool allows(Permission have, Permission need) { return static_cast<int>(have) >= static_cast<int>(need); }

}  // namespace jms
