#include "jms/common/access.hpp"

#include <algorithm>

#include "jms/common/error.hpp"

namespace jms {

std::string_view to_string(Permission p) {
  switch (p) {
    case Permission::kNone: return "None";
    case Permission::kView: return "View";
    case Permission::kRun: return "Run";
    case Permission::kEdit: return "Edit";
  }
  return "None";
}

Permission permission_from_string(std::string_view s) {
  for (auto p : {Permission::kNone, Permission::kView, Permission::kRun, Permission::kEdit}) {
    if (to_string(p) == s) return p;
  }
  throw Error(ErrorCode::kBadRequest, "unknown permission level '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const Grants& g) {
  j = nlohmann::json{{"users", nlohmann::json::object()}, {"groups", nlohmann::json::object()}};
  for (const auto& [u, p] : g.users) j["users"][u] = to_string(p);
  for (const auto& [n, p] : g.groups) j["groups"][n] = to_string(p);
}

void from_json(const nlohmann::json& j, Grants& g) {
  g = Grants{};
  if (j.contains("users")) {
    for (const auto& [u, p] : j.at("users").items()) g.users[u] = permission_from_string(p.get<std::string>());
  }
  if (j.contains("groups")) {
    for (const auto& [n, p] : j.at("groups").items()) g.groups[n] = permission_from_string(p.get<std::string>());
  }
}

Permission effective_permission(const std::string& owner, const Grants& grants, const Requester& who) {
  if (who.is_admin || who.username == owner) return Permission::kEdit;
  Permission best = Permission::kNone;
  auto raise = [&](Permission p) { best = std::max(best, p); };
  if (auto it = grants.users.find(who.username); it != grants.users.end()) raise(it->second);
  for (const auto& g : who.groups) {
    if (auto it = grants.groups.find(g); it != grants.groups.end()) raise(it->second);
  }
  return best;
}

}  // namespace jms
