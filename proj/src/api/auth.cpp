#include "jms/api/auth.hpp"

#include <algorithm>
#include <cctype>

#include "jms/common/crypto.hpp"
#include "jms/common/error.hpp"
#include "jms/common/fs.hpp"

namespace jms::api {

namespace {

bool valid_name(const std::string& s) {
  if (s.empty() || s.size() > 64 || s.front() == '.' || s.front() == '-') return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '.' || c == '_' || c == '-'; });
}

Error invalid_credentials() { return Error(ErrorCode::kInvalidCredentials, "invalid username or password"); }

}  // namespace

void to_json(nlohmann::json& j, const User& u) {
  j = nlohmann::json{{"username", u.username}, {"is_admin", u.is_admin}, {"disabled", u.disabled}, {"groups", u.groups}};
}

void to_json(nlohmann::json& j, const Group& g) {
  j = nlohmann::json{{"name", g.name}, {"owner", g.owner}, {"members", g.members}};
}

LocalCredentialStore::LocalCredentialStore(std::filesystem::path dir, int iterations)
    : file_(dir / "accounts.json"), iterations_(iterations), dummy_salt_(crypto::random_hex(16)) {
  std::filesystem::create_directories(dir);
  auto doc = fs::read_json(file_);
  if (!doc) return;
  for (const auto& [name, a] : doc->at("users").items()) {
    accounts_[name] = Account{a.at("salt"), a.at("verifier"), a.at("iterations"), a.value("is_admin", false),
                              a.value("disabled", false)};
  }
  for (const auto& [name, g] : doc->at("groups").items()) {
    groups_[name] = Group{name, g.at("owner"), g.at("members").get<std::set<std::string>>()};
  }
}

void LocalCredentialStore::persist_locked() const {
  nlohmann::json users = nlohmann::json::object();
  for (const auto& [name, a] : accounts_) {
    users[name] = {{"salt", a.salt},
                   {"verifier", a.verifier},
                   {"iterations", a.iterations},
                   {"is_admin", a.is_admin},
                   {"disabled", a.disabled}};
  }
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [name, g] : groups_) groups[name] = {{"owner", g.owner}, {"members", g.members}};
  fs::write_json_atomic(file_, {{"users", users}, {"groups", groups}});
  std::filesystem::permissions(file_, std::filesystem::perms(0600));
}

User LocalCredentialStore::view_locked(const std::string& username, const Account& a) const {
  User u{username, a.is_admin, a.disabled, {}};
  for (const auto& [name, g] : groups_) {
    if (g.members.count(username)) u.groups.insert(name);
  }
  return u;
}

User LocalCredentialStore::authenticate(const std::string& username, const std::string& password) {
  Account a;
  bool known = false;
  {
    std::lock_guard lock(mu_);
    if (auto it = accounts_.find(username); it != accounts_.end()) {
      a = it->second;
      known = true;
    }
  }
  // Unknown users pay for a derivation too, so timing does not tell them apart.
  const auto derived = crypto::pbkdf2_hex(password, known ? a.salt : dummy_salt_, known ? a.iterations : iterations_);
  const bool match = crypto::constant_time_equal(derived, known ? a.verifier : std::string(derived.size(), '0'));
  if (!known || !match) throw invalid_credentials();
  if (a.disabled) throw Error(ErrorCode::kAccountDisabled, "account is disabled");
  std::lock_guard lock(mu_);
  return view_locked(username, a);
}

User LocalCredentialStore::create_user(const std::string& username, const std::string& password, bool is_admin) {
  if (!valid_name(username)) throw Error(ErrorCode::kBadRequest, "invalid username");
  if (password.empty()) throw Error(ErrorCode::kBadRequest, "password must not be empty");
  Account a;
  a.salt = crypto::random_hex(16);
  a.iterations = iterations_;
  a.verifier = crypto::pbkdf2_hex(password, a.salt, a.iterations);
  a.is_admin = is_admin;
  std::lock_guard lock(mu_);
  if (accounts_.count(username)) throw Error(ErrorCode::kDuplicateName, "user '" + username + "' exists");
  accounts_[username] = a;
  persist_locked();
  return view_locked(username, a);
}

void LocalCredentialStore::set_password(const std::string& username, const std::string& password) {
  if (password.empty()) throw Error(ErrorCode::kBadRequest, "password must not be empty");
  const auto salt = crypto::random_hex(16);
  const auto verifier = crypto::pbkdf2_hex(password, salt, iterations_);
  std::lock_guard lock(mu_);
  auto it = accounts_.find(username);
  if (it == accounts_.end()) throw Error(ErrorCode::kNotFound, "no user '" + username + "'");
  it->second.salt = salt;
  it->second.verifier = verifier;
  it->second.iterations = iterations_;
  persist_locked();
}

User LocalCredentialStore::set_flags(const std::string& username, std::optional<bool> is_admin,
                                     std::optional<bool> disabled) {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(username);
  if (it == accounts_.end()) throw Error(ErrorCode::kNotFound, "no user '" + username + "'");
  if (is_admin) it->second.is_admin = *is_admin;
  if (disabled) it->second.disabled = *disabled;
  persist_locked();
  return view_locked(username, it->second);
}

User LocalCredentialStore::user(const std::string& username) const {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(username);
  if (it == accounts_.end()) throw Error(ErrorCode::kNotFound, "no user '" + username + "'");
  return view_locked(username, it->second);
}

std::vector<User> LocalCredentialStore::users() const {
  std::lock_guard lock(mu_);
  std::vector<User> out;
  for (const auto& [name, a] : accounts_) out.push_back(view_locked(name, a));
  return out;
}

bool LocalCredentialStore::empty() const {
  std::lock_guard lock(mu_);
  return accounts_.empty();
}

Group& LocalCredentialStore::group_locked(const std::string& name) {
  auto it = groups_.find(name);
  if (it == groups_.end()) throw Error(ErrorCode::kNotFound, "no group '" + name + "'");
  return it->second;
}

Group LocalCredentialStore::create_group(const std::string& name, const std::string& owner) {
  if (!valid_name(name)) throw Error(ErrorCode::kBadRequest, "invalid group name");
  std::lock_guard lock(mu_);
  if (groups_.count(name)) throw Error(ErrorCode::kDuplicateName, "group '" + name + "' exists");
  Group g{name, owner, {owner}};
  groups_[name] = g;
  persist_locked();
  return g;
}

Group LocalCredentialStore::add_member(const std::string& group, const std::string& username, const Requester& who) {
  std::lock_guard lock(mu_);
  Group& g = group_locked(group);
  if (!who.is_admin && who.username != g.owner) {
    throw Error(ErrorCode::kPermissionDenied, "only the group owner manages members");
  }
  if (!accounts_.count(username)) throw Error(ErrorCode::kNotFound, "no user '" + username + "'");
  g.members.insert(username);
  persist_locked();
  return g;
}

Group LocalCredentialStore::remove_member(const std::string& group, const std::string& username,
                                          const Requester& who) {
  std::lock_guard lock(mu_);
  Group& g = group_locked(group);
  if (!who.is_admin && who.username != g.owner && who.username != username) {
    throw Error(ErrorCode::kPermissionDenied, "only the group owner manages members");
  }
  g.members.erase(username);
  persist_locked();
  return g;
}

std::vector<Group> LocalCredentialStore::groups() const {
  std::lock_guard lock(mu_);
  std::vector<Group> out;
  for (const auto& [_, g] : groups_) out.push_back(g);
  return out;
}

TokenStore::TokenStore(const Clock& clock, std::chrono::seconds ttl) : clock_(clock), ttl_(ttl) {}

SessionToken TokenStore::issue(const std::string& username) {
  SessionToken t{crypto::random_hex(32), username, clock_.now() + ttl_};
  std::lock_guard lock(mu_);
  by_digest_[crypto::sha256_hex(t.token)] = t;
  return t;
}

std::string TokenStore::resolve(const std::string& token) {
  const auto digest = crypto::sha256_hex(token);
  std::lock_guard lock(mu_);
  auto it = by_digest_.find(digest);
  if (it == by_digest_.end()) throw Error(ErrorCode::kUnauthenticated, "missing or invalid token");
  if (clock_.now() >= it->second.expires_at) {
    by_digest_.erase(it);
    throw Error(ErrorCode::kUnauthenticated, "missing or invalid token");
  }
  return it->second.username;
}

void TokenStore::revoke(const std::string& token) {
  std::lock_guard lock(mu_);
  by_digest_.erase(crypto::sha256_hex(token));
}

void TokenStore::revoke_user(const std::string& username) {
  std::lock_guard lock(mu_);
  std::erase_if(by_digest_, [&](const auto& kv) { return kv.second.username == username; });
}

}  // namespace jms::api
