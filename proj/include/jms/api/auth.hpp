#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jms/common/clock.hpp"
#include "jms/common/types.hpp"

namespace jms::api {

// Public view of an account; the password verifier never leaves the store.
struct User {
  std::string username;
  bool is_admin = false;
  bool disabled = false;
  std::set<std::string> groups;

  Requester requester() const { return Requester{username, is_admin, {groups.begin(), groups.end()}}; }
};

void to_json(nlohmann::json& j, const User& u);

struct Group {
  std::string name;
  std::string owner;
  std::set<std::string> members;
};

void to_json(nlohmann::json& j, const Group& g);

// Verifies credentials. Unknown user and wrong password are
// indistinguishable: both throw kInvalidCredentials with the same message.
class Authenticator {
 public:
  virtual ~Authenticator() = default;
  // Throws kInvalidCredentials or kAccountDisabled.
  virtual User authenticate(const std::string& username, const std::string& password) = 0;
};

inline constexpr int kPbkdf2Iterations = 100'000;

// Accounts and groups in <dir>/accounts.json, passwords as salted
// PBKDF2-HMAC-SHA256 verifiers.
class LocalCredentialStore final : public Authenticator {
 public:
  explicit LocalCredentialStore(std::filesystem::path dir, int iterations = kPbkdf2Iterations);

  User authenticate(const std::string& username, const std::string& password) override;

  // Throws kBadRequest (bad name or empty password) or kDuplicateName.
  User create_user(const std::string& username, const std::string& password, bool is_admin);
  void set_password(const std::string& username, const std::string& password);
  User set_flags(const std::string& username, std::optional<bool> is_admin, std::optional<bool> disabled);
  User user(const std::string& username) const;  // throws kNotFound
  std::vector<User> users() const;
  bool empty() const;

  // Any user may create a group; the creator owns it and is a member.
  Group create_group(const std::string& name, const std::string& owner);
  // Owner or admin only.
  Group add_member(const std::string& group, const std::string& username, const Requester& who);
  Group remove_member(const std::string& group, const std::string& username, const Requester& who);
  std::vector<Group> groups() const;

 private:
  struct Account {
    std::string salt;
    std::string verifier;
    int iterations = 0;
    bool is_admin = false;
    bool disabled = false;
  };

  User view_locked(const std::string& username, const Account& a) const;
  Group& group_locked(const std::string& name);
  void persist_locked() const;

  std::filesystem::path file_;
  int iterations_;
  mutable std::mutex mu_;
  std::map<std::string, Account> accounts_;
  std::map<std::string, Group> groups_;
  std::string dummy_salt_;
};

struct SessionToken {
  std::string token;  // 256 random bits, hex
  std::string username;
  Timestamp expires_at;
};

// Bearer tokens held in memory, keyed by their SHA-256 so a heap dump does
// not reveal live tokens.
class TokenStore {
 public:
  TokenStore(const Clock& clock, std::chrono::seconds ttl = std::chrono::hours(24));

  SessionToken issue(const std::string& username);
  // Throws kUnauthenticated for unknown, revoked or expired tokens.
  std::string resolve(const std::string& token);
  void revoke(const std::string& token);
  void revoke_user(const std::string& username);
  std::chrono::seconds ttl() const { return ttl_; }

 private:
  const Clock& clock_;
  std::chrono::seconds ttl_;
  std::mutex mu_;
  std::map<std::string, SessionToken> by_digest_;
};

}  // namespace jms::api
