#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include "jms/api/auth.hpp"
#include "jms/api/services.hpp"

namespace httplib {
class Server;
}

namespace jms::api {

// The REST surface. Every request carries `Authorization: Bearer <token>`
// except login and health. Errors come back as
// {"error": {"code", "message", "details"?}} with the status from
// kErrorStatus.
class ApiServer {
 public:
  ApiServer(Services& services, LocalCredentialStore& accounts, Authenticator& authenticator, TokenStore& tokens);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks an ephemeral port. Returns the bound port; throws
  // kIoFailure when binding fails.
  int bind(const std::string& host, int port);
  // Serves until stop(); bind() first.
  void listen();
  void stop();

 private:
  void install_routes();

  Services& services_;
  LocalCredentialStore& accounts_;
  Authenticator& authenticator_;
  TokenStore& tokens_;
  std::unique_ptr<httplib::Server> http_;
};

struct ApplicationOptions {
  ServicesOptions services;
  std::chrono::seconds token_ttl = std::chrono::hours(24);
  int pbkdf2_iterations = kPbkdf2Iterations;
};

// Services, accounts, tokens and the HTTP server over one data directory.
class Application {
 public:
  explicit Application(ApplicationOptions opts);
  ~Application();

  Services& services() { return *services_; }
  LocalCredentialStore& accounts() { return *accounts_; }
  TokenStore& tokens() { return *tokens_; }
  ApiServer& server() { return *server_; }

  // Starts the background loops and binds; returns the bound port.
  int start(const std::string& host, int port);
  // Blocks serving requests until shutdown().
  void serve();
  // Serves on a background thread.
  void serve_in_background();
  // Stops the HTTP server, then drains the orchestrator and executor loops.
  void shutdown();

 private:
  std::unique_ptr<Services> services_;
  std::unique_ptr<LocalCredentialStore> accounts_;
  std::unique_ptr<TokenStore> tokens_;
  std::unique_ptr<ApiServer> server_;
  std::thread serving_;
  bool down_ = false;
};

}  // namespace jms::api
