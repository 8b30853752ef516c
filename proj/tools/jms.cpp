// jms serve: the API server over one data directory.

#include <signal.h>
#include <termios.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "jms/api/server.hpp"
#include "jms/common/error.hpp"
#include "jms/history/poller.hpp"

namespace {

struct ServeConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string data_dir = "./data";
  double poll_interval_secs = std::chrono::duration<double>(jms::history::kDefaultPollInterval).count();
  double token_ttl_hours = 24;
  std::string create_admin;
};

// Keys present in the file win over flags.
void apply_config(ServeConfig& c, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read config " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (!j.is_object()) throw std::runtime_error("top level must be an object");
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.poll_interval_secs = j.value("poll_interval_secs", c.poll_interval_secs);
    c.token_ttl_hours = j.value("token_ttl_hours", c.token_ttl_hours);
  } catch (const std::exception& e) {
    throw std::runtime_error("config " + file.string() + ": " + e.what());
  }
}

std::string read_password(const std::string& prompt) {
  const bool tty = ::isatty(STDIN_FILENO);
  termios saved{};
  if (tty) {
    std::cerr << prompt << std::flush;
    ::tcgetattr(STDIN_FILENO, &saved);
    termios quiet = saved;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  }
  std::string line;
  std::getline(std::cin, line);
  if (tty) {
    ::tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    std::cerr << "\n";
  }
  return line;
}

int serve(ServeConfig cfg, const std::string& config_file) {
  if (!config_file.empty()) apply_config(cfg, config_file);
  if (cfg.poll_interval_secs <= 0) throw std::runtime_error("poll interval must be positive");

  std::error_code ec;
  std::filesystem::create_directories(cfg.data_dir, ec);
  if (ec || ::access(cfg.data_dir.c_str(), R_OK | W_OK | X_OK) != 0) {
    throw std::runtime_error("data dir " + cfg.data_dir + " is not usable");
  }

  // Signals go to a dedicated sigwait below, never to worker threads.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  jms::api::ApplicationOptions opts;
  opts.services.data_dir = cfg.data_dir;
  opts.services.poll_interval = std::chrono::milliseconds(static_cast<std::int64_t>(cfg.poll_interval_secs * 1000));
  opts.token_ttl = std::chrono::seconds(static_cast<std::int64_t>(cfg.token_ttl_hours * 3600));
  jms::api::Application app(opts);

  if (!cfg.create_admin.empty()) {
    const auto pw = read_password("password for " + cfg.create_admin + ": ");
    app.accounts().create_user(cfg.create_admin, pw, true);
    std::cerr << "created administrator " << cfg.create_admin << "\n";
  } else if (app.accounts().empty()) {
    std::cerr << "warning: no accounts exist; run with --create-admin <user>\n";
  }

  const int port = app.start(cfg.host, cfg.port);
  std::cout << "listening on " << cfg.host << ":" << port << std::endl;
  app.serve_in_background();

  int sig = 0;
  sigwait(&stop_signals, &sig);
  std::cerr << "shutting down\n";
  app.shutdown();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"job management server"};
  cli.require_subcommand(1);
  ServeConfig cfg;
  std::string config_file;
  auto* serve_cmd = cli.add_subcommand("serve", "run the API server");
  serve_cmd->add_option("--host", cfg.host, "listen address")->capture_default_str();
  serve_cmd->add_option("--port", cfg.port, "listen port, 0 for ephemeral")->capture_default_str();
  serve_cmd->add_option("--data-dir", cfg.data_dir, "state directory, created if missing")->capture_default_str();
  serve_cmd->add_option("--poll-interval-secs", cfg.poll_interval_secs, "resource poll cadence")->capture_default_str();
  serve_cmd->add_option("--config", config_file, "JSON file whose keys override flags");
  serve_cmd->add_option("--create-admin", cfg.create_admin, "create an administrator, reading the password from stdin");
  CLI11_PARSE(cli, argc, argv);

  try {
    return serve(cfg, config_file);
  } catch (const jms::Error& e) {
    std::cerr << "jms: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "jms: " << e.what() << "\n";
  }
  return 1;
}
