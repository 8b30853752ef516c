#include "jms/api/server.hpp"

#include <httplib.h>

#include <fstream>
#include <optional>

#include "jms/api/error_status.hpp"
#include "jms/common/crypto.hpp"
#include "jms/common/fs.hpp"
#include "jms/workflow/archive.hpp"

namespace jms::api {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, ErrorCode code, const std::string& message, const json& details) {
  json err{{"code", std::string(to_string(code))}, {"message", message}};
  if (!details.is_null()) err["details"] = details;
  res.status = http_status(code);
  res.set_content(json{{"error", err}}.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body);
  if (!j.is_object()) throw Error(ErrorCode::kBadRequest, "request body must be a JSON object");
  return j;
}

void reply(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

// Inputs arrive as JSON scalars; the model carries strings.
workflow::InputValues input_values(const json& j) {
  workflow::InputValues out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw Error(ErrorCode::kBadRequest, "inputs must be an object");
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) {
      out[k] = v.get<std::string>();
    } else if (v.is_boolean()) {
      out[k] = v.get<bool>() ? "true" : "false";
    } else if (v.is_number()) {
      out[k] = v.dump();
    } else {
      throw Error(ErrorCode::kInvalidParameterValue, "input " + k + " must be a scalar", {{"parameter", k}});
    }
  }
  return out;
}

json job_view(const orchestrator::Job& job) {
  json j = job;
  j.erase("graph");
  j.erase("working_dir");
  return j;
}

json job_summary(const orchestrator::Job& job) {
  const json full = job;
  json stages = json::array();
  for (const auto& s : full.at("stages")) stages.push_back({{"stage", s.at("stage")}, {"state", s.at("state")}});
  return json{{"id", job.id},
              {"owner", job.owner},
              {"workflow_id", job.workflow.id},
              {"workflow_name", job.workflow.name},
              {"verdict", full.at("verdict")},
              {"terminal", full.at("terminal")},
              {"held", job.held},
              {"submitted_at", full.at("submitted_at")},
              {"ended_at", full.value("ended_at", json(nullptr))},
              {"repeat_of", full.at("repeat_of")},
              {"stages", stages}};
}

std::optional<std::string> bearer(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  return h.substr(prefix.size());
}

}  // namespace

ApiServer::ApiServer(Services& services, LocalCredentialStore& accounts, Authenticator& authenticator,
                     TokenStore& tokens)
    : services_(services),
      accounts_(accounts),
      authenticator_(authenticator),
      tokens_(tokens),
      http_(std::make_unique<httplib::Server>()) {
  http_->set_payload_max_length(std::size_t{256} << 20);
  http_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what(), e.details());
    } catch (const json::exception& e) {
      send_error(res, ErrorCode::kBadRequest, std::string("malformed request: ") + e.what(), nullptr);
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::kInternal, e.what(), nullptr);
    } catch (...) {
      send_error(res, ErrorCode::kInternal, "unknown failure", nullptr);
    }
  });
  http_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) send_error(res, ErrorCode::kNotFound, "no such endpoint", nullptr);
    if (res.status == 405) send_error(res, ErrorCode::kBadRequest, "method not allowed", nullptr);
  });
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = http_->bind_to_any_port(host);
    if (bound <= 0) throw Error(ErrorCode::kIoFailure, "cannot bind " + host);
    return bound;
  }
  if (!http_->bind_to_port(host, port)) {
    throw Error(ErrorCode::kIoFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::listen() { http_->listen_after_bind(); }

void ApiServer::stop() {
  if (http_) http_->stop();
}

void ApiServer::install_routes() {
  auto& srv = *http_;
  auto& orch = services_.orchestrator();
  auto& wfs = services_.workflows();
  auto& exec = services_.executor();

  // Resolves the bearer token to a live, enabled account.
  auto authed = [this](const httplib::Request& req) -> User {
    const auto token = bearer(req);
    if (!token) throw Error(ErrorCode::kUnauthenticated, "missing bearer token");
    const auto name = tokens_.resolve(*token);
    User u;
    try {
      u = accounts_.user(name);
    } catch (const Error&) {
      throw Error(ErrorCode::kUnauthenticated, "account no longer exists");
    }
    if (u.disabled) throw Error(ErrorCode::kUnauthenticated, "account disabled");
    return u;
  };
  auto admin_only = [authed](const httplib::Request& req) {
    auto u = authed(req);
    if (!u.is_admin) throw Error(ErrorCode::kPermissionDenied, "administrator only");
    return u;
  };
  // Workflows hidden from the requester read as absent.
  auto workflow_for = [&wfs](const std::string& id, const User& u, Permission need) {
    auto stored = wfs.get(id);
    const auto have = effective_permission(stored.workflow.owner, stored.grants, u.requester());
    if (!allows(have, Permission::kView)) throw Error(ErrorCode::kNotFound, "no such workflow: " + id);
    if (!allows(have, need)) {
      throw Error(ErrorCode::kPermissionDenied, "workflow " + id + " requires " + std::string(to_string(need)));
    }
    return stored;
  };
  auto workflow_view = [](const orchestrator::StoredWorkflow& s, const User& u) {
    json j = s.workflow;
    const auto have = effective_permission(s.workflow.owner, s.grants, u.requester());
    j["permission"] = std::string(to_string(have));
    if (allows(have, Permission::kEdit)) j["grants"] = s.grants;
    return j;
  };

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { reply(res, {{"status", "ok"}}); });

  // --- auth ---------------------------------------------------------------
  srv.Post("/api/auth/login", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto user = authenticator_.authenticate(body.value("username", std::string{}),
                                                  body.value("password", std::string{}));
    const auto token = tokens_.issue(user.username);
    reply(res, {{"token", token.token}, {"expires_at", to_millis(token.expires_at)}, {"user", user}});
  });
  srv.Post("/api/auth/logout", [this, authed](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    tokens_.revoke(*bearer(req));
    reply(res, {{"logged_out", true}});
  });
  srv.Get("/api/auth/me", [authed](const httplib::Request& req, httplib::Response& res) { reply(res, authed(req)); });

  // --- users and groups ---------------------------------------------------
  srv.Get("/api/users", [this, admin_only](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    reply(res, accounts_.users());
  });
  srv.Post("/api/users", [this, admin_only](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    const auto body = parse_body(req);
    reply(res,
          accounts_.create_user(body.at("username").get<std::string>(), body.at("password").get<std::string>(),
                                body.value("is_admin", false)),
          201);
  });
  // A user may change their own password; everything else is for admins.
  srv.Put(R"(/api/users/([^/]+))", [this, authed](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    const std::string name = req.matches[1];
    const auto body = parse_body(req);
    const bool flags = body.contains("is_admin") || body.contains("disabled");
    if (!u.is_admin && (flags || name != u.username)) {
      throw Error(ErrorCode::kPermissionDenied, "administrator only");
    }
    accounts_.user(name);
    if (body.contains("password")) accounts_.set_password(name, body.at("password").get<std::string>());
    std::optional<bool> is_admin, disabled;
    if (body.contains("is_admin")) is_admin = body.at("is_admin").get<bool>();
    if (body.contains("disabled")) disabled = body.at("disabled").get<bool>();
    const auto updated = flags ? accounts_.set_flags(name, is_admin, disabled) : accounts_.user(name);
    if (updated.disabled) tokens_.revoke_user(name);
    reply(res, updated);
  });
  srv.Get("/api/groups", [this, authed](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, accounts_.groups());
  });
  srv.Post("/api/groups", [this, authed](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    reply(res, accounts_.create_group(parse_body(req).at("name").get<std::string>(), u.username), 201);
  });
  srv.Post(R"(/api/groups/([^/]+)/members)", [this, authed](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    reply(res, accounts_.add_member(req.matches[1], parse_body(req).at("username").get<std::string>(), u.requester()));
  });
  srv.Delete(R"(/api/groups/([^/]+)/members/([^/]+))",
             [this, authed](const httplib::Request& req, httplib::Response& res) {
               const auto u = authed(req);
               reply(res, accounts_.remove_member(req.matches[1], req.matches[2], u.requester()));
             });

  // --- cluster ------------------------------------------------------------
  srv.Get("/api/cluster/summary", [&exec, authed](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, exec.summary());
  });
  srv.Get("/api/cluster/nodes", [&exec, authed](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, exec.nodes());
  });
  auto node_named = [&exec](const std::string& name) {
    for (const auto& n : exec.nodes()) {
      if (n.name == name) return n;
    }
    throw Error(ErrorCode::kUnknownNode, "no such node: " + name);
  };
  srv.Get(R"(/api/cluster/nodes/([^/]+))", [authed, node_named](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, node_named(req.matches[1]));
  });
  srv.Post("/api/cluster/nodes", [&exec, admin_only, node_named](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    const auto body = parse_body(req);
    const auto name = body.at("name").get<std::string>();
    exec.add_node(name, body.at("cores").get<int>(), body.at("memory_bytes").get<std::int64_t>());
    if (body.contains("state")) {
      exec.set_node_state(name, cluster::node_state_from_string(body.at("state").get<std::string>()));
    }
    reply(res, node_named(name), 201);
  });
  srv.Put(R"(/api/cluster/nodes/([^/]+))",
          [&exec, admin_only, node_named](const httplib::Request& req, httplib::Response& res) {
            admin_only(req);
            const std::string name = req.matches[1];
            exec.set_node_state(name, cluster::node_state_from_string(parse_body(req).at("state").get<std::string>()));
            reply(res, node_named(name));
          });
  srv.Delete(R"(/api/cluster/nodes/([^/]+))", [&exec, admin_only](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    exec.remove_node(req.matches[1]);
    reply(res, {{"deleted", std::string(req.matches[1])}});
  });
  auto queue_named = [&exec](const std::string& name) {
    for (const auto& q : exec.queues()) {
      if (q.name == name) return q;
    }
    throw Error(ErrorCode::kUnknownQueue, "no such queue: " + name);
  };
  srv.Get("/api/cluster/queues", [&exec, authed](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, exec.queues());
  });
  srv.Get(R"(/api/cluster/queues/([^/]+))", [authed, queue_named](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, queue_named(req.matches[1]));
  });
  srv.Post("/api/cluster/queues", [&exec, admin_only, queue_named](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    const auto q = parse_body(req).get<cluster::ClusterQueue>();
    exec.create_queue(q);
    reply(res, queue_named(q.name), 201);
  });
  srv.Put(R"(/api/cluster/queues/([^/]+))",
          [&exec, admin_only, queue_named](const httplib::Request& req, httplib::Response& res) {
            admin_only(req);
            json merged = queue_named(req.matches[1]);
            merged.merge_patch(parse_body(req));
            merged["name"] = std::string(req.matches[1]);
            exec.set_queue(merged.get<cluster::ClusterQueue>());
            reply(res, queue_named(req.matches[1]));
          });
  srv.Delete(R"(/api/cluster/queues/([^/]+))", [&exec, admin_only](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    exec.delete_queue(req.matches[1]);
    reply(res, {{"deleted", std::string(req.matches[1])}});
  });
  auto settings_view = [this, &exec] {
    json j = exec.settings();
    j["poll_interval_seconds"] = services_.poller().interval().count() / 1000.0;
    return j;
  };
  srv.Get("/api/cluster/settings", [admin_only, settings_view](const httplib::Request& req, httplib::Response& res) {
    admin_only(req);
    reply(res, settings_view());
  });
  srv.Put("/api/cluster/settings",
          [this, &exec, admin_only, settings_view](const httplib::Request& req, httplib::Response& res) {
            admin_only(req);
            auto body = parse_body(req);
            if (body.contains("poll_interval_seconds")) {
              const double secs = body.at("poll_interval_seconds").get<double>();
              if (!(secs > 0)) throw Error(ErrorCode::kBadRequest, "poll_interval_seconds must be positive");
              services_.poller().set_interval(std::chrono::milliseconds(static_cast<std::int64_t>(secs * 1000)));
              body.erase("poll_interval_seconds");
            }
            json merged = exec.settings();
            merged.merge_patch(body);
            const auto s = merged.get<cluster::ServerSettings>();
            if (!(s.tick_interval_seconds > 0) || s.kill_grace_seconds < 0) {
              throw Error(ErrorCode::kBadRequest, "tick interval must be positive and kill grace nonnegative");
            }
            exec.set_settings(s);
            reply(res, settings_view());
          });
  srv.Get("/api/cluster/jobs", [&exec, authed](const httplib::Request& req, httplib::Response& res) {
    authed(req);
    reply(res, exec.jobs());
  });

  // --- jobs ---------------------------------------------------------------
  srv.Get("/api/jobs", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    json out = json::array();
    for (const auto& j : orch.jobs(u.requester())) out.push_back(job_summary(j));
    reply(res, out);
  });
  // Shared by single and batch submission: the workflow as stored, its
  // scripts and any uploaded files.
  auto base_request = [&wfs, workflow_for](const std::string& wf_id, const User& u, const json& files) {
    auto stored = workflow_for(wf_id, u, Permission::kRun);
    orchestrator::SubmitRequest sr;
    sr.workflow = stored.workflow;
    sr.scripts = wfs.referenced_scripts(wf_id);
    if (!files.is_null()) {
      for (const auto& [name, b64] : files.items()) sr.files[name] = crypto::base64_decode(b64.get<std::string>());
    }
    return sr;
  };
  auto profile_of = [&wfs](const std::string& wf_id, const json& body) -> std::optional<workflow::InputProfile> {
    if (!body.contains("profile_id") || body.at("profile_id").is_null()) return std::nullopt;
    const auto pid = body.at("profile_id").get<std::string>();
    if (pid.empty()) return std::nullopt;
    return wfs.profile(wf_id, pid);
  };
  srv.Post("/api/jobs", [&orch, authed, base_request, profile_of](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    const auto body = parse_body(req);
    const auto wf_id = body.at("workflow_id").get<std::string>();
    auto sr = base_request(wf_id, u, body.value("files", json(nullptr)));
    const auto profile = profile_of(wf_id, body);
    sr.inputs = workflow::resolve_inputs(sr.workflow, profile ? &*profile : nullptr,
                                         input_values(body.value("inputs", json(nullptr))));
    reply(res, job_view(orch.submit(sr, u.username)), 201);
  });
  // Multipart fields: workflow_id, profile_id?, file, inputs? (JSON), or the
  // same names in a JSON body with the batch text under "file".
  srv.Post("/api/jobs/batch",
           [&orch, &wfs, authed, base_request, profile_of](const httplib::Request& req, httplib::Response& res) {
             const auto u = authed(req);
             json body;
             std::string text;
             if (req.is_multipart_form_data()) {
               body = json::object();
               for (const auto* field : {"workflow_id", "profile_id"}) {
                 if (req.has_file(field)) body[field] = req.get_file_value(field).content;
               }
               if (req.has_file("inputs")) body["inputs"] = json::parse(req.get_file_value("inputs").content);
               if (!req.has_file("file")) throw Error(ErrorCode::kBadRequest, "missing batch file part");
               text = req.get_file_value("file").content;
             } else {
               body = parse_body(req);
               text = body.at("file").get<std::string>();
             }
             const auto wf_id = body.at("workflow_id").get<std::string>();
             auto sr = base_request(wf_id, u, body.value("files", json(nullptr)));
             sr.inputs = input_values(body.value("inputs", json(nullptr)));
             auto profile = profile_of(wf_id, body);
             // Fixed inputs sit beneath each row's values.
             workflow::InputProfile merged;
             if (profile) merged = *profile;
             for (const auto& [k, v] : sr.inputs) merged.values[k] = v;
             const auto rows = workflow::parse_batch_file(text, sr.workflow);
             (void)wfs;
             reply(res, {{"submitted", orch.batch_submit(sr, &merged, rows, u.username)}}, 201);
           });
  srv.Get(R"(/api/jobs/([^/]+))", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    reply(res, job_view(orch.job(req.matches[1], authed(req).requester())));
  });
  srv.Delete(R"(/api/jobs/([^/]+))", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    orch.delete_job(req.matches[1], authed(req).requester());
    reply(res, {{"deleted", std::string(req.matches[1])}});
  });
  srv.Post(R"(/api/jobs/([^/]+)/(cancel|hold|release))",
           [&orch, authed](const httplib::Request& req, httplib::Response& res) {
             const auto who = authed(req).requester();
             const std::string id = req.matches[1];
             const std::string action = req.matches[2];
             const auto job = action == "cancel" ? orch.cancel(id, who)
                              : action == "hold" ? orch.hold(id, who)
                                                 : orch.release(id, who);
             reply(res, job_view(job));
           });
  srv.Post(R"(/api/jobs/([^/]+)/stages/([^/]+)/(suspend|resume))",
           [&orch, authed](const httplib::Request& req, httplib::Response& res) {
             const auto who = authed(req).requester();
             const auto job = std::string(req.matches[3]) == "suspend"
                                  ? orch.suspend_stage(req.matches[1], req.matches[2], who)
                                  : orch.resume_stage(req.matches[1], req.matches[2], who);
             reply(res, job_view(job));
           });
  srv.Post(R"(/api/jobs/([^/]+)/repeat)", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    const auto who = authed(req).requester();
    const auto body = parse_body(req);
    std::optional<std::string> from;
    if (body.contains("from_stage") && !body.at("from_stage").is_null()) from = body.at("from_stage").get<std::string>();
    reply(res, job_view(orch.repeat(req.matches[1], from, who)), 201);
  });
  srv.Post(R"(/api/jobs/([^/]+)/share)", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    const auto who = authed(req).requester();
    const auto body = parse_body(req);
    orch.share_job(req.matches[1], body.at("subject").get<std::string>(), body.value("group", false), who);
    reply(res, job_view(orch.job(req.matches[1], who)));
  });
  srv.Post(R"(/api/jobs/([^/]+)/alterations)", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    const auto who = authed(req).requester();
    reply(res, orch.request_alteration(req.matches[1], parse_body(req).at("changes"), who), 201);
  });
  srv.Get(R"(/api/jobs/([^/]+)/alterations)", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    reply(res, orch.alterations(req.matches[1], authed(req).requester()));
  });
  srv.Get("/api/alterations", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    reply(res, orch.all_alterations(authed(req).requester()));
  });
  srv.Post(R"(/api/alterations/([^/]+)/decide)", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    const auto who = authed(req).requester();
    reply(res, orch.decide_alteration(req.matches[1], parse_body(req).at("approve").get<bool>(), who));
  });
  srv.Get(R"(/api/jobs/([^/]+)/files/(.+))", [&orch, authed](const httplib::Request& req, httplib::Response& res) {
    const auto path = orch.job_file(req.matches[1], req.matches[2], authed(req).requester());
    const auto size = std::filesystem::file_size(path);
    auto in = std::make_shared<std::ifstream>(path, std::ios::binary);
    if (!*in) throw Error(ErrorCode::kIoFailure, "cannot open " + std::string(req.matches[2]));
    res.set_content_provider(size, "application/octet-stream",
                             [in](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                               std::string buf(std::min<std::size_t>(length, 64 * 1024), '\0');
                               in->seekg(static_cast<std::streamoff>(offset));
                               in->read(buf.data(), static_cast<std::streamsize>(buf.size()));
                               const auto got = static_cast<std::size_t>(in->gcount());
                               if (got == 0) return false;
                               sink.write(buf.data(), got);
                               return true;
                             });
  });

  // --- workflows ----------------------------------------------------------
  srv.Get("/api/workflows", [&wfs, authed, workflow_view](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    json out = json::array();
    for (const auto& s : wfs.list()) {
      if (allows(effective_permission(s.workflow.owner, s.grants, u.requester()), Permission::kView)) {
        out.push_back(workflow_view(s, u));
      }
    }
    reply(res, out);
  });
  // Body: the workflow, optionally with "scripts": {name: content}.
  srv.Post("/api/workflows", [&wfs, authed, workflow_view](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    auto body = parse_body(req);
    const auto scripts = body.value("scripts", json::object());
    body.erase("scripts");
    const auto wf = wfs.create(body.get<workflow::Workflow>(), u.username);
    for (const auto& [name, content] : scripts.items()) wfs.put_script(wf.id, name, content.get<std::string>());
    reply(res, workflow_view(wfs.get(wf.id), u), 201);
  });
  srv.Post("/api/workflows/import", [&wfs, authed, workflow_view](const httplib::Request& req, httplib::Response& res) {
    const auto u = authed(req);
    std::string bytes = req.body;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("archive")) throw Error(ErrorCode::kBadRequest, "missing archive part");
      bytes = req.get_file_value("archive").content;
    }
    auto imported = workflow::import_workflow(bytes, u.username, "");
    const auto wf = wfs.create(imported.workflow, u.username);
    for (const auto& [name, content] : imported.scripts) wfs.put_script(wf.id, name, content);
    reply(res, workflow_view(wfs.get(wf.id), u), 201);
  });
  srv.Get(R"(/api/workflows/([^/]+))", [authed, workflow_for, workflow_view](const httplib::Request& req,
                                                                             httplib::Response& res) {
    const auto u = authed(req);
    reply(res, workflow_view(workflow_for(req.matches[1], u, Permission::kView), u));
  });
  srv.Put(R"(/api/workflows/([^/]+))",
          [&wfs, authed, workflow_for, workflow_view](const httplib::Request& req, httplib::Response& res) {
            const auto u = authed(req);
            const std::string id = req.matches[1];
            workflow_for(id, u, Permission::kEdit);
            auto body = parse_body(req);
            const auto scripts = body.value("scripts", json::object());
            body.erase("scripts");
            wfs.update(id, body.get<workflow::Workflow>());
            for (const auto& [name, content] : scripts.items()) wfs.put_script(id, name, content.get<std::string>());
            reply(res, workflow_view(wfs.get(id), u));
          });
  srv.Delete(R"(/api/workflows/([^/]+))", [&wfs, authed, workflow_for](const httplib::Request& req,
                                                                       httplib::Response& res) {
    workflow_for(req.matches[1], authed(req), Permission::kEdit);
    wfs.remove(req.matches[1]);
    reply(res, {{"deleted", std::string(req.matches[1])}});
  });
  srv.Post(R"(/api/workflows/([^/]+)/share)",
           [&wfs, authed, workflow_for, workflow_view](const httplib::Request& req, httplib::Response& res) {
             const auto u = authed(req);
             const std::string id = req.matches[1];
             workflow_for(id, u, Permission::kEdit);
             const auto body = parse_body(req);
             wfs.set_grant(id, body.at("subject").get<std::string>(), body.value("group", false),
                           permission_from_string(body.at("level").get<std::string>()));
             reply(res, workflow_view(wfs.get(id), u));
           });
  srv.Get(R"(/api/workflows/([^/]+)/export)", [&wfs, authed, workflow_for](const httplib::Request& req,
                                                                           httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto stored = workflow_for(id, authed(req), Permission::kView);
    const auto bytes = workflow::export_workflow(stored.workflow, [&](const std::string& n) { return wfs.script(id, n); });
    res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".zip\"");
    res.set_content(bytes, "application/zip");
  });
  srv.Get(R"(/api/workflows/([^/]+)/scripts)", [&wfs, authed, workflow_for](const httplib::Request& req,
                                                                            httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto stored = workflow_for(id, authed(req), Permission::kView);
    json out = json::array();
    for (const auto& name : stored.workflow.script_names()) {
      out.push_back({{"name", name}, {"present", wfs.script(id, name).has_value()}});
    }
    reply(res, out);
  });
  srv.Get(R"(/api/workflows/([^/]+)/scripts/([^/]+))",
          [&wfs, authed, workflow_for](const httplib::Request& req, httplib::Response& res) {
            workflow_for(req.matches[1], authed(req), Permission::kView);
            const auto content = wfs.script(req.matches[1], req.matches[2]);
            if (!content) throw Error(ErrorCode::kNotFound, "no such script: " + std::string(req.matches[2]));
            res.set_content(*content, "text/plain");
          });
  // Raw script text in the body.
  srv.Put(R"(/api/workflows/([^/]+)/scripts/([^/]+))",
          [&wfs, authed, workflow_for](const httplib::Request& req, httplib::Response& res) {
            workflow_for(req.matches[1], authed(req), Permission::kEdit);
            wfs.put_script(req.matches[1], req.matches[2], req.body);
            reply(res, {{"name", std::string(req.matches[2])}, {"bytes", req.body.size()}});
          });
  srv.Get(R"(/api/workflows/([^/]+)/profiles)", [&wfs, authed, workflow_for](const httplib::Request& req,
                                                                             httplib::Response& res) {
    workflow_for(req.matches[1], authed(req), Permission::kView);
    reply(res, wfs.profiles(req.matches[1]));
  });
  srv.Get(R"(/api/workflows/([^/]+)/profiles/([^/]+))",
          [&wfs, authed, workflow_for](const httplib::Request& req, httplib::Response& res) {
            workflow_for(req.matches[1], authed(req), Permission::kView);
            reply(res, wfs.profile(req.matches[1], req.matches[2]));
          });
  auto profile_body = [](const httplib::Request& req) {
    const auto body = parse_body(req);
    workflow::InputProfile p;
    p.name = body.value("name", std::string{});
    p.values = input_values(body.value("values", json(nullptr)));
    return p;
  };
  srv.Post(R"(/api/workflows/([^/]+)/profiles)",
           [&wfs, authed, workflow_for, profile_body](const httplib::Request& req, httplib::Response& res) {
             workflow_for(req.matches[1], authed(req), Permission::kRun);
             reply(res, wfs.create_profile(req.matches[1], profile_body(req)), 201);
           });
  srv.Put(R"(/api/workflows/([^/]+)/profiles/([^/]+))",
          [&wfs, authed, workflow_for, profile_body](const httplib::Request& req, httplib::Response& res) {
            workflow_for(req.matches[1], authed(req), Permission::kRun);
            reply(res, wfs.update_profile(req.matches[1], req.matches[2], profile_body(req)));
          });
  srv.Delete(R"(/api/workflows/([^/]+)/profiles/([^/]+))",
             [&wfs, authed, workflow_for](const httplib::Request& req, httplib::Response& res) {
               workflow_for(req.matches[1], authed(req), Permission::kRun);
               wfs.remove_profile(req.matches[1], req.matches[2]);
               reply(res, {{"deleted", std::string(req.matches[2])}});
             });
}

// ---------------------------------------------------------------------------

Application::Application(ApplicationOptions opts) {
  services_ = std::make_unique<Services>(opts.services);
  accounts_ = std::make_unique<LocalCredentialStore>(services_->data_dir() / "auth", opts.pbkdf2_iterations);
  tokens_ = std::make_unique<TokenStore>(services_->clock(), opts.token_ttl);
  server_ = std::make_unique<ApiServer>(*services_, *accounts_, *accounts_, *tokens_);
}

Application::~Application() { shutdown(); }

int Application::start(const std::string& host, int port) {
  const int bound = server_->bind(host, port);
  services_->start();
  return bound;
}

void Application::serve() { server_->listen(); }

void Application::serve_in_background() {
  serving_ = std::thread([this] { server_->listen(); });
}

void Application::shutdown() {
  if (down_) return;
  down_ = true;
  server_->stop();
  if (serving_.joinable()) serving_.join();
  services_->stop();
}

}  // namespace jms::api
