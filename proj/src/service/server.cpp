#include "magicitem/service/server.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <map>
#include <random>
#include <sstream>

#include "magicitem/common/format.hpp"
#include "magicitem/prompt/prompt.hpp"
#include "magicitem/runtime/catalog.hpp"
#include "magicitem/sync/sync.hpp"
#include "magicitem/world/oracle.hpp"

namespace magicitem::service {

using nlohmann::json;

std::unique_ptr<world::World> makeStage(std::uint64_t seed) {
  world::WorldConfig cfg;
  cfg.traceCapacity = 600;  // the server never replays old frames
  auto w = std::make_unique<world::World>(cfg, seed);
  w->spawnItem(world::ItemKind::Chair, {0, 0, 2});
  w->spawnItem(world::ItemKind::Grabbable, {1, 0, 2});
  w->spawnPlayer({0, 0, 0});
  return w;
}

namespace {

constexpr std::size_t kConsoleCapacity = 1000;

struct ConsoleLine {
  std::uint64_t frame;
  std::string text;
  bool error;
};

std::string newSessionId() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  std::ostringstream ss;
  ss << std::hex << rd() << (counter++ & 0xffu);
  return ss.str();
}

// "[item 3] text" -> (3, "text")
std::optional<std::pair<int, std::string>> splitItemPrefix(const std::string& line) {
  constexpr std::string_view kPrefix = "[item ";
  if (line.rfind(kPrefix, 0) != 0) return std::nullopt;
  auto close = line.find(']');
  if (close == std::string::npos) return std::nullopt;
  try {
    int id = std::stoi(line.substr(kPrefix.size(), close - kPrefix.size()));
    std::size_t start = close + 1;
    if (start < line.size() && line[start] == ' ') ++start;
    return std::make_pair(id, line.substr(start));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  reply(res, status, {{"error", kind}, {"message", message}});
}

std::optional<json> parseBody(const httplib::Request& req, httplib::Response& res) {
  json body = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    fail(res, 400, "BadRequest", "body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

std::optional<int> intField(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_number_integer()) return std::nullopt;
  return body[key].get<int>();
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  gateway::Gateway gateway;
  prompt::DefinitionText definition;
  httplib::Server server;
  std::unique_ptr<Stepper> stepper;
  std::thread listener;
  int boundPort = 0;

  mutable std::mutex sessionMu;
  std::shared_ptr<Session> session;

  std::mutex consoleMu;
  std::map<int, std::deque<ConsoleLine>> console;

  // Oracle state; written on the stepper thread, read by handlers.
  world::OracleTracker tracker;
  std::mutex oracleMu;
  std::optional<std::uint64_t> task1At, task2At;
  std::optional<int> activeTask;

  std::atomic<std::uint64_t> generationCounter{0};

  Impl(ServiceConfig cfg, std::unique_ptr<gateway::HttpTransport> transport)
      : config(std::move(cfg)),
        gateway(config.gateway, std::move(transport)),
        definition(prompt::renderDefinition(runtime::defaultCatalog())),
        tracker(world::WorldConfig{}.groundHalfExtent) {}

  std::shared_ptr<Session> currentSession() const {
    std::lock_guard lock(sessionMu);
    return session;
  }

  void pushConsole(int item, std::uint64_t frame, std::string text, bool error) {
    std::lock_guard lock(consoleMu);
    auto& q = console[item];
    q.push_back({frame, std::move(text), error});
    while (q.size() > kConsoleCapacity) q.pop_front();
  }

  void onFrame(const world::FrameRecord& rec) {
    for (const auto& line : rec.console) {
      if (auto split = splitItemPrefix(line)) pushConsole(split->first, rec.frame, split->second, false);
    }
    for (const auto& line : rec.errors) {
      if (auto split = splitItemPrefix(line)) pushConsole(split->first, rec.frame, split->second, true);
    }
    const bool had1 = tracker.fired(world::Oracle::Task1);
    const bool had2 = tracker.fired(world::Oracle::Task2);
    tracker.observe(rec);
    const bool now1 = tracker.fired(world::Oracle::Task1);
    const bool now2 = tracker.fired(world::Oracle::Task2);
    if (now1 != had1 || now2 != had2) {
      {
        std::lock_guard lock(oracleMu);
        task1At = tracker.firedAt(world::Oracle::Task1);
        task2At = tracker.firedAt(world::Oracle::Task2);
      }
      currentSession()->append(EventKind::OracleSample,
                               {{"frame", rec.frame}, {"task1", now1}, {"task2", now2}});
    }
  }

  void resetOracles() {
    tracker.reset();
    std::lock_guard lock(oracleMu);
    task1At.reset();
    task2At.reset();
  }

  void newSession() {
    auto s = std::make_shared<Session>(newSessionId(), config.dataDir);
    {
      std::lock_guard lock(sessionMu);
      session = std::move(s);
    }
    {
      std::lock_guard lock(consoleMu);
      console.clear();
    }
    {
      std::lock_guard lock(oracleMu);
      activeTask.reset();
    }
    stepper->submit([this](world::World&) { resetOracles(); }).get();
    stepper->reset().get();
  }

  bool itemExists(int id) {
    return stepper->submit([id](world::World& w) { return w.item(id) != nullptr; }).get();
  }

  void routes();
  void handleGenerate(const httplib::Request& req, httplib::Response& res);
};

void Service::Impl::handleGenerate(const httplib::Request& req, httplib::Response& res) {
  // Exactly one generate event per response, whatever the outcome.
  json event = {{"ok", false}};
  auto finish = [&](int status, const json& body) {
    event["status"] = status;
    currentSession()->append(EventKind::Generate, event);
    reply(res, status, body);
  };
  auto error = [&](int status, std::string_view kind, const std::string& message) {
    event["error"] = kind;
    finish(status, {{"error", kind}, {"message", message}});
  };

  json body = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    return error(400, "BadRequest", "body must be a JSON object");
  }
  auto itemId = intField(body, "item_id");
  if (!itemId) return error(400, "BadRequest", "item_id must be an integer");
  event["item_id"] = *itemId;
  if (!body.contains("prompt") || !body["prompt"].is_string()) {
    return error(400, "EmptyPrompt", "prompt must be a non-empty string");
  }
  const std::string text = body["prompt"].get<std::string>();
  event["prompt_chars"] = text.size();
  prompt::PromptEnvelope env;
  try {
    env = prompt::buildPrompt(definition, text, config.gateway.model);
  } catch (const std::invalid_argument& e) {
    return error(400, "EmptyPrompt", e.what());
  }
  if (!itemExists(*itemId)) {
    return error(404, "UnknownItem", "no item with id " + std::to_string(*itemId));
  }

  gateway::GenerationRecord rec;
  try {
    rec = gateway.generate(env);
  } catch (const gateway::GatewayError& e) {
    event["error"] = gateway::toString(e.kind());
    json payload = {{"error", gateway::toString(e.kind())}, {"message", e.what()}};
    if (e.status()) payload["provider_status"] = e.status();
    if (!e.bodyExcerpt().empty()) payload["body_excerpt"] = e.bodyExcerpt();
    return finish(502, payload);
  }

  const std::string genId = currentSession()->id() + "-gen-" + std::to_string(++generationCounter);
  event["generation_record"] = genId;
  event["prompt_digest"] = rec.promptDigest;
  event["generation_ms"] = rec.generationMs;
  event["total_ms"] = rec.totalMs;
  event["prompt_tokens"] = rec.usage.promptTokens;
  event["completion_tokens"] = rec.usage.completionTokens;
  event["estimated"] = rec.usage.estimated;
  event["backend"] = gateway::toString(rec.backend);
  event["raw_reply"] = rec.rawReply;

  if (!rec.script) {
    const auto kind = prompt::toString(rec.extractionError.value_or(prompt::ExtractionErrorKind::NoCodeBlock));
    event["error"] = kind;
    return finish(422, {{"error", kind},
                        {"message", "the reply contained no usable code block"},
                        {"raw_reply", rec.rawReply},
                        {"generation_ms", rec.generationMs},
                        {"total_ms", rec.totalMs}});
  }

  sync::PendingScript pending;
  pending.itemId = *itemId;
  pending.scriptText = *rec.script;
  pending.meta.promptDigest = rec.promptDigest;
  pending.meta.generatedAt = formatRfc3339(rec.completedAt);
  pending.meta.generationRecord = genId;
  try {
    sync::writePending(config.syncDir, pending);
  } catch (const sync::SyncError& e) {
    return error(500, "SyncError", e.what());
  }

  event["ok"] = true;
  event["script_chars"] = rec.script->size();
  finish(200, {{"item_id", *itemId},
               {"script", *rec.script},
               {"generation_ms", rec.generationMs},
               {"total_ms", rec.totalMs},
               {"prompt_tokens", rec.usage.promptTokens},
               {"completion_tokens", rec.usage.completionTokens},
               {"estimated", rec.usage.estimated},
               {"prompt_digest", rec.promptDigest},
               {"generation_record", genId}});
}

void Service::Impl::routes() {
  server.Post("/api/session", [this](const httplib::Request&, httplib::Response& res) {
    newSession();
    reply(res, 200, {{"session_id", currentSession()->id()}});
  });

  server.Post("/api/task/start", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parseBody(req, res);
    if (!body) return;
    auto task = intField(*body, "task");
    if (!task || *task < 1 || *task > 3) return fail(res, 400, "BadRequest", "task must be 1, 2 or 3");
    // Reset on the stepper thread so the new interval starts at a frame boundary.
    const auto frame = stepper
                           ->submit([this](world::World& w) {
                             resetOracles();
                             return w.frame();
                           })
                           .get();
    {
      std::lock_guard lock(oracleMu);
      activeTask = *task;
    }
    currentSession()->append(EventKind::TaskStart, {{"task", *task}, {"frame", frame}});
    reply(res, 200, {{"task", *task}, {"frame", frame}});
  });

  server.Post("/api/generate",
              [this](const httplib::Request& req, httplib::Response& res) { handleGenerate(req, res); });

  server.Get(R"(/api/script/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const int id = std::stoi(req.matches[1]);
    try {
      auto pending = sync::readPending(config.syncDir, id);
      if (!pending) return fail(res, 404, "NothingPending", "no pending script for item " + std::to_string(id));
      json meta = {{"prompt_digest", pending->meta.promptDigest},
                   {"generated_at", pending->meta.generatedAt},
                   {"generation_record", pending->meta.generationRecord},
                   {"script_sha256", pending->meta.scriptSha256},
                   {"applied_at", pending->meta.appliedAt ? json(*pending->meta.appliedAt) : json(nullptr)}};
      reply(res, 200, {{"item_id", id}, {"script", pending->scriptText}, {"meta", meta}});
    } catch (const sync::SyncError& e) {
      fail(res, 500, "IntegrityError", e.what());
    }
  });

  server.Post("/api/apply", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parseBody(req, res);
    if (!body) return;
    auto id = intField(*body, "item_id");
    if (!id) return fail(res, 400, "BadRequest", "item_id must be an integer");
    auto [report, frame] = stepper
                               ->submit([this, id = *id](world::World& w) {
                                 return std::make_pair(sync::applyPending(w, config.syncDir, id), w.frame());
                               })
                               .get();
    for (const auto& line : report.console) pushConsole(*id, frame, line, false);
    if (!report.ok && !report.errorKind.empty() && report.errorKind != "NothingToApply") {
      pushConsole(*id, frame, report.errorKind + ": " + report.message, true);
    }
    json payload = {{"item_id", *id},
                    {"ok", report.ok},
                    {"frame", frame},
                    {"error", report.errorKind.empty() ? json(nullptr) : json(report.errorKind)}};
    currentSession()->append(EventKind::Apply, payload);
    json out = payload;
    out["message"] = report.message;
    out["line"] = report.line;
    out["column"] = report.column;
    out["member"] = report.memberPath.empty() ? json(nullptr) : json(report.memberPath);
    out["console"] = report.console;
    reply(res, report.errorKind == "NothingToApply" ? 404 : 200, out);
  });

  server.Get("/api/world", [this](const httplib::Request&, httplib::Response& res) {
    json snap = stepper->snapshot();
    {
      std::lock_guard lock(oracleMu);
      snap["oracles"] = {{"task1", task1At ? json(*task1At) : json(nullptr)},
                         {"task2", task2At ? json(*task2At) : json(nullptr)}};
      snap["active_task"] = activeTask ? json(*activeTask) : json(nullptr);
    }
    snap["session_id"] = currentSession()->id();
    snap["manual_step"] = stepper->manual();
    snap["ground_half_extent"] = world::WorldConfig{}.groundHalfExtent;
    reply(res, 200, snap);
  });

  server.Post("/api/input", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parseBody(req, res);
    if (!body) return;
    auto player = intField(*body, "player_id");
    if (!player) return fail(res, 400, "BadRequest", "player_id must be an integer");
    if (!body->contains("action") || !(*body)["action"].is_string()) {
      return fail(res, 400, "BadRequest", "action must be a string");
    }
    json inputJson = *body;
    inputJson["type"] = (*body)["action"];
    inputJson.erase("action");
    inputJson.erase("player_id");
    world::PlayerInput in;
    try {
      in = world::parseInput(inputJson);
    } catch (const std::exception& e) {
      return fail(res, 400, "BadRequest", e.what());
    }
    auto [ack, frame] = stepper
                            ->submit([p = *player, in](world::World& w) {
                              return std::make_pair(w.applyInput(p, in), w.frame());
                            })
                            .get();
    currentSession()->append(EventKind::Input, {{"player_id", *player},
                                                {"input", world::toJson(in)},
                                                {"accepted", ack.accepted},
                                                {"frame", frame}});
    reply(res, 200, {{"accepted", ack.accepted}, {"reason", ack.reason}, {"frame", frame}});
  });

  server.Post("/api/step", [this](const httplib::Request& req, httplib::Response& res) {
    if (!stepper->manual()) {
      return fail(res, 409, "NotManual", "stepping is real-time; start with --manual-step");
    }
    auto body = parseBody(req, res);
    if (!body) return;
    int frames = 1;
    if (body->contains("frames")) {
      auto f = intField(*body, "frames");
      if (!f || *f < 1 || *f > 36000) return fail(res, 400, "BadRequest", "frames must be 1..36000");
      frames = *f;
    }
    reply(res, 200, {{"frame", stepper->stepFrames(frames).get()}});
  });

  server.Get(R"(/api/console/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const int id = std::stoi(req.matches[1]);
    std::size_t limit = 100;
    if (req.has_param("limit")) {
      try {
        limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        return fail(res, 400, "BadRequest", "limit must be a non-negative integer");
      }
      limit = std::min<std::size_t>(limit, kConsoleCapacity);
    }
    json lines = json::array();
    {
      std::lock_guard lock(consoleMu);
      auto it = console.find(id);
      if (it != console.end()) {
        const auto& q = it->second;
        for (std::size_t i = q.size() > limit ? q.size() - limit : 0; i < q.size(); ++i) {
          lines.push_back({{"frame", q[i].frame}, {"text", q[i].text}, {"error", q[i].error}});
        }
      }
    }
    reply(res, 200, {{"item_id", id}, {"lines", lines}});
  });

  server.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
    auto s = currentSession();
    json out = toJson(s->metrics());
    out["session_id"] = s->id();
    reply(res, 200, out);
  });

  if (!config.staticDir.empty() && std::filesystem::is_directory(config.staticDir)) {
    server.set_mount_point("/", config.staticDir.string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("MagicItem service is running; no operator UI directory configured.\n",
                      "text/plain");
    });
  }

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    fail(res, 500, "Internal", what);
  });
}

Service::Service(ServiceConfig config, std::unique_ptr<gateway::HttpTransport> transport)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(transport))) {
  auto* impl = impl_.get();
  const auto seed = impl->config.seed;
  impl->stepper = std::make_unique<Stepper>([seed] { return makeStage(seed); },
                                            impl->config.manualStep,
                                            [impl](const world::FrameRecord& rec) { impl->onFrame(rec); });
  impl->session = std::make_shared<Session>(newSessionId(), impl->config.dataDir);
  impl->routes();
}

Service::~Service() { stop(); }

int Service::start() {
  auto& s = impl_->server;
  // httplib's default adds SO_REUSEPORT, which would let a second instance
  // share the port silently.
  s.set_socket_options([](int sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  std::filesystem::create_directories(impl_->config.syncDir);
  if (impl_->config.port == 0) {
    impl_->boundPort = s.bind_to_any_port(impl_->config.host);
    if (impl_->boundPort < 0) throw ServiceError("cannot bind " + impl_->config.host);
  } else {
    if (!s.bind_to_port(impl_->config.host, impl_->config.port)) {
      throw ServiceError("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port) +
                         " (port in use?)");
    }
    impl_->boundPort = impl_->config.port;
  }
  impl_->stepper->start();
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->boundPort;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  impl_->stepper->stop();
}

int Service::port() const { return impl_->boundPort; }
const ServiceConfig& Service::config() const { return impl_->config; }
Stepper& Service::stepper() { return *impl_->stepper; }
std::shared_ptr<Session> Service::session() const { return impl_->currentSession(); }

}  // namespace magicitem::service
