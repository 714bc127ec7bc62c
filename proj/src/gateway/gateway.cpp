#include "magicitem/gateway/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include "magicitem/common/digest.hpp"
#include "magicitem/common/format.hpp"

namespace magicitem::gateway {

using nlohmann::json;

std::string_view toString(Backend b) {
  switch (b) {
    case Backend::Live: return "live";
    case Backend::Mock: return "mock";
    case Backend::Replay: return "replay";
  }
  return "?";
}

bool parseBackend(std::string_view text, Backend& out) {
  if (text == "live") out = Backend::Live;
  else if (text == "mock") out = Backend::Mock;
  else if (text == "replay") out = Backend::Replay;
  else return false;
  return true;
}

std::string_view toString(GatewayErrorKind k) {
  switch (k) {
    case GatewayErrorKind::Timeout: return "Timeout";
    case GatewayErrorKind::Transport: return "Transport";
    case GatewayErrorKind::ProviderStatus: return "ProviderStatus";
    case GatewayErrorKind::MissingFixture: return "MissingFixture";
    case GatewayErrorKind::MissingKey: return "MissingKey";
  }
  return "?";
}

GatewayError::GatewayError(GatewayErrorKind kind, std::string message, int status,
                           std::string bodyExcerpt)
    : std::runtime_error(std::string(toString(kind)) + ": " + message),
      kind_(kind),
      status_(status),
      excerpt_(std::move(bodyExcerpt)) {}

std::int64_t estimateTokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::string fixtureKey(const prompt::PromptEnvelope& env) {
  std::string material = env.systemText;
  material += "\n";
  material += '\0';
  material += "\n";
  material += env.userText;
  return sha256Hex(material);
}

json toJson(const GenerationRecord& r) {
  json j = {{"prompt_digest", r.promptDigest},
            {"request_sent_at", formatRfc3339(r.sentAt)},
            {"response_created_at", formatRfc3339(r.createdAt)},
            {"response_completed_at", formatRfc3339(r.completedAt)},
            {"generation_ms", r.generationMs},
            {"total_ms", r.totalMs},
            {"usage",
             {{"prompt_tokens", r.usage.promptTokens},
              {"completion_tokens", r.usage.completionTokens},
              {"estimated", r.usage.estimated}}},
            {"raw_reply", r.rawReply},
            {"backend", toString(r.backend)},
            {"model", r.model}};
  j["script"] = r.script ? json(*r.script) : json(nullptr);
  j["extraction_error"] =
      r.extractionError ? json(std::string(prompt::toString(*r.extractionError))) : json(nullptr);
  return j;
}

std::optional<Fixture> loadFixture(const std::filesystem::path& dir, const std::string& key) {
  std::ifstream in(dir / (key + ".json"), std::ios::binary);
  if (!in) {
    return std::nullopt;
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("fixture " + key + " is not valid JSON: " + e.what());
  }
  Fixture f;
  f.reply = j.at("reply").get<std::string>();
  f.delayMs = j.value("delay_ms", 0);
  if (j.contains("usage") && j["usage"].is_object()) {
    Usage u;
    u.promptTokens = j["usage"].value("prompt_tokens", std::int64_t{0});
    u.completionTokens = j["usage"].value("completion_tokens", std::int64_t{0});
    u.estimated = false;
    f.usage = u;
  }
  return f;
}

void writeFixture(const std::filesystem::path& dir, const std::string& key, const Fixture& f) {
  std::filesystem::create_directories(dir);
  json j = {{"reply", f.reply}};
  if (f.delayMs) j["delay_ms"] = f.delayMs;
  if (f.usage) {
    j["usage"] = {{"prompt_tokens", f.usage->promptTokens},
                  {"completion_tokens", f.usage->completionTokens}};
  }
  auto target = dir / (key + ".json");
  auto tmp = dir / (key + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write fixture " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

json chatRequestBody(const prompt::PromptEnvelope& env, bool stream) {
  json body = {{"model", env.model},
               {"temperature", env.temperature},
               {"messages",
                json::array({{{"role", "system"}, {"content", env.systemText}},
                             {{"role", "user"}, {"content", env.userText}}})}};
  if (stream) {
    body["stream"] = true;
    body["stream_options"] = {{"include_usage", true}};
  }
  return body;
}

namespace {

double msBetween(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

void applyExtraction(GenerationRecord& r) {
  try {
    r.script = prompt::extractCode(r.rawReply);
  } catch (const prompt::ExtractionError& e) {
    r.extractionError = e.kind();
  }
}

std::string scrub(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  constexpr std::string_view kMask = "[redacted]";
  for (auto pos = text.find(secret); pos != std::string::npos;
       pos = text.find(secret, pos + kMask.size())) {
    text.replace(pos, secret.size(), kMask);
  }
  return text;
}

}  // namespace

Gateway::Gateway(GatewayConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

GenerationRecord Gateway::fromFixture(const prompt::PromptEnvelope& env, const Fixture& f) const {
  GenerationRecord r;
  r.backend = config_.backend;
  r.model = env.model;
  r.promptDigest = fixtureKey(env);
  const auto wallStart = Clock::now();
  const auto start = std::chrono::steady_clock::now();
  if (f.delayMs > 0 && !config_.virtualDelay) {
    std::this_thread::sleep_for(std::chrono::milliseconds(f.delayMs));
  }
  double elapsed = config_.virtualDelay ? f.delayMs : msBetween(start, std::chrono::steady_clock::now());
  r.sentAt = wallStart;
  r.createdAt = wallStart;
  r.completedAt = wallStart + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double, std::milli>(elapsed));
  r.generationMs = elapsed;
  r.totalMs = elapsed;
  r.rawReply = f.reply;
  if (f.usage) {
    r.usage = *f.usage;
  } else {
    r.usage = {estimateTokens(env.systemText) + estimateTokens(env.userText),
               estimateTokens(f.reply), true};
  }
  applyExtraction(r);
  return r;
}

GenerationRecord Gateway::generate(const prompt::PromptEnvelope& env) const {
  switch (config_.backend) {
    case Backend::Live: return generateLive(env);
    case Backend::Mock:
    case Backend::Replay: {
      const std::string key = fixtureKey(env);
      if (auto f = loadFixture(config_.fixturesDir, key)) {
        return fromFixture(env, *f);
      }
      if (config_.backend == Backend::Replay && config_.record) {
        GenerationRecord live = generateLive(env);
        Fixture f;
        f.reply = live.rawReply;
        if (!live.usage.estimated) f.usage = live.usage;
        writeFixture(config_.fixturesDir, key, f);
        live.backend = Backend::Replay;
        return live;
      }
      throw GatewayError(GatewayErrorKind::MissingFixture,
                         "no fixture " + key + ".json in " + config_.fixturesDir.string());
    }
  }
  throw GatewayError(GatewayErrorKind::Transport, "unknown backend");
}

GenerationRecord Gateway::generateLive(const prompt::PromptEnvelope& env) const {
  const char* keyValue = std::getenv(config_.apiKeyEnv.c_str());
  const std::string key = keyValue ? keyValue : "";
  if (key.empty()) {
    throw GatewayError(GatewayErrorKind::MissingKey,
                       "environment variable " + config_.apiKeyEnv + " is not set");
  }
  std::unique_ptr<HttpTransport> fallback;
  HttpTransport* transport = transport_.get();
  if (!transport) {
    fallback = makeDefaultTransport();
    transport = fallback.get();
  }

  std::string base = config_.baseUrl;
  while (!base.empty() && base.back() == '/') base.pop_back();
  HttpRequest req;
  req.url = base + "/chat/completions";
  req.headers = {{"Authorization", "Bearer " + key}, {"Content-Type", "application/json"}};
  req.body = chatRequestBody(env, config_.stream).dump();
  req.timeoutSeconds = config_.timeoutSeconds;

  GenerationRecord r;
  r.backend = Backend::Live;
  r.model = env.model;
  r.promptDigest = fixtureKey(env);

  std::string raw;        // whole body, for errors and non-streaming replies
  std::string pending;    // incomplete SSE line
  std::string content;
  std::optional<Usage> usage;
  bool sawEvent = false;
  bool done = false;
  std::optional<std::chrono::steady_clock::time_point> firstByte, firstEvent, lastEvent;

  auto handleEvent = [&](std::string_view data) {
    const auto now = std::chrono::steady_clock::now();
    if (!firstEvent) firstEvent = now;
    lastEvent = now;
    sawEvent = true;
    if (data == "[DONE]") {
      done = true;
      return;
    }
    json chunk = json::parse(data, nullptr, false);
    if (chunk.is_discarded()) return;
    if (chunk.contains("choices") && chunk["choices"].is_array()) {
      for (const auto& choice : chunk["choices"]) {
        if (choice.contains("delta") && choice["delta"].contains("content") &&
            choice["delta"]["content"].is_string()) {
          content += choice["delta"]["content"].get<std::string>();
        }
      }
    }
    if (chunk.contains("usage") && chunk["usage"].is_object()) {
      usage = Usage{chunk["usage"].value("prompt_tokens", std::int64_t{0}),
                    chunk["usage"].value("completion_tokens", std::int64_t{0}), false};
    }
  };

  const auto wallSent = Clock::now();
  const auto sent = std::chrono::steady_clock::now();
  HttpResponse res;
  try {
    res = transport->post(req, [&](std::string_view chunk) {
      if (!firstByte) firstByte = std::chrono::steady_clock::now();
      raw.append(chunk);
      if (!config_.stream) return;
      pending.append(chunk);
      std::size_t nl;
      while ((nl = pending.find('\n')) != std::string::npos) {
        std::string line = pending.substr(0, nl);
        pending.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("data:", 0) == 0) {
          std::string_view data(line);
          data.remove_prefix(5);
          while (!data.empty() && data.front() == ' ') data.remove_prefix(1);
          handleEvent(data);
        }
      }
    });
  } catch (const GatewayError& e) {
    throw GatewayError(e.kind(), scrub(e.what(), key));
  }
  const auto end = std::chrono::steady_clock::now();

  if (res.status < 200 || res.status >= 300) {
    std::string excerpt = scrub(raw.substr(0, 512), key);
    throw GatewayError(GatewayErrorKind::ProviderStatus,
                       "provider returned HTTP " + std::to_string(res.status), res.status, excerpt);
  }

  std::chrono::steady_clock::time_point created, completed;
  if (config_.stream && sawEvent) {
    created = *firstEvent;
    completed = done ? *lastEvent : end;
    r.rawReply = content;
  } else {
    json body = json::parse(raw, nullptr, false);
    if (body.is_discarded() || !body.contains("choices") || body["choices"].empty()) {
      throw GatewayError(GatewayErrorKind::Transport, "unrecognized provider response", res.status,
                         scrub(raw.substr(0, 512), key));
    }
    const auto& msg = body["choices"][0]["message"];
    r.rawReply = msg.contains("content") && msg["content"].is_string()
                     ? msg["content"].get<std::string>()
                     : std::string();
    if (body.contains("usage") && body["usage"].is_object()) {
      usage = Usage{body["usage"].value("prompt_tokens", std::int64_t{0}),
                    body["usage"].value("completion_tokens", std::int64_t{0}), false};
    }
    created = firstByte.value_or(end);
    completed = end;
  }

  auto toWall = [&](std::chrono::steady_clock::time_point t) {
    return wallSent + std::chrono::duration_cast<Clock::duration>(t - sent);
  };
  r.sentAt = wallSent;
  r.createdAt = toWall(created);
  r.completedAt = toWall(completed);
  r.generationMs = msBetween(created, completed);
  r.totalMs = msBetween(sent, completed);
  r.usage = usage.value_or(Usage{estimateTokens(env.systemText) + estimateTokens(env.userText),
                                 estimateTokens(r.rawReply), true});
  applyExtraction(r);
  return r;
}

}  // namespace magicitem::gateway
