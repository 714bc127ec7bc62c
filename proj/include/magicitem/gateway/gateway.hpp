#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "magicitem/prompt/prompt.hpp"

namespace magicitem::gateway {

enum class Backend { Live, Mock, Replay };
std::string_view toString(Backend b);
bool parseBackend(std::string_view text, Backend& out);

struct GatewayConfig {
  Backend backend = Backend::Mock;
  std::string baseUrl = "https://api.openai.com/v1";
  std::string model = std::string(prompt::kDefaultModel);
  std::string apiKeyEnv = "MAGICITEM_API_KEY";
  double timeoutSeconds = 120;
  std::filesystem::path fixturesDir = "fixtures";
  bool record = false;          // replay: fetch and store unseen prompts
  bool stream = true;           // live: request server-sent events
  bool virtualDelay = false;    // mock: report delay_ms without sleeping
};

struct Usage {
  std::int64_t promptTokens = 0;
  std::int64_t completionTokens = 0;
  bool estimated = true;
};

/// ceil(bytes / 4).
std::int64_t estimateTokens(std::string_view text);

using Clock = std::chrono::system_clock;

struct GenerationRecord {
  std::string promptDigest;
  Clock::time_point sentAt;
  Clock::time_point createdAt;
  Clock::time_point completedAt;
  double generationMs = 0;  // completed - created
  double totalMs = 0;       // completed - sent
  Usage usage;
  std::string rawReply;
  std::optional<std::string> script;
  std::optional<prompt::ExtractionErrorKind> extractionError;
  Backend backend = Backend::Mock;
  std::string model;
};

nlohmann::json toJson(const GenerationRecord& r);

enum class GatewayErrorKind { Timeout, Transport, ProviderStatus, MissingFixture, MissingKey };
std::string_view toString(GatewayErrorKind k);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, std::string message, int status = 0,
               std::string bodyExcerpt = {});
  GatewayErrorKind kind() const { return kind_; }
  int status() const { return status_; }
  const std::string& bodyExcerpt() const { return excerpt_; }

 private:
  GatewayErrorKind kind_;
  int status_;
  std::string excerpt_;
};

/// Fixture key: SHA-256 of system-text + "\n\0\n" + user-text.
std::string fixtureKey(const prompt::PromptEnvelope& env);

struct Fixture {
  std::string reply;
  int delayMs = 0;
  std::optional<Usage> usage;
};

std::optional<Fixture> loadFixture(const std::filesystem::path& dir, const std::string& key);
/// Atomic write of `<dir>/<key>.json`.
void writeFixture(const std::filesystem::path& dir, const std::string& key, const Fixture& f);

/// Minimal HTTP seam for the live backend.
struct HttpRequest {
  std::string url;  // absolute
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeoutSeconds = 120;
};

struct HttpResponse {
  int status = 0;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Streams body chunks to `onChunk` as they arrive. Throws GatewayError
  /// (Timeout or Transport) on connection failure.
  virtual HttpResponse post(const HttpRequest& req,
                            const std::function<void(std::string_view)>& onChunk) = 0;
};

/// cpp-httplib based transport (https when built with OpenSSL).
std::unique_ptr<HttpTransport> makeDefaultTransport();

/// Chat-completions request body for an envelope.
nlohmann::json chatRequestBody(const prompt::PromptEnvelope& env, bool stream);

class Gateway {
 public:
  explicit Gateway(GatewayConfig config, std::unique_ptr<HttpTransport> transport = nullptr);

  /// Thread-safe; calls are independent.
  GenerationRecord generate(const prompt::PromptEnvelope& env) const;

  const GatewayConfig& config() const { return config_; }

 private:
  GenerationRecord generateLive(const prompt::PromptEnvelope& env) const;
  GenerationRecord fromFixture(const prompt::PromptEnvelope& env, const Fixture& f) const;

  GatewayConfig config_;
  std::unique_ptr<HttpTransport> transport_;
};

}  // namespace magicitem::gateway
