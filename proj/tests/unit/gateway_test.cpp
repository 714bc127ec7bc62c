#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "magicitem/gateway/gateway.hpp"
#include "magicitem/runtime/catalog.hpp"

using namespace magicitem;
using namespace magicitem::gateway;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& tag) {
  auto dir = fs::temp_directory_path() /
             ("magicitem-gw-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int openSockets() {
  int n = 0;
  for (const auto& e : fs::directory_iterator("/proc/self/fd")) {
    std::error_code ec;
    auto target = fs::read_symlink(e.path(), ec);
    if (!ec && target.string().rfind("socket:", 0) == 0) ++n;
  }
  return n;
}

prompt::PromptEnvelope jumpEnvelope() {
  return prompt::buildPrompt(prompt::renderDefinition(runtime::defaultCatalog()),
                             "make me jump three times higher");
}

// Canned transport: records the request, replays scripted chunks.
class FakeTransport : public HttpTransport {
 public:
  int status = 200;
  std::vector<std::string> chunks;
  HttpRequest seen;
  int calls = 0;

  HttpResponse post(const HttpRequest& req,
                    const std::function<void(std::string_view)>& onChunk) override {
    seen = req;
    ++calls;
    for (const auto& c : chunks) onChunk(c);
    return {status};
  }
};

class ThrowingTransport : public HttpTransport {
 public:
  std::string message;
  HttpResponse post(const HttpRequest&, const std::function<void(std::string_view)>&) override {
    throw GatewayError(GatewayErrorKind::Timeout, message);
  }
};

struct KeyEnv {
  explicit KeyEnv(const char* value) { ::setenv("MAGICITEM_TEST_KEY", value, 1); }
  ~KeyEnv() { ::unsetenv("MAGICITEM_TEST_KEY"); }
};

GatewayConfig liveConfig(bool stream) {
  GatewayConfig c;
  c.backend = Backend::Live;
  c.apiKeyEnv = "MAGICITEM_TEST_KEY";
  c.baseUrl = "https://example.invalid/v1/";
  c.stream = stream;
  return c;
}

}  // namespace

TEST(EstimateTokens, CeilingOfBytesOverFour) {
  EXPECT_EQ(estimateTokens(""), 0);
  EXPECT_EQ(estimateTokens("12345678"), 2);
  EXPECT_EQ(estimateTokens("123456789"), 3);
  EXPECT_EQ(estimateTokens("a"), 1);
}

TEST(EstimateTokens, FrozenSystemTextGoldenCount) {
  auto env = jumpEnvelope();
  EXPECT_EQ(env.systemText.size(), 8624u);
  EXPECT_EQ(estimateTokens(env.systemText), 2156);
}

TEST(FixtureKey, CoversBothMessages) {
  prompt::PromptEnvelope a{"sys", "user"};
  prompt::PromptEnvelope b{"sys", "user2"};
  prompt::PromptEnvelope c{"sys2", "user"};
  prompt::PromptEnvelope d{"sy", "s\n\n\nuser"};
  EXPECT_EQ(fixtureKey(a).size(), 64u);
  EXPECT_NE(fixtureKey(a), fixtureKey(b));
  EXPECT_NE(fixtureKey(a), fixtureKey(c));
  EXPECT_NE(fixtureKey(a), fixtureKey(d));
  EXPECT_EQ(fixtureKey(a), fixtureKey(prompt::PromptEnvelope{"sys", "user"}));
}

TEST(MockGateway, HonorsDelay) {
  auto dir = scratchDir("delay");
  auto env = jumpEnvelope();
  writeFixture(dir, fixtureKey(env), {"```javascript\n$.log(1);\n```", 250, std::nullopt});
  GatewayConfig cfg;
  cfg.fixturesDir = dir;
  Gateway gw(cfg);
  auto r = gw.generate(env);
  EXPECT_GE(r.generationMs, 250.0);
  EXPECT_LE(r.generationMs, 300.0);
  EXPECT_GE(r.totalMs, r.generationMs);
  EXPECT_LE(r.createdAt, r.completedAt);
  ASSERT_TRUE(r.script);
  EXPECT_EQ(*r.script, "$.log(1);");
  EXPECT_TRUE(r.usage.estimated);
  EXPECT_EQ(r.backend, Backend::Mock);
  fs::remove_all(dir);
}

TEST(MockGateway, VirtualDelayIsDeterministic) {
  auto dir = scratchDir("virtual");
  auto env = jumpEnvelope();
  writeFixture(dir, fixtureKey(env), {"```js\nx\n```", 5000, Usage{10, 2, false}});
  GatewayConfig cfg;
  cfg.fixturesDir = dir;
  cfg.virtualDelay = true;
  Gateway gw(cfg);
  auto a = gw.generate(env);
  auto b = gw.generate(env);
  EXPECT_EQ(a.generationMs, 5000.0);
  EXPECT_EQ(a.generationMs, b.generationMs);
  EXPECT_EQ(a.rawReply, b.rawReply);
  EXPECT_EQ(a.promptDigest, b.promptDigest);
  EXPECT_FALSE(a.usage.estimated);
  EXPECT_EQ(a.usage.promptTokens, 10);
  fs::remove_all(dir);
}

TEST(MockGateway, MissingFixture) {
  auto dir = scratchDir("missing");
  GatewayConfig cfg;
  cfg.fixturesDir = dir;
  Gateway gw(cfg);
  try {
    gw.generate(jumpEnvelope());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::MissingFixture);
  }
  cfg.backend = Backend::Replay;
  Gateway replay(cfg);
  EXPECT_THROW(replay.generate(jumpEnvelope()), GatewayError);
  fs::remove_all(dir);
}

TEST(MockGateway, ProseReplyRecordsExtractionError) {
  auto dir = scratchDir("prose");
  auto env = jumpEnvelope();
  writeFixture(dir, fixtureKey(env), {"Sure, I can help with that.", 0, std::nullopt});
  GatewayConfig cfg;
  cfg.fixturesDir = dir;
  auto r = Gateway(cfg).generate(env);
  EXPECT_FALSE(r.script);
  ASSERT_TRUE(r.extractionError);
  EXPECT_EQ(*r.extractionError, prompt::ExtractionErrorKind::NoCodeBlock);
  fs::remove_all(dir);
}

TEST(MockGateway, OpensNoSockets) {
  auto dir = scratchDir("sockets");
  auto env = jumpEnvelope();
  writeFixture(dir, fixtureKey(env), {"```js\nx\n```", 0, std::nullopt});
  const int before = openSockets();
  for (auto backend : {Backend::Mock, Backend::Replay}) {
    GatewayConfig cfg;
    cfg.backend = backend;
    cfg.fixturesDir = dir;
    Gateway gw(cfg);
    gw.generate(env);
    try {
      gw.generate(prompt::PromptEnvelope{"other", "prompt"});
    } catch (const GatewayError&) {
    }
    EXPECT_EQ(openSockets(), before);
  }
  fs::remove_all(dir);
}

TEST(LiveGateway, MissingKey) {
  ::unsetenv("MAGICITEM_TEST_KEY");
  auto fake = std::make_unique<FakeTransport>();
  auto* raw = fake.get();
  Gateway gw(liveConfig(false), std::move(fake));
  try {
    gw.generate(jumpEnvelope());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::MissingKey);
  }
  EXPECT_EQ(raw->calls, 0);
}

TEST(LiveGateway, NonStreamingUsagePassThrough) {
  KeyEnv key("sk-test-0123456789");
  auto fake = std::make_unique<FakeTransport>();
  fake->chunks = {R"({"choices":[{"message":{"role":"assistant","content":"```javascript\n$.log(2);\n```"}}],)",
                  R"("usage":{"prompt_tokens":31000,"completion_tokens":180}})"};
  auto* raw = fake.get();
  Gateway gw(liveConfig(false), std::move(fake));
  auto env = jumpEnvelope();
  auto r = gw.generate(env);
  EXPECT_FALSE(r.usage.estimated);
  EXPECT_EQ(r.usage.promptTokens, 31000);
  EXPECT_EQ(r.usage.completionTokens, 180);
  ASSERT_TRUE(r.script);
  EXPECT_EQ(*r.script, "$.log(2);");

  EXPECT_EQ(raw->seen.url, "https://example.invalid/v1/chat/completions");
  auto body = nlohmann::json::parse(raw->seen.body);
  EXPECT_EQ(body["model"], "gpt-4-turbo");
  EXPECT_EQ(body["temperature"], 0);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], env.systemText);
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["messages"][1]["content"], env.userText);
  EXPECT_FALSE(body.contains("stream"));
}

TEST(LiveGateway, StreamingAssemblesDeltas) {
  KeyEnv key("sk-test-0123456789");
  auto fake = std::make_unique<FakeTransport>();
  fake->chunks = {
      "data: {\"choices\":[{\"delta\":{\"content\":\"```js\\n$.lo\"}}]}\n\n",
      "data: {\"choices\":[{\"delta\":{\"content\":\"g(3);\\n```\"}}]}\r\n\r\nda",
      "ta: {\"choices\":[],\"usage\":{\"prompt_tokens\":5,\"completion_tokens\":7}}\n\n",
      "data: [DONE]\n\n"};
  auto* raw = fake.get();
  Gateway gw(liveConfig(true), std::move(fake));
  auto r = gw.generate(jumpEnvelope());
  EXPECT_EQ(r.rawReply, "```js\n$.log(3);\n```");
  ASSERT_TRUE(r.script);
  EXPECT_EQ(*r.script, "$.log(3);");
  EXPECT_EQ(r.usage.completionTokens, 7);
  EXPECT_FALSE(r.usage.estimated);
  EXPECT_GE(r.generationMs, 0);
  EXPECT_LE(r.createdAt, r.completedAt);
  auto body = nlohmann::json::parse(raw->seen.body);
  EXPECT_EQ(body["stream"], true);
}

TEST(LiveGateway, StreamingWithoutUsageIsEstimated) {
  KeyEnv key("sk-test-0123456789");
  auto fake = std::make_unique<FakeTransport>();
  fake->chunks = {"data: {\"choices\":[{\"delta\":{\"content\":\"12345678\"}}]}\n\ndata: [DONE]\n\n"};
  Gateway gw(liveConfig(true), std::move(fake));
  auto r = gw.generate(jumpEnvelope());
  EXPECT_TRUE(r.usage.estimated);
  EXPECT_EQ(r.usage.completionTokens, 2);
  EXPECT_EQ(r.extractionError, prompt::ExtractionErrorKind::NoCodeBlock);
}

TEST(LiveGateway, ProviderStatusCarriesExcerpt) {
  KeyEnv key("sk-test-0123456789");
  auto fake = std::make_unique<FakeTransport>();
  fake->status = 429;
  fake->chunks = {std::string(2000, 'x')};
  Gateway gw(liveConfig(false), std::move(fake));
  try {
    gw.generate(jumpEnvelope());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::ProviderStatus);
    EXPECT_EQ(e.status(), 429);
    EXPECT_EQ(e.bodyExcerpt().size(), 512u);
  }
}

TEST(LiveGateway, ReplayRecordsUnseenPrompt) {
  KeyEnv key("sk-test-0123456789");
  auto dir = scratchDir("record");
  auto fake = std::make_unique<FakeTransport>();
  fake->chunks = {R"({"choices":[{"message":{"content":"```js\nrec();\n```"}}]})"};
  auto* raw = fake.get();
  auto cfg = liveConfig(false);
  cfg.backend = Backend::Replay;
  cfg.record = true;
  cfg.fixturesDir = dir;
  Gateway gw(cfg, std::move(fake));
  auto env = jumpEnvelope();
  auto first = gw.generate(env);
  auto second = gw.generate(env);
  EXPECT_EQ(raw->calls, 1);
  EXPECT_EQ(first.rawReply, second.rawReply);
  EXPECT_TRUE(fs::exists(dir / (fixtureKey(env) + ".json")));
  fs::remove_all(dir);
}

// The key must not leak through records, errors, or excerpts.
TEST(KeyHygiene, SecretNeverSurfaces) {
  const std::string secret = "sk-live-SECRET-4242";
  KeyEnv key(secret.c_str());
  auto env = jumpEnvelope();

  {
    auto fake = std::make_unique<FakeTransport>();
    fake->chunks = {R"({"choices":[{"message":{"content":"```js\nok();\n```"}}]})"};
    Gateway gw(liveConfig(false), std::move(fake));
    auto r = gw.generate(env);
    EXPECT_EQ(toJson(r).dump().find(secret), std::string::npos);
  }
  {
    auto fake = std::make_unique<FakeTransport>();
    fake->status = 401;
    fake->chunks = {"{\"error\":\"bad key " + secret + " rejected\"}"};
    Gateway gw(liveConfig(false), std::move(fake));
    try {
      gw.generate(env);
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(std::string(e.what()).find(secret), std::string::npos);
      EXPECT_EQ(e.bodyExcerpt().find(secret), std::string::npos);
      EXPECT_NE(e.bodyExcerpt().find("[redacted]"), std::string::npos);
    }
  }
  {
    auto fake = std::make_unique<ThrowingTransport>();
    fake->message = "timed out sending Bearer " + secret;
    Gateway gw(liveConfig(false), std::move(fake));
    try {
      gw.generate(env);
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(e.kind(), GatewayErrorKind::Timeout);
      EXPECT_EQ(std::string(e.what()).find(secret), std::string::npos);
    }
  }
}

TEST(KeyHygiene, SecretInsideMaskTerminates) {
  KeyEnv key("red");
  auto fake = std::make_unique<FakeTransport>();
  fake->status = 500;
  fake->chunks = {"red red redacted"};
  Gateway gw(liveConfig(false), std::move(fake));
  try {
    gw.generate(jumpEnvelope());
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.status(), 500);
  }
}

TEST(GenerationRecordJson, SnakeCaseFields) {
  GenerationRecord r;
  r.promptDigest = "abc";
  r.rawReply = "x";
  r.extractionError = prompt::ExtractionErrorKind::NoCodeBlock;
  auto j = toJson(r);
  for (const char* k : {"prompt_digest", "generation_ms", "total_ms", "raw_reply", "backend"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}
