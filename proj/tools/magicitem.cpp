#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "magicitem/common/digest.hpp"
#include "magicitem/eval/scenario.hpp"
#include "magicitem/gateway/gateway.hpp"
#include "magicitem/prompt/prompt.hpp"
#include "magicitem/runtime/catalog.hpp"
#include "magicitem/service/config.hpp"
#include "magicitem/service/server.hpp"

namespace {

using namespace magicitem;

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& bytes, const std::string& out) {
  if (out.empty()) {
    std::fwrite(bytes.data(), 1, bytes.size(), stdout);
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + out);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

prompt::PromptEnvelope envelopeFor(const std::string& request, const std::string& model) {
  return prompt::buildPrompt(prompt::renderDefinition(runtime::defaultCatalog()), request, model);
}

void addPromptCommands(CLI::App& app) {
  auto* cmd = app.add_subcommand("prompt", "Render prompt artifacts");
  cmd->require_subcommand(1);

  static std::string out;
  static std::string request;
  static std::string model = std::string(prompt::kDefaultModel);

  auto* def = cmd->add_subcommand("definition", "Rendered API definition file");
  def->add_option("--out", out);
  def->callback([] { emit(prompt::renderDefinition(runtime::defaultCatalog()).text, out); });

  auto* tmpl = cmd->add_subcommand("template", "Frozen template bytes");
  tmpl->add_option("--out", out);
  tmpl->callback([] { emit(std::string(prompt::kPromptTemplate), out); });

  auto* sys = cmd->add_subcommand("system", "Filled system text");
  sys->add_option("--out", out);
  sys->callback([] {
    emit(prompt::fillTemplate(prompt::kPromptTemplate,
                              prompt::renderDefinition(runtime::defaultCatalog()).text),
         out);
  });

  auto* key = cmd->add_subcommand("key", "Fixture key for a request");
  key->add_option("--request", request)->required();
  key->add_option("--model", model);
  key->callback([] { std::cout << gateway::fixtureKey(envelopeFor(request, model)) << "\n"; });
}

void addFixtureCommands(CLI::App& app) {
  auto* cmd = app.add_subcommand("fixture", "Manage mock gateway fixtures");
  cmd->require_subcommand(1);

  static std::string request;
  static std::string replyFile;
  static std::string dir = "fixtures";
  static int delayMs = 0;

  auto* add = cmd->add_subcommand("add", "Store a reply for a request");
  add->add_option("--request", request)->required();
  add->add_option("--reply-file", replyFile)->required()->check(CLI::ExistingFile);
  add->add_option("--dir", dir);
  add->add_option("--delay-ms", delayMs)->check(CLI::NonNegativeNumber);
  add->callback([] {
    const auto key = gateway::fixtureKey(envelopeFor(request, std::string(prompt::kDefaultModel)));
    gateway::Fixture f;
    f.reply = readFile(replyFile);
    f.delayMs = delayMs;
    gateway::writeFixture(dir, key, f);
    std::cout << key << "\n";
  });
}

void addServeCommand(CLI::App& app) {
  auto* cmd = app.add_subcommand("serve", "Run the HTTP service");
  // The API key is read from the environment variable named by
  // api_key_env; there is deliberately no flag for it.
  static std::string configFile;
  static std::optional<int> port;
  static std::optional<std::string> host, syncDir, dataDir, staticDir, backend, fixtures, model;
  static std::optional<std::uint64_t> seed;
  static bool manual = false;
  cmd->add_option("--config", configFile, "TOML file")->check(CLI::ExistingFile);
  cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  cmd->add_option("--host", host);
  cmd->add_option("--sync-dir", syncDir);
  cmd->add_option("--data-dir", dataDir);
  cmd->add_option("--static-dir", staticDir);
  cmd->add_option("--backend", backend, "live | mock | replay");
  cmd->add_option("--fixtures", fixtures);
  cmd->add_option("--model", model);
  cmd->add_option("--seed", seed);
  cmd->add_flag("--manual-step", manual, "advance frames only via POST /api/step");
  cmd->callback([] {
    service::ServiceConfig cfg;
    if (!configFile.empty()) service::applyConfigFile(cfg, configFile);
    if (port) cfg.port = *port;
    if (host) cfg.host = *host;
    if (syncDir) cfg.syncDir = *syncDir;
    if (dataDir) cfg.dataDir = *dataDir;
    if (staticDir) cfg.staticDir = *staticDir;
    if (fixtures) cfg.gateway.fixturesDir = *fixtures;
    if (model) cfg.gateway.model = *model;
    if (seed) cfg.seed = *seed;
    if (manual) cfg.manualStep = true;
    if (backend && !gateway::parseBackend(*backend, cfg.gateway.backend)) {
      throw std::runtime_error("--backend must be live, mock or replay");
    }

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // before any thread starts

    service::Service svc(cfg);
    const int bound = svc.start();
    std::cerr << "listening on http://" << cfg.host << ":" << bound << "\n";
    int sig = 0;
    sigwait(&set, &sig);
    std::cerr << "shutting down\n";
    svc.stop();
  });
}

void addEvalCommand(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "Run scenarios");
  static std::string scenario, suite, out;
  static eval::RunOptions opts;
  static std::string fixtures = "fixtures";
  auto* one = cmd->add_option("--scenario", scenario)->check(CLI::ExistingFile);
  auto* many = cmd->add_option("--suite", suite);
  one->excludes(many);
  cmd->add_option("--out", out, "write the JSON report here");
  cmd->add_option("--seed", opts.seed);
  cmd->add_option("--fixtures", fixtures);
  cmd->add_flag("--require-coverage", opts.requireCoverage, "fail when a category has no scenario");
  cmd->callback([] {
    opts.fixturesDir = fixtures;
    eval::SuiteReport report;
    if (!scenario.empty()) {
      try {
        report.scenarios.push_back(eval::runScenario(eval::loadScenario(scenario), opts));
        report.pass = report.scenarios.back().pass;
      } catch (const std::exception& e) {
        report.unreadable.emplace_back(scenario, e.what());
        report.pass = false;
      }
      report.digest = sha256Hex(eval::toJson(report, false).dump());
    } else if (!suite.empty()) {
      report = eval::runSuite(suite, opts);
    } else {
      throw CLI::RequiredError("--scenario or --suite");
    }
    std::cout << eval::formatTable(report);
    if (!out.empty()) emit(eval::toJson(report).dump(2) + "\n", out);
    if (!report.pass) throw CLI::RuntimeError(2);
  });
}

void addRunCommand(CLI::App& app) {
  auto* cmd = app.add_subcommand("run", "Run one script headless and dump the trace");
  static std::string script, trace;
  static std::uint64_t frames = 600;
  static std::uint64_t seed = 42;
  cmd->add_option("--script", script)->required()->check(CLI::ExistingFile);
  cmd->add_option("--frames", frames)->check(CLI::Range(1, 10000000));
  cmd->add_option("--trace", trace, "JSONL output, one line per frame");
  cmd->add_option("--seed", seed);
  cmd->callback([] {
    eval::ScenarioSpec spec;
    spec.name = script;
    spec.frames = frames;
    spec.items.push_back({world::ItemKind::Chair, {0, 0, 2}});
    spec.players.push_back({0, 0, 0});
    spec.scripts.push_back({1, 0, readFile(script), std::nullopt});
    eval::OracleSpec ok;
    ok.type = "predicate";
    ok.name = "no_errors";
    spec.oracles.push_back(ok);
    eval::RunOptions opts;
    opts.seed = seed;
    std::unique_ptr<world::World> w;
    auto report = eval::runScenario(spec, opts, &w);
    if (!trace.empty()) {
      std::ofstream f(trace, std::ios::trunc);
      if (!f) throw std::runtime_error("cannot write " + trace);
      for (const auto& rec : w->trace()) f << world::toJsonLine(rec) << "\n";
    }
    for (const auto& line : report.consoleExcerpt) std::cout << line << "\n";
    std::cout << "frames " << report.frames << "  trace " << report.traceDigest << "\n";
    if (!report.pass) throw CLI::RuntimeError(2);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MagicItem workbench"};
  app.require_subcommand(1);
  addPromptCommands(app);
  addFixtureCommands(app);
  addServeCommand(app);
  addEvalCommand(app);
  addRunCommand(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
