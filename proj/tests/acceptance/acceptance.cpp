// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.
#include <httplib.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "magicitem/common/digest.hpp"
#include "magicitem/dsl/parser.hpp"
#include "magicitem/eval/scenario.hpp"
#include "magicitem/gateway/gateway.hpp"
#include "magicitem/prompt/prompt.hpp"
#include "magicitem/runtime/catalog.hpp"
#include "magicitem/runtime/instance.hpp"
#include "magicitem/service/metrics.hpp"
#include "magicitem/service/server.hpp"
#include "magicitem/sync/sync.hpp"
#include "magicitem/world/oracle.hpp"
#include "magicitem/world/world.hpp"

using namespace magicitem;
using nlohmann::json;
namespace fs = std::filesystem;
using Ms = std::chrono::duration<double, std::milli>;

namespace {

const fs::path kRoot = MAGICITEM_SOURCE_DIR;

struct Outcome {
  bool pass = true;
  std::ostringstream why;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      why << (why.tellp() > 0 ? "; " : "") << what;
    }
  }
};

std::string readFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratchDir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("magicitem-accept-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double elapsedMs(std::chrono::steady_clock::time_point t0) {
  return Ms(std::chrono::steady_clock::now() - t0).count();
}

eval::RunOptions suiteOptions() {
  eval::RunOptions o;
  o.seed = 42;
  o.fixturesDir = kRoot / "fixtures";
  o.requireCoverage = true;
  return o;
}

int socketCount() {
  int n = 0;
  for (const auto& e : fs::directory_iterator("/proc/self/fd")) {
    std::error_code ec;
    auto target = fs::read_symlink(e.path(), ec);
    if (!ec && target.string().rfind("socket:", 0) == 0) ++n;
  }
  return n;
}

// 1
void promptFidelity(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto golden = readFile(kRoot / "assets" / "system_prompt.golden.txt");
  const auto definition = readFile(kRoot / "assets" / "itemscript.d.txt");
  const auto tmpl = readFile(kRoot / "assets" / "prompt_template.txt");
  const auto sums = readFile(kRoot / "assets" / "SHA256SUMS");

  auto rendered = prompt::renderDefinition(runtime::defaultCatalog());
  auto env = prompt::buildPrompt(rendered, "make me jump three times higher");
  o.check(tmpl == prompt::kPromptTemplate, "template differs from frozen bytes");
  o.check(rendered.text == definition, "rendered definition differs from golden");
  o.check(env.systemText == golden, "system text differs from golden");
  o.check(sums.find(sha256Hex(golden) + "  system_prompt.golden.txt") != std::string::npos,
          "golden digest not in SHA256SUMS");
  o.check(env.systemText.find(definition) != std::string::npos, "definition not embedded verbatim");
  const double ms = elapsedMs(t0);
  o.check(ms < 1000, "took " + std::to_string(ms) + " ms");
  o.why << (o.pass ? "system text sha256 " + sha256Hex(env.systemText).substr(0, 16) : "");
}

// 2: generate -> pending file -> apply -> inputs, through the HTTP service.
void task1Reproduction(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto dir = scratchDir("task1");
  service::ServiceConfig cfg;
  cfg.port = 0;
  cfg.manualStep = true;
  cfg.syncDir = dir / "sync";
  cfg.dataDir = dir / "data";
  cfg.staticDir = dir / "ui";
  cfg.gateway.fixturesDir = kRoot / "fixtures";
  cfg.gateway.virtualDelay = true;
  service::Service svc(cfg);
  const int port = svc.start();
  httplib::Client c("127.0.0.1", port);
  auto post = [&](const std::string& path, const json& body) {
    auto res = c.Post(path, body.dump(), "application/json");
    return res ? std::make_pair(res->status, json::parse(res->body, nullptr, false))
               : std::make_pair(0, json());
  };

  post("/api/task/start", {{"task", 1}});
  auto [sg, gen] = post("/api/generate", {{"item_id", 1}, {"prompt", "make me jump three times higher"}});
  o.check(sg == 200, "generate status " + std::to_string(sg));
  o.check(fs::exists(cfg.syncDir / "item-1.pending.is"), "no pending file");
  auto [sa, applied] = post("/api/apply", {{"item_id", 1}});
  o.check(sa == 200 && applied.value("ok", false), "apply failed: " + applied.dump());
  post("/api/input", {{"player_id", 1}, {"action", "interact"}, {"item", 1}});
  post("/api/step", {{"frames", 10}});
  post("/api/input", {{"player_id", 1}, {"action", "jump"}});
  std::optional<std::uint64_t> fired;
  for (int f = 10; f < 300 && !fired; f += 10) {
    post("/api/step", {{"frames", 10}});
    auto res = c.Get("/api/world");
    auto w = json::parse(res ? res->body : "{}", nullptr, false);
    if (w.contains("oracles") && !w["oracles"]["task1"].is_null()) fired = w["oracles"]["task1"].get<std::uint64_t>();
  }
  svc.stop();
  fs::remove_all(dir);
  o.check(fired.has_value(), "task1 never fired with the generated script");

  auto baseline = eval::runScenario(eval::loadScenario(kRoot / "scenarios" / "task1_baseline.json"), suiteOptions());
  o.check(baseline.pass, "baseline scenario failed");
  std::string apex;
  for (const auto& r : baseline.oracles) {
    if (r.label == "player_apex_near") apex = r.detail;
  }
  const double ms = elapsedMs(t0);
  o.check(ms < 5000, "took " + std::to_string(ms) + " ms");
  if (o.pass) o.why << "fired at frame " << *fired << "; baseline " << apex;
}

// 3
void task2Reproduction(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  world::World w;
  int p = w.spawnPlayer({0, 0, 0});
  int chair = w.spawnItem(world::ItemKind::Chair, {0, 0, 2});
  const auto src = "$.onUpdate(dt => { let p=$.getPosition(); p.x += 1*dt; $.setPosition(p); });";
  w.applyInput(p, world::input::Ride{chair});
  o.check(w.installScript(chair, dsl::parse(src)).ok, "install failed");
  for (int i = 0; i < 1200; ++i) w.step();
  auto fired = world::oracleFiringFrame({w.trace().begin(), w.trace().end()}, world::Oracle::Task2,
                                        w.config().groundHalfExtent);
  o.check(fired.has_value(), "task2 never fired");
  if (fired) o.check(std::abs(static_cast<double>(*fired) - 630) <= 30, "fired at " + std::to_string(*fired));

  auto scenario = eval::runScenario(eval::loadScenario(kRoot / "scenarios" / "task2_drift.json"), suiteOptions());
  o.check(scenario.pass, "task2_drift scenario failed");
  const double ms = elapsedMs(t0);
  o.check(ms < 5000, "took " + std::to_string(ms) + " ms");
  if (o.pass) o.why << "fired at frame " << *fired;
}

// 4: every bundled scenario whose scripts call outside the catalog.
void category7Contract(Outcome& o) {
  std::vector<std::string> unsupported = {"setAmbientLight", "setPostProcessing"};
  int checked = 0;
  for (const auto& e : fs::directory_iterator(kRoot / "scenarios")) {
    if (e.path().extension() != ".json") continue;
    auto spec = eval::loadScenario(e.path());
    std::string member;
    for (const auto& s : spec.scripts) {
      for (const auto& u : unsupported) {
        if (s.source && s.source->find(u) != std::string::npos) member = u;
      }
    }
    if (member.empty()) continue;
    ++checked;
    std::unique_ptr<world::World> withScript, without;
    auto r = eval::runScenario(spec, suiteOptions(), &withScript);
    auto bare = spec;
    bare.scripts.clear();
    eval::runScenario(bare, suiteOptions(), &without);

    bool named = false;
    for (const auto& in : r.installs) {
      if (in.errorKind == "UnsupportedApi" && in.member.find(member) != std::string::npos) named = true;
    }
    for (const auto& rec : withScript->trace()) {
      for (const auto& line : rec.errors) {
        if (line.find("UnsupportedApi") != std::string::npos && line.find(member) != std::string::npos) named = true;
      }
    }
    o.check(named, spec.name + ": no UnsupportedApi naming " + member);
    // Same poses every frame as a run with no script at all.
    bool same = withScript->trace().size() == without->trace().size();
    for (std::size_t i = 0; same && i < withScript->trace().size(); ++i) {
      const auto& a = withScript->trace()[i];
      const auto& b = without->trace()[i];
      same = a.items.size() == b.items.size() && a.players.size() == b.players.size();
      for (std::size_t k = 0; same && k < a.items.size(); ++k) same = a.items[k].position == b.items[k].position;
      for (std::size_t k = 0; same && k < a.players.size(); ++k) same = a.players[k].position == b.players[k].position;
    }
    for (const auto& [id, item] : without->items()) {
      const auto* other = withScript->item(id);
      same = same && other && other->rotation == item.rotation && other->velocity == item.velocity;
    }
    o.check(same, spec.name + ": world diverged");
  }
  o.check(checked >= 2, "only " + std::to_string(checked) + " scenarios use unsupported APIs");
  if (o.pass) o.why << checked << " scenarios";
}

// 5
void determinism(Outcome& o) {
  auto a = eval::runSuite(kRoot / "scenarios", suiteOptions());
  auto b = eval::runSuite(kRoot / "scenarios", suiteOptions());
  o.check(a.digest == b.digest, "suite digests differ");

  auto randomRun = [] {
    world::World w(world::WorldConfig{}, 42);
    int p = w.spawnPlayer({0, 0, 0});
    w.spawnItem(world::ItemKind::Chair, {0, 0, 2});
    int g = w.spawnItem(world::ItemKind::Grabbable, {1, 0, 1});
    w.installScript(g, dsl::parse("$.onUpdate(dt => { let p = $.getPosition(); p.y = Math.random(); $.setPosition(p); });"));
    std::mt19937_64 rng(42);
    for (int f = 0; f < 1000; ++f) {
      switch (rng() % 8) {
        case 0: w.applyInput(p, world::input::Jump{}); break;
        case 1: w.applyInput(p, world::input::Move{{double(rng() % 3) - 1, 0, double(rng() % 3) - 1}}); break;
        case 2: w.applyInput(p, world::input::Grab{int(rng() % 2) + 1}); break;
        case 3: w.applyInput(p, world::input::Release{}); break;
        case 4: w.applyInput(p, world::input::Ride{1}); break;
        case 5: w.applyInput(p, world::input::ExitRide{}); break;
        default: break;
      }
      w.step();
    }
    return w.traceHash();
  };
  const auto h1 = randomRun(), h2 = randomRun();
  o.check(h1 == h2, "random-input trace hashes differ");
  if (o.pass) o.why << "suite " << a.digest.substr(0, 16) << ", trace " << h1.substr(0, 16);
}

// 6
void ballistic(Outcome& o) {
  for (double vy : {5.0, 10.0, 15.0}) {
    world::WorldConfig cfg;
    cfg.baseJumpSpeed = vy;
    world::World w(cfg);
    int p = w.spawnPlayer({0, 0, 0});
    w.applyInput(p, world::input::Jump{});
    double apex = 0;
    for (int i = 0; i < 400; ++i) {
      w.step();
      apex = std::max(apex, w.player(p)->position.y);
    }
    const double exact = vy * vy / (2 * -cfg.gravity.y);
    const double err = std::abs(apex - exact);
    o.check(err <= vy * cfg.dt, "vy=" + std::to_string(vy) + " error " + std::to_string(err));
    o.why << (o.pass ? "vy=" + std::to_string(int(vy)) + " err " + std::to_string(err) + " " : "");
  }
}

// Random programs: fragment soup, some byte-mutated.
std::string fuzzProgram(std::mt19937_64& rng) {
  static const std::vector<std::string> kStatements = {
      "let a = 1;", "let s = \"x\";", "a = a + 1;", "s = s + s;", "$.log(a);", "$.log(s);",
      "let p = $.getPosition();", "p.y += 0.1;", "$.setPosition(p);", "$.setRotation(Vector3(0, a, 0));",
      "$.state.n = ($.state.n || 0) + 1;", "$.state.v = [1, 2, {k: 3}];", "if (a > 2) { a = 0; } else { a = a * 2; }",
      "for (let i = 0; i < 50; i++) { a = a + i; }", "while (a < 1000) { a = a * 2 + 1; }",
      "let f = (n) => n <= 1 ? 1 : n * f(n - 1); a = f(8);", "let g = () => g(); g();",
      "while (true) {}", "for (;;) { s = s + s; }", "$.addImpulse(Vector3(0, Math.random(), 0));",
      "$.setGravityScale(Math.sin(a));", "$.setUseGravity(a > 1);", "a = undefinedThing + 1;",
      "$.setAmbientLight(1);", "$.teleport(1);", "let o = {x: 1}; o.x = o.x / 0;", "a = Math.sqrt(-1);",
      "let arr = [1, 2, 3]; a = arr[10];", "$.onUpdate(dt => { a = a + dt; });", "s = `t${a}`;",
      "a = null.x;", "p = Vector3(1, 2, 3).add(Vector3(1, 1, 1)).scale(2);", "$.setVelocity(p);",
  };
  static const std::vector<std::string> kEvents = {"onUpdate(dt", "onInteract(pl", "onGrab(pl", "onStart((",
                                                   "onRelease(pl", "onRide(pl"};
  std::string src;
  const int callbacks = 1 + int(rng() % 3);
  for (int c = 0; c < callbacks; ++c) {
    std::string ev = kEvents[rng() % kEvents.size()];
    src += "$." + ev + (ev.back() == '(' ? ")" : "") + " => {\n";
    const int n = 1 + int(rng() % 6);
    for (int i = 0; i < n; ++i) src += "  " + kStatements[rng() % kStatements.size()] + "\n";
    if (ev.find("pl") != std::string::npos && rng() % 2) src += "  pl.setJumpSpeedRate(a);\n";
    src += "});\n";
  }
  if (rng() % 3 == 0) {
    static const std::string kBytes = "(){}[];,.=+-*/<>!&|?:\"'`$ \nabcxyz0123456789";
    const int edits = 1 + int(rng() % 4);
    for (int e = 0; e < edits && !src.empty(); ++e) {
      const std::size_t at = rng() % src.size();
      switch (rng() % 3) {
        case 0: src.erase(at, 1 + rng() % 4); break;
        case 1: src.insert(at, 1, kBytes[rng() % kBytes.size()]); break;
        default: src[at] = kBytes[rng() % kBytes.size()]; break;
      }
    }
  }
  return src;
}

// 7
void sandbox(Outcome& o) {
  {
    world::World w;
    int p = w.spawnPlayer({0, 0, 0});
    int item = w.spawnItem(world::ItemKind::Grabbable, {0, 0, 1});
    auto installed = w.installScript(item, dsl::parse("$.onUpdate(dt => { $.setPosition(Vector3(0, 9, 0)); while(true){} });"));
    o.check(installed.ok, "install failed");
    bool budget = false;
    for (int i = 0; i < 5; ++i) {
      const auto& rec = w.step();
      for (const auto& e : rec.errors) budget = budget || e.find("BudgetExceeded") != std::string::npos;
    }
    o.check(budget, "no BudgetExceeded error");
    o.check(w.item(item)->position.y == 0, "effects from a failed dispatch were applied");
    o.check(w.frame() == 5 && w.applyInput(p, world::input::Jump{}).accepted, "simulation stopped");
  }

  std::mt19937_64 rng(20240607);
  int parsed = 0, crashes = 0;
  double worst = 0;
  runtime::WorldView view;
  view.itemId = 1;
  view.players[0] = runtime::PlayerView{};
  view.rngState = 42;
  const std::vector<runtime::EventKind> events = {runtime::EventKind::Update, runtime::EventKind::Interact,
                                                  runtime::EventKind::Grab, runtime::EventKind::Update};
  for (int i = 0; i < 10000; ++i) {
    const auto src = fuzzProgram(rng);
    try {
      std::shared_ptr<const dsl::Program> program;
      try {
        program = dsl::parse(src);
      } catch (const dsl::ParseError&) {
        continue;
      }
      ++parsed;
      auto t0 = std::chrono::steady_clock::now();
      auto inst = runtime::instantiate(program, runtime::BudgetConfig{}, view);
      worst = std::max(worst, elapsedMs(t0));
      if (!inst.instance) continue;
      for (auto kind : events) {
        t0 = std::chrono::steady_clock::now();
        runtime::dispatch(*inst.instance, runtime::Event{kind, 1.0 / 60.0, 0}, view);
        worst = std::max(worst, elapsedMs(t0));
      }
    } catch (...) {
      ++crashes;
    }
  }
  o.check(crashes == 0, std::to_string(crashes) + " programs threw out of the runtime");
  o.check(worst < 100, "slowest dispatch " + std::to_string(worst) + " ms");
  o.check(parsed > 1000, "fuzzer produced too few parseable programs");
  if (o.pass) o.why << "10000 programs, " << parsed << " parsed, slowest dispatch " << worst << " ms";
}

// 8
void gatewayTiming(Outcome& o) {
  auto dir = scratchDir("gw");
  auto env = prompt::buildPrompt(prompt::renderDefinition(runtime::defaultCatalog()), "timing probe");
  gateway::writeFixture(dir, gateway::fixtureKey(env), {"```js\n$.log(1);\n```", 250, std::nullopt});
  const int before = socketCount();
  gateway::GatewayConfig cfg;
  cfg.fixturesDir = dir;
  auto r = gateway::Gateway(cfg).generate(env);
  o.check(r.generationMs >= 250 && r.generationMs <= 300, "generation_ms " + std::to_string(r.generationMs));
  cfg.backend = gateway::Backend::Replay;
  auto replay = gateway::Gateway(cfg).generate(env);
  o.check(replay.script.has_value(), "replay missed the fixture");
  o.check(socketCount() == before, "a socket was opened");
  fs::remove_all(dir);
  if (o.pass) o.why << "generation_ms " << r.generationMs << ", sockets " << before << " -> " << socketCount();
}

// 9
void metrics(Outcome& o) {
  auto ev = [](double t, service::EventKind k, json payload) {
    service::SessionEvent e;
    e.t = t;
    e.kind = k;
    e.payload = std::move(payload);
    return e;
  };
  std::vector<service::SessionEvent> log = {
      ev(0, service::EventKind::TaskStart, {{"task", 1}}),
      ev(40, service::EventKind::Generate, {{"ok", true}, {"generation_ms", 5000.0}}),
      ev(186, service::EventKind::TaskStart, {{"task", 2}}),
  };
  auto r = service::aggregate(log, 186);
  o.check(!r.runs.empty() && r.runs[0].task == 1, "no task-1 run");
  if (!r.runs.empty()) {
    o.check(r.runs[0].completionS == 186, "completion " + std::to_string(r.runs[0].completionS));
    o.check(r.runs[0].attempts == 1, "attempts " + std::to_string(r.runs[0].attempts));
    if (o.pass) o.why << "completion " << r.runs[0].completionS << " s, attempts " << r.runs[0].attempts;
  }
}

// 10
void syncAtomicity(Outcome& o) {
  auto dir = scratchDir("sync");
  auto pending = [](int v) {
    sync::PendingScript p;
    p.itemId = 1;
    p.scriptText = "// v" + std::to_string(v) + "\n$.log(" + std::to_string(v) + ");";
    p.meta.promptDigest = "p" + std::to_string(v);
    p.meta.generatedAt = "1970-01-01T00:00:00.000Z";
    p.meta.generationRecord = "r";
    return p;
  };
  sync::writePending(dir, pending(0));
  std::atomic<bool> stop{false};
  std::atomic<int> reads{0}, torn{0}, errors{0};
  std::thread reader([&] {
    while (!stop) {
      try {
        auto got = sync::readPending(dir, 1);
        if (!got) {
          ++torn;
          continue;
        }
        const auto& s = got->scriptText;
        const auto v = s.substr(4, s.find('\n') - 4);
        if (got->meta.promptDigest != "p" + v || got->meta.scriptSha256 != sha256Hex(s)) ++torn;
        ++reads;
      } catch (const sync::SyncError&) {
        ++errors;
      }
    }
  });
  for (int i = 1; i <= 1000; ++i) sync::writePending(dir, pending(i));
  stop = true;
  reader.join();
  fs::remove_all(dir);
  o.check(torn == 0, std::to_string(torn.load()) + " torn reads");
  o.check(errors == 0, std::to_string(errors.load()) + " integrity errors");
  o.check(reads > 0, "reader never completed a read");
  if (o.pass) o.why << "1000 writes, " << reads << " concurrent reads, 0 torn";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"prompt fidelity", promptFidelity},       {"task 1 reproduction", task1Reproduction},
      {"task 2 reproduction", task2Reproduction}, {"out-of-scope API errors", category7Contract},
      {"determinism", determinism},               {"ballistic accuracy", ballistic},
      {"sandbox", sandbox},                       {"gateway timing", gatewayTiming},
      {"metrics aggregation", metrics},           {"sync atomicity", syncAtomicity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": "
              << o.why.str() << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
