#include "magicitem/eval/scenario.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "magicitem/common/digest.hpp"
#include "magicitem/common/format.hpp"
#include "magicitem/common/rng.hpp"
#include "magicitem/dsl/parser.hpp"
#include "magicitem/gateway/gateway.hpp"
#include "magicitem/prompt/prompt.hpp"
#include "magicitem/runtime/catalog.hpp"
#include "magicitem/sync/sync.hpp"
#include "magicitem/world/oracle.hpp"

namespace magicitem::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vec3 vec(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number()) {
    throw ScenarioError(field + " must be [x, y, z]");
  }
  Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!v.finite()) throw ScenarioError(field + " must be finite");
  return v;
}

std::uint64_t frameField(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ScenarioError(where + "." + key + " is required");
  if (!j[key].is_number_unsigned()) throw ScenarioError(where + "." + key + " must be a frame number");
  return j[key].get<std::uint64_t>();
}

}  // namespace

std::string OracleSpec::label() const {
  std::string base = type == "predicate" ? name : type;
  return expect ? base : "not " + base;
}

ScenarioSpec parseScenario(const json& j) {
  if (!j.is_object()) throw ScenarioError("scenario must be a JSON object");
  ScenarioSpec s;
  try {
    s.name = j.at("name").get<std::string>();
    if (s.name.empty()) throw ScenarioError("name must be non-empty");
    s.category = j.value("category", "");
    s.description = j.value("description", "");
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    s.frames = frameField(j, "frames", "scenario");
    if (s.frames == 0) throw ScenarioError("frames must be > 0");

    const json& w = j.value("world", json::object());
    for (std::size_t i = 0; i < w.value("items", json::array()).size(); ++i) {
      const auto& it = w["items"][i];
      ItemSetup item;
      const auto kind = it.at("kind").get<std::string>();
      if (!world::parseItemKind(kind, item.kind)) {
        throw ScenarioError("world.items[" + std::to_string(i) + "].kind '" + kind + "' is unknown");
      }
      item.position = vec(it.at("pos"), "world.items[" + std::to_string(i) + "].pos");
      s.items.push_back(item);
    }
    for (std::size_t i = 0; i < w.value("players", json::array()).size(); ++i) {
      s.players.push_back(vec(w["players"][i].at("pos"), "world.players[" + std::to_string(i) + "].pos"));
    }

    for (std::size_t i = 0; i < j.value("scripts", json::array()).size(); ++i) {
      const auto& sc = j["scripts"][i];
      const std::string where = "scripts[" + std::to_string(i) + "]";
      ScriptSource src;
      src.item = sc.at("item").get<int>();
      if (sc.contains("at")) src.atFrame = frameField(sc, "at", where);
      if (sc.contains("source")) src.source = sc["source"].get<std::string>();
      if (sc.contains("prompt")) src.prompt = sc["prompt"].get<std::string>();
      if (src.source.has_value() == src.prompt.has_value()) {
        throw ScenarioError(where + " needs exactly one of source or prompt");
      }
      s.scripts.push_back(std::move(src));
    }

    for (std::size_t i = 0; i < j.value("inputs", json::array()).size(); ++i) {
      const auto& in = j["inputs"][i];
      const std::string where = "inputs[" + std::to_string(i) + "]";
      TimedInput t;
      t.frame = frameField(in, "frame", where);
      t.player = in.value("player", 1);
      try {
        t.input = world::parseInput(in.at("input"));
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(where + ".input: " + e.what());
      }
      s.inputs.push_back(std::move(t));
    }
    std::stable_sort(s.inputs.begin(), s.inputs.end(),
                     [](const TimedInput& a, const TimedInput& b) { return a.frame < b.frame; });

    if (j.contains("random_inputs")) {
      const auto& r = j["random_inputs"];
      RandomInputs ri;
      ri.player = r.value("player", 1);
      ri.from = r.value("from", std::uint64_t{0});
      ri.to = r.value("to", s.frames);
      ri.every = r.value("every", std::uint64_t{1});
      if (ri.every == 0) throw ScenarioError("random_inputs.every must be > 0");
      s.randomInputs = ri;
    }

    for (std::size_t i = 0; i < j.value("oracles", json::array()).size(); ++i) {
      const auto& o = j["oracles"][i];
      OracleSpec spec;
      spec.type = o.at("type").get<std::string>();
      if (spec.type != "task1" && spec.type != "task2" && spec.type != "predicate") {
        throw ScenarioError("oracles[" + std::to_string(i) + "].type '" + spec.type + "' is unknown");
      }
      if (spec.type == "predicate") spec.name = o.at("name").get<std::string>();
      spec.expect = o.value("expect", true);
      spec.params = o;
      s.oracles.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  return s;
}

ScenarioSpec loadScenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ScenarioError("invalid JSON in " + path.string());
  return parseScenario(j);
}

namespace {

struct RunState {
  const ScenarioSpec& spec;
  world::World& world;
  std::vector<world::FrameRecord> trace;
  std::vector<InstallOutcome> installs;
  std::vector<std::string> console;  // install output, then every frame's lines
  std::map<int, std::vector<std::string>> frameErrors;
};

std::optional<std::pair<int, std::string>> splitItemPrefix(const std::string& line) {
  constexpr std::string_view kPrefix = "[item ";
  if (line.rfind(kPrefix, 0) != 0) return std::nullopt;
  auto close = line.find(']');
  if (close == std::string::npos) return std::nullopt;
  int id = std::atoi(line.c_str() + kPrefix.size());
  return std::make_pair(id, line.substr(std::min(line.size(), close + 2)));
}

std::string resolveSource(const ScriptSource& src, const RunOptions& options,
                          const fs::path& syncDir) {
  if (src.source) return *src.source;
  // Prompt path: mock gateway -> pending file -> read back, as the service does.
  gateway::GatewayConfig cfg;
  cfg.backend = gateway::Backend::Mock;
  cfg.fixturesDir = options.fixturesDir;
  cfg.virtualDelay = true;
  auto env = prompt::buildPrompt(prompt::renderDefinition(runtime::defaultCatalog()), *src.prompt);
  auto rec = gateway::Gateway(cfg).generate(env);
  if (!rec.script) {
    throw ScenarioError("fixture reply for prompt '" + *src.prompt + "' has no code block");
  }
  sync::PendingScript pending;
  pending.itemId = src.item;
  pending.scriptText = *rec.script;
  pending.meta.promptDigest = rec.promptDigest;
  pending.meta.generatedAt = "1970-01-01T00:00:00.000Z";
  pending.meta.generationRecord = "eval";
  sync::writePending(syncDir, pending);
  return sync::readPending(syncDir, src.item).value().scriptText;
}

void install(RunState& st, const ScriptSource& src, const std::string& source) {
  InstallOutcome out;
  out.item = src.item;
  out.frame = st.world.frame();
  out.hashBefore = st.world.structuralHash();
  if (!st.world.item(src.item)) throw ScenarioError("script targets missing item " + std::to_string(src.item));
  try {
    auto report = st.world.installScript(src.item, dsl::parse(source));
    out.ok = report.ok;
    for (auto& line : report.console) st.console.push_back("[item " + std::to_string(src.item) + "] " + line);
    if (report.error) {
      out.errorKind = std::string(runtime::toString(report.error->errorClass()));
      out.member = report.error->memberPath();
      out.message = report.error->message();
    }
  } catch (const dsl::ParseError& e) {
    out.ok = false;
    out.errorKind = "ParseError";
    out.message = e.message();
    st.console.push_back("[item " + std::to_string(src.item) + "] ParseError at " +
                         std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.message());
  }
  out.hashAfter = st.world.structuralHash();
  st.installs.push_back(std::move(out));
}

world::PlayerInput randomInput(SplitMix64& rng, const world::World& w) {
  std::vector<int> items;
  for (const auto& [id, _] : w.items()) items.push_back(id);
  auto pickItem = [&] { return items.empty() ? 1 : items[rng.next() % items.size()]; };
  switch (rng.next() % 7) {
    case 0: {
      const double a = rng.nextUnit() * 2 * M_PI;
      const double len = rng.nextUnit();
      return world::input::Move{{std::cos(a) * len, 0, std::sin(a) * len}};
    }
    case 1: return world::input::Jump{};
    case 2: return world::input::Interact{pickItem()};
    case 3: return world::input::Grab{pickItem()};
    case 4: return world::input::Release{};
    case 5: return world::input::Ride{pickItem()};
    default: return world::input::ExitRide{};
  }
}

// ---- predicates ----------------------------------------------------------

const world::Pose* findPose(const std::vector<world::Pose>& poses, int id) {
  for (const auto& p : poses)
    if (p.id == id) return &p;
  return nullptr;
}

double axisOf(const Vec3& v, char axis) { return axis == 'x' ? v.x : axis == 'y' ? v.y : v.z; }

int idParam(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number_integer()) {
    throw ScenarioError(std::string("predicate needs integer '") + key + "'");
  }
  return p[key].get<int>();
}

double numParam(const json& p, const char* key) {
  if (!p.contains(key) || !p[key].is_number()) {
    throw ScenarioError(std::string("predicate needs number '") + key + "'");
  }
  return p[key].get<double>();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

// Per-frame series for one entity coordinate, restricted to [from, to].
std::vector<std::pair<std::uint64_t, double>> series(const RunState& st, bool player, int id,
                                                     char axis, const json& p) {
  const std::uint64_t from = p.value("from", std::uint64_t{0});
  const std::uint64_t to = p.value("to", std::numeric_limits<std::uint64_t>::max());
  std::vector<std::pair<std::uint64_t, double>> out;
  for (const auto& rec : st.trace) {
    if (rec.frame < from || rec.frame > to) continue;
    const auto* pose = findPose(player ? rec.players : rec.items, id);
    if (pose) out.emplace_back(rec.frame, axisOf(pose->position, axis));
  }
  if (out.empty()) throw ScenarioError("no trace samples for " + std::string(player ? "player " : "item ") + std::to_string(id));
  return out;
}

std::vector<std::string> errorsFor(const RunState& st, std::optional<int> item) {
  std::vector<std::string> out;
  for (const auto& [id, lines] : st.frameErrors) {
    if (item && id != *item) continue;
    out.insert(out.end(), lines.begin(), lines.end());
  }
  return out;
}

OracleResult evaluatePredicate(const RunState& st, const OracleSpec& o) {
  OracleResult r;
  const auto& p = o.params;
  static const std::regex kPosition(R"(^(item|player)_(x|y|z)_(ge|le)$)");
  std::smatch m;

  if (std::regex_match(o.name, m, kPosition)) {
    const bool player = m[1] == "player";
    const int id = idParam(p, player ? "player" : "item");
    const char axis = m[2].str()[0];
    const bool ge = m[3] == "ge";
    const double value = numParam(p, "value");
    const std::string over = p.value("over", "final");
    auto s = series(st, player, id, axis, p);
    double probe;
    if (over == "final") probe = s.back().second;
    else if (over == "any" || over == "all") {
      const bool useMax = (over == "any") == ge;
      probe = s.front().second;
      for (const auto& [_, v] : s) probe = useMax ? std::max(probe, v) : std::min(probe, v);
    } else throw ScenarioError("over must be final, any or all");
    r.observed = ge ? probe >= value : probe <= value;
    r.detail = over + " " + std::string(1, axis) + "=" + fmt(probe) + (ge ? " vs >= " : " vs <= ") + fmt(value);
    return r;
  }

  if (o.name == "player_apex_near") {
    const int id = idParam(p, "player");
    auto s = series(st, true, id, 'y', p);
    double apex = s.front().second;
    for (const auto& [_, v] : s) apex = std::max(apex, v);
    const double value = numParam(p, "value"), tol = numParam(p, "tolerance");
    r.observed = std::abs(apex - value) <= tol;
    r.detail = "apex " + fmt(apex) + " vs " + fmt(value) + " +/- " + fmt(tol);
    return r;
  }

  if (o.name == "rotation_y_eq") {
    const int id = idParam(p, "item");
    const auto* item = st.world.item(id);
    if (!item) throw ScenarioError("no item " + std::to_string(id));
    const double value = numParam(p, "value");
    const double tol = p.value("tolerance", 1e-6);
    r.observed = std::abs(item->rotation.y - value) <= tol;
    r.detail = "rot.y " + fmt(item->rotation.y) + " vs " + fmt(value);
    return r;
  }

  if (o.name == "error_class_eq") {
    const std::string value = p.at("value").get<std::string>();
    std::optional<int> item;
    if (p.contains("item")) item = idParam(p, "item");
    const std::string member = p.value("member", "");
    for (const auto& in : st.installs) {
      if (item && in.item != *item) continue;
      if (in.errorKind == value && (member.empty() || in.member == member)) {
        r.observed = true;
        r.detail = "install: " + in.errorKind + " " + in.member + ": " + in.message;
        return r;
      }
    }
    for (const auto& line : errorsFor(st, item)) {
      if (line.rfind(value, 0) == 0 && (member.empty() || line.find(member) != std::string::npos)) {
        r.observed = true;
        r.detail = line;
        return r;
      }
    }
    r.detail = "no " + value + " error observed";
    return r;
  }

  if (o.name == "world_unchanged") {
    const int id = idParam(p, "item");
    for (const auto& in : st.installs) {
      if (in.item != id) continue;
      r.observed = !in.ok && in.hashBefore == in.hashAfter;
      r.detail = in.ok ? "install succeeded" : (r.observed ? "state hash identical" : "state hash changed");
      return r;
    }
    throw ScenarioError("no install recorded for item " + std::to_string(id));
  }

  if (o.name == "no_errors") {
    r.observed = true;
    for (const auto& in : st.installs) {
      if (!in.ok) {
        r.observed = false;
        r.detail = "install error " + in.errorKind + ": " + in.message;
      }
    }
    auto errs = errorsFor(st, std::nullopt);
    if (!errs.empty()) {
      r.observed = false;
      r.detail = errs.front();
    }
    return r;
  }

  if (o.name == "console_contains") {
    const std::string text = p.at("text").get<std::string>();
    for (const auto& line : st.console) {
      if (line.find(text) != std::string::npos) {
        r.observed = true;
        r.detail = line;
        return r;
      }
    }
    r.detail = "'" + text + "' not logged";
    return r;
  }

  if (o.name == "player_rate_eq") {
    const int id = idParam(p, "player");
    const auto* pl = st.world.player(id);
    if (!pl) throw ScenarioError("no player " + std::to_string(id));
    const std::string rate = p.at("rate").get<std::string>();
    const double v = rate == "jump" ? pl->jumpSpeedRate
                     : rate == "move" ? pl->moveSpeedRate
                     : rate == "gravity" ? pl->gravityRate
                     : throw ScenarioError("rate must be jump, move or gravity");
    r.observed = std::abs(v - numParam(p, "value")) <= 1e-9;
    r.detail = rate + " rate " + fmt(v);
    return r;
  }

  if (o.name == "distance_le") {
    const int item = idParam(p, "item"), player = idParam(p, "player");
    const auto& last = st.trace.back();
    const auto* a = findPose(last.items, item);
    const auto* b = findPose(last.players, player);
    if (!a || !b) throw ScenarioError("distance_le: entity missing");
    const double d = (a->position - b->position).length();
    r.observed = d <= numParam(p, "value");
    r.detail = "distance " + fmt(d);
    return r;
  }

  if (o.name == "fall_time_ratio") {
    // Frames from `from` until each item first rests at y <= 0.
    auto fallFrames = [&](int id) -> std::optional<std::uint64_t> {
      for (const auto& [frame, y] : series(st, false, id, 'y', p)) {
        if (y <= 1e-9) return frame - p.value("from", std::uint64_t{0});
      }
      return std::nullopt;
    };
    auto a = fallFrames(idParam(p, "item"));
    auto b = fallFrames(idParam(p, "reference"));
    if (!a || !b || *b == 0) {
      r.detail = "an item never landed";
      return r;
    }
    const double ratio = static_cast<double>(*a) / static_cast<double>(*b);
    const double expected = numParam(p, "expected");
    const double tol = numParam(p, "tolerance");
    r.observed = std::abs(ratio - expected) <= tol * expected;
    r.detail = "fall frames " + std::to_string(*a) + "/" + std::to_string(*b) + " = " + fmt(ratio) +
               " vs " + fmt(expected);
    return r;
  }

  if (o.name == "oscillation_period") {
    const int id = idParam(p, "item");
    const std::string axisName = p.value("axis", "y");
    auto s = series(st, false, id, axisName.empty() ? 'y' : axisName[0], p);
    double mean = 0;
    for (const auto& [_, v] : s) mean += v;
    mean /= static_cast<double>(s.size());
    std::vector<double> ups;  // upward mean crossings, interpolated
    for (std::size_t i = 1; i < s.size(); ++i) {
      const double a = s[i - 1].second - mean, b = s[i].second - mean;
      if (a < 0 && b >= 0) ups.push_back(static_cast<double>(s[i - 1].first) + a / (a - b));
    }
    if (ups.size() < 2) {
      r.detail = "fewer than two crossings";
      return r;
    }
    const double period =
        (ups.back() - ups.front()) / static_cast<double>(ups.size() - 1) * st.world.config().dt;
    const double expected = numParam(p, "expected_s");
    const double tol = numParam(p, "tolerance");
    r.observed = std::abs(period - expected) <= tol * expected;
    r.detail = "period " + fmt(period) + " s vs " + fmt(expected);
    return r;
  }

  throw ScenarioError("unknown predicate '" + o.name + "'");
}

OracleResult evaluate(const RunState& st, const OracleSpec& o) {
  OracleResult r;
  if (o.type == "predicate") {
    r = evaluatePredicate(st, o);
  } else {
    const auto which = o.type == "task1" ? world::Oracle::Task1 : world::Oracle::Task2;
    auto fired = world::oracleFiringFrame(st.trace, which, st.world.config().groundHalfExtent);
    r.observed = fired.has_value();
    r.detail = fired ? "fired at frame " + std::to_string(*fired) : "never fired";
    if (fired && o.params.contains("frame_near")) {
      const auto target = o.params["frame_near"].get<double>();
      const auto tol = o.params.value("tolerance", 0.0);
      const bool near = std::abs(static_cast<double>(*fired) - target) <= tol;
      if (!near) r.observed = false;
      r.detail += " (expected " + fmt(target) + " +/- " + fmt(tol) + ")";
    }
    if (fired && o.params.contains("by_frame") && *fired > o.params["by_frame"].get<std::uint64_t>()) {
      r.observed = false;
      r.detail += " (after by_frame)";
    }
  }
  r.label = o.label();
  r.expected = o.expect;
  r.pass = r.observed == r.expected;
  return r;
}

fs::path scratchSyncDir() {
  static std::atomic<std::uint64_t> n{0};
  auto dir = fs::temp_directory_path() /
             ("magicitem-eval-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

ScenarioReport runScenario(const ScenarioSpec& spec, const RunOptions& options) {
  return runScenario(spec, options, nullptr);
}

ScenarioReport runScenario(const ScenarioSpec& spec, const RunOptions& options,
                           std::unique_ptr<world::World>* finalWorld) {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioReport report;
  report.name = spec.name;
  report.category = spec.category;

  const std::uint64_t seed = spec.seed.value_or(options.seed);
  auto w = std::make_unique<world::World>(world::WorldConfig{}, seed);
  RunState st{spec, *w, {}, {}, {}, {}};
  const fs::path syncDir = scratchSyncDir();

  try {
    for (const auto& item : spec.items) w->spawnItem(item.kind, item.position);
    for (const auto& pos : spec.players) w->spawnPlayer(pos);

    std::vector<std::pair<const ScriptSource*, std::string>> scripts;
    for (const auto& src : spec.scripts) scripts.emplace_back(&src, resolveSource(src, options, syncDir));

    SplitMix64 inputRng{seed ^ 0x5eed1e55ULL};
    std::size_t nextInput = 0;
    for (std::uint64_t f = 0; f < spec.frames; ++f) {
      for (const auto& [src, text] : scripts) {
        if (src->atFrame == f) install(st, *src, text);
      }
      while (nextInput < spec.inputs.size() && spec.inputs[nextInput].frame == f) {
        const auto& in = spec.inputs[nextInput++];
        auto ack = w->applyInput(in.player, in.input);
        if (!ack.accepted) {
          st.console.push_back("[input f" + std::to_string(f) + "] rejected: " + ack.reason);
        }
      }
      if (spec.randomInputs && f >= spec.randomInputs->from && f < spec.randomInputs->to &&
          (f - spec.randomInputs->from) % spec.randomInputs->every == 0) {
        w->applyInput(spec.randomInputs->player, randomInput(inputRng, *w));
      }
      const auto& rec = w->step();
      for (const auto& line : rec.console) st.console.push_back(line);
      for (const auto& line : rec.errors) {
        st.console.push_back(line);
        if (auto split = splitItemPrefix(line)) st.frameErrors[split->first].push_back(split->second);
      }
      st.trace.push_back(rec);
    }
    report.frames = w->frame();
    report.traceDigest = w->traceHash();

    report.pass = true;
    for (const auto& o : spec.oracles) {
      auto r = evaluate(st, o);
      report.pass = report.pass && r.pass;
      report.oracles.push_back(std::move(r));
    }
    if (spec.oracles.empty()) {
      report.pass = false;
      report.failure = "scenario declares no oracles";
    }
  } catch (const std::exception& e) {
    report.pass = false;
    report.failure = e.what();
    report.frames = w->frame();
    report.traceDigest = w->traceHash();
  }
  std::error_code ec;
  fs::remove_all(syncDir, ec);

  report.installs = st.installs;
  const std::size_t keep = 12;
  report.consoleExcerpt.assign(
      st.console.size() > keep ? st.console.end() - static_cast<std::ptrdiff_t>(keep) : st.console.begin(),
      st.console.end());
  report.wallMs = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (finalWorld) *finalWorld = std::move(w);
  return report;
}

const std::vector<std::string>& requiredCategories() {
  static const std::vector<std::string> kRequired = {"task1", "task2", "cat1", "cat2", "cat3",
                                                     "cat4",  "cat5",  "cat6", "cat7"};
  return kRequired;
}

SuiteReport runSuite(const fs::path& dir, const RunOptions& options) {
  SuiteReport suite;
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) {
    suite.unreadable.emplace_back(dir.string(), "not a directory");
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, int> cat7Count;
  for (const auto& f : files) {
    try {
      auto spec = loadScenario(f);
      suite.scenarios.push_back(runScenario(spec, options));
    } catch (const std::exception& e) {
      suite.unreadable.emplace_back(f.filename().string(), e.what());
    }
  }
  for (const auto& cat : requiredCategories()) {
    const bool covered = std::any_of(suite.scenarios.begin(), suite.scenarios.end(),
                                     [&](const ScenarioReport& r) { return r.category == cat; });
    if (!covered) suite.missingCategories.push_back(cat);
  }
  suite.pass = suite.unreadable.empty();
  for (const auto& s : suite.scenarios) suite.pass = suite.pass && s.pass;
  if (options.requireCoverage && !suite.missingCategories.empty()) suite.pass = false;
  suite.digest = sha256Hex(toJson(suite, false).dump());
  return suite;
}

json toJson(const ScenarioReport& r, bool withTiming) {
  json oracles = json::array();
  for (const auto& o : r.oracles) {
    oracles.push_back({{"oracle", o.label},
                       {"expected", o.expected},
                       {"observed", o.observed},
                       {"pass", o.pass},
                       {"detail", o.detail}});
  }
  json installs = json::array();
  for (const auto& in : r.installs) {
    installs.push_back({{"item", in.item},
                        {"frame", in.frame},
                        {"ok", in.ok},
                        {"error", in.errorKind.empty() ? json(nullptr) : json(in.errorKind)},
                        {"member", in.member.empty() ? json(nullptr) : json(in.member)},
                        {"world_unchanged", in.hashBefore == in.hashAfter}});
  }
  json j = {{"name", r.name},
            {"category", r.category},
            {"pass", r.pass},
            {"failure", r.failure.empty() ? json(nullptr) : json(r.failure)},
            {"oracles", oracles},
            {"installs", installs},
            {"frames", r.frames},
            {"trace_digest", r.traceDigest},
            {"console_excerpt", r.consoleExcerpt}};
  if (withTiming) j["wall_ms"] = r.wallMs;
  return j;
}

json toJson(const SuiteReport& r, bool withTiming) {
  json scenarios = json::array();
  for (const auto& s : r.scenarios) scenarios.push_back(toJson(s, withTiming));
  json unreadable = json::array();
  for (const auto& [file, why] : r.unreadable) unreadable.push_back({{"file", file}, {"reason", why}});
  json j = {{"pass", r.pass},
            {"scenarios", scenarios},
            {"unreadable", unreadable},
            {"missing_categories", r.missingCategories}};
  if (!r.digest.empty()) j["digest"] = r.digest;
  return j;
}

std::string formatTable(const SuiteReport& r) {
  std::size_t nameW = 8;
  for (const auto& s : r.scenarios) nameW = std::max(nameW, s.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(nameW)) << "scenario" << "  " << std::setw(7) << "oracles"
      << "  " << std::setw(4) << "pass" << "  " << std::setw(6) << "frames" << "  trace digest\n";
  for (const auto& s : r.scenarios) {
    std::size_t passed = 0;
    for (const auto& o : s.oracles) passed += o.pass;
    out << std::setw(static_cast<int>(nameW)) << s.name << "  " << std::setw(7)
        << (std::to_string(passed) + "/" + std::to_string(s.oracles.size())) << "  " << std::setw(4)
        << (s.pass ? "yes" : "NO") << "  " << std::setw(6) << s.frames << "  "
        << s.traceDigest.substr(0, 16) << "\n";
    if (!s.failure.empty()) out << "    error: " << s.failure << "\n";
    for (const auto& o : s.oracles) {
      if (!o.pass) out << "    failed: " << o.label << " (" << o.detail << ")\n";
    }
  }
  for (const auto& [file, why] : r.unreadable) out << "unreadable: " << file << ": " << why << "\n";
  if (!r.missingCategories.empty()) {
    out << "missing categories:";
    for (const auto& c : r.missingCategories) out << " " << c;
    out << "\n";
  }
  out << (r.pass ? "PASS" : "FAIL") << "  " << r.scenarios.size() << " scenarios  digest "
      << r.digest << "\n";
  return out.str();
}

}  // namespace magicitem::eval
