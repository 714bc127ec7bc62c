#include "magicitem/service/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace magicitem::service {

using nlohmann::json;

std::string_view toString(EventKind k) {
  switch (k) {
    case EventKind::TaskStart: return "task-start";
    case EventKind::Generate: return "generate";
    case EventKind::Apply: return "apply";
    case EventKind::Input: return "input";
    case EventKind::OracleSample: return "oracle-sample";
  }
  return "?";
}

bool parseEventKind(std::string_view text, EventKind& out) {
  for (auto k : {EventKind::TaskStart, EventKind::Generate, EventKind::Apply, EventKind::Input,
                 EventKind::OracleSample}) {
    if (toString(k) == text) {
      out = k;
      return true;
    }
  }
  return false;
}

json toJson(const SessionEvent& e) {
  return {{"t", e.t}, {"at", e.at}, {"kind", toString(e.kind)}, {"payload", e.payload}};
}

SessionEvent eventFromJson(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() || !j.contains("t") ||
      !j["t"].is_number()) {
    throw std::invalid_argument("event needs numeric t and string kind");
  }
  SessionEvent e;
  if (!parseEventKind(j["kind"].get<std::string>(), e.kind)) {
    throw std::invalid_argument("unknown event kind " + j["kind"].get<std::string>());
  }
  e.t = j["t"].get<double>();
  e.at = j.value("at", "");
  e.payload = j.value("payload", json::object());
  if (e.kind == EventKind::TaskStart) {
    int task = e.payload.value("task", 0);
    if (task < 1 || task > 3) throw std::invalid_argument("task-start task must be 1, 2 or 3");
  }
  return e;
}

std::vector<SessionEvent> loadEventLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<SessionEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    EventKind k;
    if (!j.contains("kind") || !j["kind"].is_string() ||
        !parseEventKind(j["kind"].get<std::string>(), k))
      continue;
    events.push_back(eventFromJson(j));
  }
  return events;
}

double lowerMedian(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of nothing");
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

namespace {

std::optional<std::int64_t> medianInt(const std::vector<std::int64_t>& v) {
  if (v.empty()) return std::nullopt;
  std::vector<double> d(v.begin(), v.end());
  return static_cast<std::int64_t>(lowerMedian(d));
}

std::optional<double> medianOpt(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return lowerMedian(v);
}

const char* oracleKey(int task) {
  switch (task) {
    case 1: return "task1";
    case 2: return "task2";
    default: return nullptr;
  }
}

}  // namespace

MetricsReport aggregate(const std::vector<SessionEvent>& events, double sessionEndS) {
  MetricsReport report;

  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].kind != EventKind::TaskStart) continue;
    TaskRun run;
    run.task = events[i].payload.value("task", 0);
    run.startS = events[i].t;
    run.endS = sessionEndS;
    run.closedBySessionEnd = true;
    for (std::size_t k = i + 1; k < events.size(); ++k) {
      if (events[k].kind == EventKind::TaskStart) {
        run.endS = events[k].t;
        run.closedBySessionEnd = false;
        break;
      }
    }
    run.endS = std::max(run.endS, run.startS);
    run.completionS = run.endS - run.startS;
    const char* key = oracleKey(run.task);
    if (key) run.success = false;
    for (const auto& e : events) {
      const bool inside =
          e.t >= run.startS && (run.closedBySessionEnd ? e.t <= run.endS : e.t < run.endS);
      if (!inside) continue;
      if (e.kind == EventKind::Generate) ++run.attempts;
      if (key && e.kind == EventKind::OracleSample && e.payload.value(key, false) &&
          !run.successAtS) {
        run.success = true;
        run.successAtS = e.t;
      }
    }
    report.runs.push_back(run);
  }

  for (const auto& e : events) {
    if (e.kind != EventKind::Generate) continue;
    GenerateMetric g;
    g.t = e.t;
    g.ok = e.payload.value("ok", false);
    g.error = e.payload.value("error", "");
    g.generationMs = e.payload.value("generation_ms", 0.0);
    g.totalMs = e.payload.value("total_ms", 0.0);
    g.promptTokens = e.payload.value("prompt_tokens", std::int64_t{0});
    g.completionTokens = e.payload.value("completion_tokens", std::int64_t{0});
    g.estimated = e.payload.value("estimated", true);
    g.promptChars = e.payload.value("prompt_chars", std::int64_t{0});
    g.scriptChars = e.payload.value("script_chars", std::int64_t{0});
    for (const auto& run : report.runs) {
      const bool inside =
          g.t >= run.startS && (run.closedBySessionEnd ? g.t <= run.endS : g.t < run.endS);
      if (inside) g.task = run.task;
    }
    report.generates.push_back(g);
  }

  std::map<int, std::vector<const TaskRun*>> byTask;
  for (const auto& run : report.runs) byTask[run.task].push_back(&run);
  for (const auto& [task, runs] : byTask) {
    TaskAggregate agg;
    agg.task = task;
    agg.count = runs.size();
    std::vector<double> completion, attempts;
    for (const auto* r : runs) {
      completion.push_back(r->completionS);
      attempts.push_back(r->attempts);
      if (r->success.value_or(false)) ++agg.successes;
    }
    agg.medianCompletionS = lowerMedian(completion);
    agg.medianAttempts = static_cast<int>(lowerMedian(attempts));
    std::vector<double> gen, total;
    std::vector<std::int64_t> pt, ct;
    for (const auto& g : report.generates) {
      if (g.task != task) continue;
      if (g.ok || g.generationMs > 0) {
        gen.push_back(g.generationMs);
        total.push_back(g.totalMs);
      }
      if (g.promptTokens > 0 || g.completionTokens > 0) {
        pt.push_back(g.promptTokens);
        ct.push_back(g.completionTokens);
      }
    }
    agg.medianGenerationMs = medianOpt(gen);
    agg.medianTotalMs = medianOpt(total);
    agg.medianPromptTokens = medianInt(pt);
    agg.medianCompletionTokens = medianInt(ct);
    report.perTask[task] = agg;
  }
  return report;
}

json toJson(const MetricsReport& r) {
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  json runs = json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"task", run.task},
                    {"start_s", run.startS},
                    {"end_s", run.endS},
                    {"completion_s", run.completionS},
                    {"attempts", run.attempts},
                    {"success", opt(run.success)},
                    {"success_at_s", opt(run.successAtS)},
                    {"closed_by", run.closedBySessionEnd ? "session-end" : "next-task"}});
  }
  json gens = json::array();
  for (const auto& g : r.generates) {
    gens.push_back({{"t", g.t},
                    {"task", opt(g.task)},
                    {"ok", g.ok},
                    {"error", g.error.empty() ? json(nullptr) : json(g.error)},
                    {"generation_ms", g.generationMs},
                    {"total_ms", g.totalMs},
                    {"prompt_tokens", g.promptTokens},
                    {"completion_tokens", g.completionTokens},
                    {"estimated", g.estimated},
                    {"prompt_chars", g.promptChars},
                    {"script_chars", g.scriptChars}});
  }
  json tasks = json::object();
  for (const auto& [task, a] : r.perTask) {
    tasks[std::to_string(task)] = {{"count", a.count},
                                   {"median_completion_s", a.medianCompletionS},
                                   {"median_attempts", a.medianAttempts},
                                   {"successes", a.successes},
                                   {"median_generation_ms", opt(a.medianGenerationMs)},
                                   {"median_total_ms", opt(a.medianTotalMs)},
                                   {"median_prompt_tokens", opt(a.medianPromptTokens)},
                                   {"median_completion_tokens", opt(a.medianCompletionTokens)}};
  }
  return {{"runs", runs},
          {"generates", gens},
          {"tasks", tasks},
          {"median_convention", "lower"},
          {"attempts_includes_failures", r.attemptsIncludeFailures}};
}

}  // namespace magicitem::service
