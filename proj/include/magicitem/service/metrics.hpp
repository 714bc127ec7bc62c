#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace magicitem::service {

enum class EventKind { TaskStart, Generate, Apply, Input, OracleSample };
std::string_view toString(EventKind k);
bool parseEventKind(std::string_view text, EventKind& out);

/// One telemetry entry. `t` is seconds since the session was created.
struct SessionEvent {
  double t = 0;
  std::string at;  // RFC 3339 wall clock, informational
  EventKind kind = EventKind::TaskStart;
  nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json toJson(const SessionEvent& e);
/// Throws std::invalid_argument on malformed input.
SessionEvent eventFromJson(const nlohmann::json& j);

/// Reads a session JSONL file; lines whose kind is not an event are skipped.
std::vector<SessionEvent> loadEventLog(const std::filesystem::path& path);

struct GenerateMetric {
  double t = 0;
  std::optional<int> task;
  bool ok = false;
  std::string error;
  double generationMs = 0;
  double totalMs = 0;
  std::int64_t promptTokens = 0;
  std::int64_t completionTokens = 0;
  bool estimated = true;
  std::int64_t promptChars = 0;
  std::int64_t scriptChars = 0;
};

struct TaskRun {
  int task = 0;
  double startS = 0;
  double endS = 0;
  double completionS = 0;
  int attempts = 0;
  std::optional<bool> success;  // none for tasks without an oracle
  std::optional<double> successAtS;
  bool closedBySessionEnd = false;
};

struct TaskAggregate {
  int task = 0;
  std::size_t count = 0;
  double medianCompletionS = 0;
  int medianAttempts = 0;
  std::size_t successes = 0;
  std::optional<double> medianGenerationMs;
  std::optional<double> medianTotalMs;
  std::optional<std::int64_t> medianPromptTokens;
  std::optional<std::int64_t> medianCompletionTokens;
};

struct MetricsReport {
  std::vector<TaskRun> runs;
  std::vector<GenerateMetric> generates;
  std::map<int, TaskAggregate> perTask;
  bool attemptsIncludeFailures = true;
};

/// Lower median: element (n-1)/2 of the sorted values. Requires n > 0.
double lowerMedian(std::vector<double> values);

/// Pure function of the log. Task intervals are [start, next start) and the
/// last one closes at `sessionEndS`.
MetricsReport aggregate(const std::vector<SessionEvent>& events, double sessionEndS);

nlohmann::json toJson(const MetricsReport& r);

}  // namespace magicitem::service
