#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "magicitem/service/metrics.hpp"

namespace magicitem::service {

/// Append-only, thread-safe telemetry for one session. Every event is also
/// written as a JSON line to `<dataDir>/session-<id>.jsonl` when dataDir is set.
class Session {
 public:
  Session(std::string id, const std::filesystem::path& dataDir);

  const std::string& id() const { return id_; }
  const std::string& createdAt() const { return createdAt_; }
  const std::filesystem::path& logPath() const { return logPath_; }

  /// Seconds since creation; never decreases.
  double now() const;

  SessionEvent append(EventKind kind, nlohmann::json payload);
  std::vector<SessionEvent> events() const;
  MetricsReport metrics() const;

 private:
  std::string id_;
  std::string createdAt_;
  std::chrono::steady_clock::time_point origin_;
  std::filesystem::path logPath_;
  mutable std::mutex mu_;
  std::ofstream log_;
  std::vector<SessionEvent> events_;
  double lastT_ = 0;
};

}  // namespace magicitem::service
