#include "magicitem/service/session.hpp"

#include <algorithm>

#include "magicitem/common/format.hpp"

namespace magicitem::service {

Session::Session(std::string id, const std::filesystem::path& dataDir)
    : id_(std::move(id)),
      createdAt_(formatRfc3339(std::chrono::system_clock::now())),
      origin_(std::chrono::steady_clock::now()) {
  if (!dataDir.empty()) {
    std::filesystem::create_directories(dataDir);
    logPath_ = dataDir / ("session-" + id_ + ".jsonl");
    log_.open(logPath_, std::ios::app);
    if (!log_) throw std::runtime_error("cannot open session log " + logPath_.string());
    log_ << nlohmann::json{{"kind", "session"}, {"id", id_}, {"created_at", createdAt_}}.dump()
         << '\n';
    log_.flush();
  }
}

double Session::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
}

SessionEvent Session::append(EventKind kind, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  SessionEvent e;
  // Taken under the lock so file order and t agree.
  e.t = std::max(lastT_, now());
  lastT_ = e.t;
  e.at = formatRfc3339(std::chrono::system_clock::now());
  e.kind = kind;
  e.payload = std::move(payload);
  events_.push_back(e);
  if (log_.is_open()) {
    log_ << toJson(e).dump() << '\n';
    log_.flush();
  }
  return e;
}

std::vector<SessionEvent> Session::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

MetricsReport Session::metrics() const {
  std::lock_guard lock(mu_);
  return aggregate(events_, std::max(lastT_, now()));
}

}  // namespace magicitem::service
