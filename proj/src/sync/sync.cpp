#include "magicitem/sync/sync.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "magicitem/common/digest.hpp"
#include "magicitem/common/format.hpp"
#include "magicitem/dsl/parser.hpp"

namespace magicitem::sync {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scriptPath(const fs::path& dir, int itemId) {
  return dir / ("item-" + std::to_string(itemId) + ".pending.is");
}

fs::path metaPath(const fs::path& dir, int itemId) {
  return dir / ("item-" + std::to_string(itemId) + ".pending.meta.json");
}

namespace {

std::atomic<std::uint64_t> tempCounter{0};

[[noreturn]] void fail(const std::string& what, const fs::path& path) {
  throw SyncError(what + " " + path.string() + ": " + std::strerror(errno));
}

std::optional<std::string> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json metaJson(const PendingMeta& m) {
  json j = {{"item_id", m.itemId},
            {"prompt_digest", m.promptDigest},
            {"generated_at", m.generatedAt},
            {"generation_record", m.generationRecord},
            {"script_sha256", m.scriptSha256}};
  if (m.appliedAt) j["applied_at"] = *m.appliedAt;
  return j;
}

PendingMeta parseMeta(const std::string& text, const fs::path& path) {
  try {
    json j = json::parse(text);
    PendingMeta m;
    m.itemId = j.at("item_id").get<int>();
    m.promptDigest = j.at("prompt_digest").get<std::string>();
    m.generatedAt = j.at("generated_at").get<std::string>();
    m.generationRecord = j.at("generation_record").get<std::string>();
    m.scriptSha256 = j.at("script_sha256").get<std::string>();
    if (j.contains("applied_at") && j["applied_at"].is_string()) {
      m.appliedAt = j["applied_at"].get<std::string>();
    }
    return m;
  } catch (const json::exception& e) {
    throw SyncError("corrupt meta " + path.string() + ": " + e.what());
  }
}

}  // namespace

void atomicWrite(const fs::path& target, std::string_view bytes) {
  std::ostringstream name;
  name << "." << target.filename().string() << ".tmp." << ::getpid() << "."
       << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << tempCounter++;
  const fs::path tmp = target.parent_path() / name.str();

  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) fail("cannot create", tmp);
  std::size_t off = 0;
  while (off < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      ::unlink(tmp.c_str());
      fail("cannot write", tmp);
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    ::unlink(tmp.c_str());
    fail("cannot flush", tmp);
  }
  ::close(fd);
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    ::unlink(tmp.c_str());
    fail("cannot rename onto", target);
  }
}

void writePending(const fs::path& dir, PendingScript pending) {
  pending.meta.itemId = pending.itemId;
  pending.meta.scriptSha256 = sha256Hex(pending.scriptText);
  atomicWrite(scriptPath(dir, pending.itemId), pending.scriptText);
  atomicWrite(metaPath(dir, pending.itemId), metaJson(pending.meta).dump(2) + "\n");
}

std::optional<PendingScript> readPending(const fs::path& dir, int itemId) {
  const auto sPath = scriptPath(dir, itemId);
  const auto mPath = metaPath(dir, itemId);
  constexpr int kAttempts = 200;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    auto metaBefore = slurp(mPath);
    auto script = slurp(sPath);
    auto metaAfter = slurp(mPath);
    if (!metaBefore && !script) {
      return std::nullopt;
    }
    if (metaBefore && script && metaAfter && *metaBefore == *metaAfter) {
      PendingMeta meta = parseMeta(*metaBefore, mPath);
      if (meta.scriptSha256 == sha256Hex(*script)) {
        PendingScript p;
        p.itemId = itemId;
        p.scriptText = std::move(*script);
        p.meta = std::move(meta);
        return p;
      }
    }
    // A writer is between renames; give it a moment.
    std::this_thread::yield();
    if (attempt > 20) std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
  throw SyncError("integrity check failed for " + sPath.string() +
                  ": script bytes do not match the digest in its meta");
}

ApplyReport applyPending(world::World& world, const fs::path& dir, int itemId) {
  ApplyReport report;
  std::optional<PendingScript> pending;
  try {
    pending = readPending(dir, itemId);
  } catch (const SyncError& e) {
    report.errorKind = "IntegrityError";
    report.message = e.what();
    return report;
  }
  if (!pending) {
    report.errorKind = "NothingToApply";
    report.message = "nothing to apply";
    return report;
  }
  if (!world.item(itemId)) {
    report.errorKind = "NothingToApply";
    report.message = "no item with id " + std::to_string(itemId);
    return report;
  }

  std::shared_ptr<const dsl::Program> program;
  try {
    program = dsl::parse(pending->scriptText);
  } catch (const dsl::ParseError& e) {
    report.errorKind = "ParseError";
    report.message = e.message();
    report.line = e.line();
    report.column = e.column();
    report.console.push_back("ParseError at " + std::to_string(e.line()) + ":" +
                             std::to_string(e.column()) + ": " + e.message());
    return report;
  }

  auto installed = world.installScript(itemId, std::move(program));
  report.console = std::move(installed.console);
  if (installed.error) {
    report.errorKind = std::string(runtime::toString(installed.error->errorClass()));
    report.message = installed.error->message();
    report.line = installed.error->span().line;
    report.column = installed.error->span().column;
    report.memberPath = installed.error->memberPath();
  }
  report.ok = installed.ok;

  pending->meta.appliedAt = formatRfc3339(std::chrono::system_clock::now());
  try {
    atomicWrite(metaPath(dir, itemId), metaJson(pending->meta).dump(2) + "\n");
  } catch (const SyncError& e) {
    report.console.push_back(std::string("warning: ") + e.what());
  }
  return report;
}

}  // namespace magicitem::sync
