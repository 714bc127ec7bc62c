#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "magicitem/world/world.hpp"

namespace magicitem::sync {

struct PendingMeta {
  int itemId = 0;
  std::string promptDigest;
  std::string generatedAt;         // RFC 3339
  std::string generationRecord;    // id of the originating generation
  std::string scriptSha256;        // filled by writePending
  std::optional<std::string> appliedAt;
};

struct PendingScript {
  int itemId = 0;
  std::string scriptText;
  PendingMeta meta;
};

std::filesystem::path scriptPath(const std::filesystem::path& dir, int itemId);
std::filesystem::path metaPath(const std::filesystem::path& dir, int itemId);

class SyncError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Write `bytes` to `target` through a same-directory temp file, fsync and
/// rename. Throws SyncError naming the path.
void atomicWrite(const std::filesystem::path& target, std::string_view bytes);

/// Writes the script then its meta, each atomically. Sets meta.scriptSha256.
void writePending(const std::filesystem::path& dir, PendingScript pending);

/// Current pending pair, or nullopt when absent. Retries briefly while a
/// concurrent writer is between the two renames; throws SyncError on corrupt
/// meta or a persistent digest mismatch.
std::optional<PendingScript> readPending(const std::filesystem::path& dir, int itemId);

struct ApplyReport {
  bool ok = false;
  std::string errorKind;  // ParseError, a runtime error class, NothingToApply, IntegrityError
  std::string message;
  std::uint32_t line = 0;
  std::uint32_t column = 0;
  std::string memberPath;
  std::vector<std::string> console;
};

/// Parse + install. The pending files stay; meta gains applied_at.
ApplyReport applyPending(world::World& world, const std::filesystem::path& dir, int itemId);

}  // namespace magicitem::sync
