#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace magicitem::runtime {

/// Every host binding a script can reach. The runtime resolves member names
/// only through catalog entries, so this enum and the catalog table are the
/// complete sandbox surface.
enum class HostFn : std::uint8_t {
  OnStart, OnUpdate, OnInteract, OnGrab, OnRelease, OnRide, OnExitRide,
  ItemGetPosition, ItemSetPosition, ItemGetRotation, ItemSetRotation,
  ItemGetVelocity, ItemSetVelocity, ItemAddImpulse, ItemSetUseGravity, ItemSetGravityScale,
  ItemState, ItemLog,
  PlayerGetPosition, PlayerSetPosition, PlayerSetJumpSpeedRate, PlayerSetMoveSpeedRate,
  PlayerSetGravityRate, PlayerRespawn,
  Vector3Ctor, VectorX, VectorY, VectorZ, VectorAdd, VectorSub, VectorScale, VectorLength,
  MathSin, MathCos, MathAbs, MathSqrt, MathMin, MathMax, MathFloor, MathPI, MathRandom,
};

enum class EntryKind : std::uint8_t { Method, Property, Constructor };

struct CatalogEntry {
  HostFn fn;
  std::string path;        // "$.setPosition", "PlayerHandle.respawn", "Math.PI", "Vector3"
  EntryKind kind;
  std::string params;      // TypeScript-style parameter list, methods only
  std::string returns;     // TypeScript-style type
  std::string doc;         // prose, may span lines
  std::string sample;      // sample snippet shown in the doc comment
};

struct ApiCatalog {
  std::vector<CatalogEntry> entries;

  const CatalogEntry* find(std::string_view path) const;
};

/// The normative ItemScript host surface.
const ApiCatalog& defaultCatalog();

/// Receiver type names used in catalog paths and UnsupportedApi messages.
inline constexpr std::string_view kItemType = "$";
inline constexpr std::string_view kPlayerType = "PlayerHandle";
inline constexpr std::string_view kVectorType = "Vector3";
inline constexpr std::string_view kMathType = "Math";

}  // namespace magicitem::runtime
