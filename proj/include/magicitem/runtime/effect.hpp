#pragma once

#include <string>
#include <variant>

#include "magicitem/common/vec3.hpp"

namespace magicitem::runtime {

// Item effects target the item whose script emitted them.
struct SetItemPosition { Vec3 value; };
struct SetItemRotation { Vec3 degrees; };
struct SetItemVelocity { Vec3 value; };
struct AddItemImpulse { Vec3 value; };
struct SetItemUseGravity { bool enabled = false; };
struct SetItemGravityScale { double scale = 1; };
struct SetPlayerJumpSpeedRate { int player = 0; double rate = 1; };
struct SetPlayerMoveSpeedRate { int player = 0; double rate = 1; };
struct SetPlayerGravityRate { int player = 0; double rate = 1; };
struct SetPlayerPosition { int player = 0; Vec3 value; };
struct RespawnPlayer { int player = 0; };
struct Log { std::string text; };

/// A world mutation request. Scripts affect the world only through these.
using Effect = std::variant<SetItemPosition, SetItemRotation, SetItemVelocity, AddItemImpulse,
                            SetItemUseGravity, SetItemGravityScale, SetPlayerJumpSpeedRate,
                            SetPlayerMoveSpeedRate, SetPlayerGravityRate, SetPlayerPosition,
                            RespawnPlayer, Log>;

/// Stable one-line rendering, e.g. "SetItemPosition(0, 1.5, 0)".
std::string describe(const Effect& effect);

}  // namespace magicitem::runtime
