#include "magicitem/runtime/effect.hpp"

#include "magicitem/common/format.hpp"

namespace magicitem::runtime {

namespace {

std::string vec(const Vec3& v) {
  return formatNumber(v.x) + ", " + formatNumber(v.y) + ", " + formatNumber(v.z);
}

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string describe(const Effect& effect) {
  return std::visit(
      Overloaded{
          [](const SetItemPosition& e) { return "SetItemPosition(" + vec(e.value) + ")"; },
          [](const SetItemRotation& e) { return "SetItemRotation(" + vec(e.degrees) + ")"; },
          [](const SetItemVelocity& e) { return "SetItemVelocity(" + vec(e.value) + ")"; },
          [](const AddItemImpulse& e) { return "AddItemImpulse(" + vec(e.value) + ")"; },
          [](const SetItemUseGravity& e) {
            return std::string("SetItemUseGravity(") + (e.enabled ? "true" : "false") + ")";
          },
          [](const SetItemGravityScale& e) {
            return "SetItemGravityScale(" + formatNumber(e.scale) + ")";
          },
          [](const SetPlayerJumpSpeedRate& e) {
            return "SetPlayerJumpSpeedRate(" + std::to_string(e.player) + ", " +
                   formatNumber(e.rate) + ")";
          },
          [](const SetPlayerMoveSpeedRate& e) {
            return "SetPlayerMoveSpeedRate(" + std::to_string(e.player) + ", " +
                   formatNumber(e.rate) + ")";
          },
          [](const SetPlayerGravityRate& e) {
            return "SetPlayerGravityRate(" + std::to_string(e.player) + ", " +
                   formatNumber(e.rate) + ")";
          },
          [](const SetPlayerPosition& e) {
            return "SetPlayerPosition(" + std::to_string(e.player) + ", " + vec(e.value) + ")";
          },
          [](const RespawnPlayer& e) { return "RespawnPlayer(" + std::to_string(e.player) + ")"; },
          [](const Log& e) { return "Log(" + quoteJson(e.text) + ")"; },
      },
      effect);
}

}  // namespace magicitem::runtime
