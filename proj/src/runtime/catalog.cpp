#include "magicitem/runtime/catalog.hpp"

#include <algorithm>

namespace magicitem::runtime {

const CatalogEntry* ApiCatalog::find(std::string_view path) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const CatalogEntry& e) { return e.path == path; });
  return it == entries.end() ? nullptr : &*it;
}

namespace {

ApiCatalog buildDefault() {
  using K = EntryKind;
  ApiCatalog c;
  auto add = [&](HostFn fn, std::string path, K kind, std::string params, std::string returns,
                 std::string doc, std::string sample) {
    c.entries.push_back(CatalogEntry{fn, std::move(path), kind, std::move(params),
                                     std::move(returns), std::move(doc), std::move(sample)});
  };

  // Item handle `$`: the item this script is attached to.
  add(HostFn::OnStart, "$.onStart", K::Method, "callback: () => void", "void",
      "Registers a callback that runs once, right after the script is applied to the item.\n"
      "Registering again replaces the previous callback.",
      "$.onStart(() => {\n  $.state.count = 0;\n});");
  add(HostFn::OnUpdate, "$.onUpdate", K::Method, "callback: (deltaTime: number) => void", "void",
      "Registers a callback that runs every frame. deltaTime is the elapsed time in seconds\n"
      "since the previous frame (1/60 s).",
      "$.onUpdate(deltaTime => {\n  const r = $.getRotation();\n  r.y += 90 * deltaTime;\n"
      "  $.setRotation(r);\n});");
  add(HostFn::OnInteract, "$.onInteract", K::Method, "callback: (player: PlayerHandle) => void",
      "void", "Registers a callback that runs when a player interacts with (uses) the item.",
      "$.onInteract(player => {\n  player.setJumpSpeedRate(2);\n});");
  add(HostFn::OnGrab, "$.onGrab", K::Method, "callback: (player: PlayerHandle) => void", "void",
      "Registers a callback that runs when a player picks the item up.\n"
      "Only grabbable items can be held.",
      "$.onGrab(player => {\n  $.state.held = true;\n});");
  add(HostFn::OnRelease, "$.onRelease", K::Method, "callback: (player: PlayerHandle) => void",
      "void", "Registers a callback that runs when the holding player lets go of the item.",
      "$.onRelease(player => {\n  $.state.held = false;\n  $.addImpulse(Vector3(0, 5, 0));\n});");
  add(HostFn::OnRide, "$.onRide", K::Method, "callback: (player: PlayerHandle) => void", "void",
      "Registers a callback that runs when a player sits on the item.\n"
      "Only chair items can be ridden. The rider follows the item while seated.",
      "$.onRide(player => {\n  $.state.riding = true;\n});");
  add(HostFn::OnExitRide, "$.onExitRide", K::Method, "callback: (player: PlayerHandle) => void",
      "void", "Registers a callback that runs when the seated player gets off the item.",
      "$.onExitRide(player => {\n  $.state.riding = false;\n});");
  add(HostFn::ItemGetPosition, "$.getPosition", K::Method, "", "Vector3",
      "Returns a copy of the item's position in meters, as seen at the start of the frame.",
      "const p = $.getPosition();\n$.log(p.y);");
  add(HostFn::ItemSetPosition, "$.setPosition", K::Method, "position: Vector3", "void",
      "Moves the item to the given position (meters). Applied at the end of the frame;\n"
      "getPosition() returns the new value from the next frame on.",
      "$.onUpdate(deltaTime => {\n  const p = $.getPosition();\n  p.x += 1 * deltaTime;\n"
      "  $.setPosition(p);\n});");
  add(HostFn::ItemGetRotation, "$.getRotation", K::Method, "", "Vector3",
      "Returns the item's rotation as Euler angles in degrees.",
      "const r = $.getRotation();\n$.log(r.y);");
  add(HostFn::ItemSetRotation, "$.setRotation", K::Method, "rotation: Vector3", "void",
      "Sets the item's rotation as Euler angles in degrees.",
      "$.setRotation(Vector3(0, 45, 0));");
  add(HostFn::ItemGetVelocity, "$.getVelocity", K::Method, "", "Vector3",
      "Returns the item's velocity in meters per second.",
      "const v = $.getVelocity();\nif (v.y < 0) {\n  $.log(\"falling\");\n}");
  add(HostFn::ItemSetVelocity, "$.setVelocity", K::Method, "velocity: Vector3", "void",
      "Sets the item's velocity in meters per second.",
      "$.setVelocity(Vector3(0, 3, 0));");
  add(HostFn::ItemAddImpulse, "$.addImpulse", K::Method, "impulse: Vector3", "void",
      "Adds the given change of velocity (meters per second) to the item.",
      "$.onRelease(player => {\n  $.addImpulse(Vector3(0, 8, 0));\n});");
  add(HostFn::ItemSetUseGravity, "$.setUseGravity", K::Method, "useGravity: boolean", "void",
      "Turns gravity on or off for the item. Items do not use gravity by default.",
      "$.setUseGravity(true);");
  add(HostFn::ItemSetGravityScale, "$.setGravityScale", K::Method, "scale: number", "void",
      "Multiplies the gravity acting on the item (1 = normal gravity, 0.165 = the moon).",
      "$.setUseGravity(true);\n$.setGravityScale(0.165);");
  add(HostFn::ItemState, "$.state", K::Property, "", "{ [key: string]: any }",
      "Persistent storage for the script. Variables declared in the script are reset\n"
      "before every callback, so keep anything that must survive between frames here.\n"
      "Values must be numbers, strings, booleans, null, arrays or plain objects.",
      "$.onUpdate(deltaTime => {\n  $.state.t = ($.state.t || 0) + deltaTime;\n});");
  add(HostFn::ItemLog, "$.log", K::Method, "value: any", "void",
      "Writes a value to the console.", "$.log(\"hello\");");

  // Player handle, received by interaction callbacks.
  add(HostFn::PlayerGetPosition, "PlayerHandle.getPosition", K::Method, "", "Vector3",
      "Returns the player's foot position in meters.",
      "$.onInteract(player => {\n  $.log(player.getPosition().y);\n});");
  add(HostFn::PlayerSetPosition, "PlayerHandle.setPosition", K::Method, "position: Vector3",
      "void", "Teleports the player to the given position in meters.",
      "$.onInteract(player => {\n  player.setPosition(Vector3(0, 5, 0));\n});");
  add(HostFn::PlayerSetJumpSpeedRate, "PlayerHandle.setJumpSpeedRate", K::Method,
      "rate: number", "void",
      "Multiplies the player's jump speed (1 = normal). Must be 0 or greater.",
      "$.onInteract(player => {\n  player.setJumpSpeedRate(3);\n});");
  add(HostFn::PlayerSetMoveSpeedRate, "PlayerHandle.setMoveSpeedRate", K::Method,
      "rate: number", "void",
      "Multiplies the player's walking speed (1 = normal). Must be 0 or greater.",
      "$.onGrab(player => {\n  player.setMoveSpeedRate(2);\n});");
  add(HostFn::PlayerSetGravityRate, "PlayerHandle.setGravityRate", K::Method, "rate: number",
      "void", "Multiplies the gravity acting on the player (1 = normal). Must be 0 or greater.",
      "$.onGrab(player => {\n  player.setGravityRate(0.3);\n});");
  add(HostFn::PlayerRespawn, "PlayerHandle.respawn", K::Method, "", "void",
      "Sends the player back to their spawn point.",
      "$.onInteract(player => {\n  player.respawn();\n});");

  add(HostFn::Vector3Ctor, "Vector3", K::Constructor, "x: number, y: number, z: number",
      "Vector3", "Creates a vector. Call it as a function; `new` is not supported.",
      "const up = Vector3(0, 1, 0);");
  add(HostFn::VectorX, "Vector3.x", K::Property, "", "number", "X component (read/write).",
      "const v = Vector3(1, 2, 3);\nv.x = 5;");
  add(HostFn::VectorY, "Vector3.y", K::Property, "", "number", "Y component, up (read/write).",
      "const p = $.getPosition();\np.y += 1;\n$.setPosition(p);");
  add(HostFn::VectorZ, "Vector3.z", K::Property, "", "number", "Z component (read/write).",
      "const v = Vector3(0, 0, 1);\n$.log(v.z);");
  add(HostFn::VectorAdd, "Vector3.add", K::Method, "other: Vector3", "Vector3",
      "Returns the sum of two vectors.",
      "$.setPosition($.getPosition().add(Vector3(0, 1, 0)));");
  add(HostFn::VectorSub, "Vector3.sub", K::Method, "other: Vector3", "Vector3",
      "Returns this vector minus the other.",
      "const d = player.getPosition().sub($.getPosition());");
  add(HostFn::VectorScale, "Vector3.scale", K::Method, "factor: number", "Vector3",
      "Returns this vector multiplied by a number.",
      "$.setVelocity(Vector3(1, 0, 0).scale(2));");
  add(HostFn::VectorLength, "Vector3.length", K::Method, "", "number",
      "Returns the length of the vector.",
      "const dist = player.getPosition().sub($.getPosition()).length();");

  add(HostFn::MathSin, "Math.sin", K::Method, "radians: number", "number", "Sine.",
      "const y = Math.sin($.state.t * 2 * Math.PI);");
  add(HostFn::MathCos, "Math.cos", K::Method, "radians: number", "number", "Cosine.",
      "const x = Math.cos($.state.t);");
  add(HostFn::MathAbs, "Math.abs", K::Method, "value: number", "number", "Absolute value.",
      "const a = Math.abs(-2);");
  add(HostFn::MathSqrt, "Math.sqrt", K::Method, "value: number", "number", "Square root.",
      "const s = Math.sqrt(9.81 * 2);");
  add(HostFn::MathMin, "Math.min", K::Method, "...values: number[]", "number",
      "Smallest of the arguments.", "const h = Math.min($.getPosition().y, 10);");
  add(HostFn::MathMax, "Math.max", K::Method, "...values: number[]", "number",
      "Largest of the arguments.", "const h = Math.max($.getPosition().y, 0);");
  add(HostFn::MathFloor, "Math.floor", K::Method, "value: number", "number",
      "Largest integer less than or equal to the value.", "const n = Math.floor(2.7);");
  add(HostFn::MathPI, "Math.PI", K::Property, "", "number", "The ratio of a circle's circumference to its diameter.",
      "const full = 2 * Math.PI;");
  add(HostFn::MathRandom, "Math.random", K::Method, "", "number",
      "Uniform random number in [0, 1). Reproducible for a given world seed.",
      "const dx = Math.random() - 0.5;");
  return c;
}

}  // namespace

const ApiCatalog& defaultCatalog() {
  static const ApiCatalog catalog = buildDefault();
  return catalog;
}

}  // namespace magicitem::runtime
