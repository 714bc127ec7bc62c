#include "magicitem/world/world.hpp"

#include <cmath>
#include <stdexcept>

#include "magicitem/common/digest.hpp"
#include "magicitem/common/overloaded.hpp"

namespace magicitem::world {

using nlohmann::json;
using runtime::EventKind;

std::string_view toString(ItemKind kind) {
  return kind == ItemKind::Chair ? "chair" : "grabbable";
}

bool parseItemKind(std::string_view text, ItemKind& out) {
  if (text == "chair") {
    out = ItemKind::Chair;
  } else if (text == "grabbable") {
    out = ItemKind::Grabbable;
  } else {
    return false;
  }
  return true;
}

namespace {

json vecJson(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vecFrom(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw std::invalid_argument("expected [x, y, z]");
  }
  Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  if (!v.finite()) {
    throw std::invalid_argument("vector components must be finite");
  }
  return v;
}

json optId(const std::optional<int>& id) { return id ? json(*id) : json(nullptr); }

std::string itemTag(int id) { return "[item " + std::to_string(id) + "] "; }

}  // namespace

PlayerInput parseInput(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "move") return input::Move{vecFrom(j.at("direction"))};
    if (type == "jump") return input::Jump{};
    if (type == "interact") return input::Interact{j.at("item").get<int>()};
    if (type == "grab") return input::Grab{j.at("item").get<int>()};
    if (type == "release") return input::Release{};
    if (type == "ride") return input::Ride{j.at("item").get<int>()};
    if (type == "exitRide") return input::ExitRide{};
    throw std::invalid_argument("unknown input type '" + type + "'");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed input: ") + e.what());
  }
}

json toJson(const PlayerInput& in) {
  return std::visit(Overloaded{
                        [](const input::Move& m) {
                          return json{{"type", "move"}, {"direction", vecJson(m.direction)}};
                        },
                        [](const input::Jump&) { return json{{"type", "jump"}}; },
                        [](const input::Interact& m) {
                          return json{{"type", "interact"}, {"item", m.item}};
                        },
                        [](const input::Grab& m) { return json{{"type", "grab"}, {"item", m.item}}; },
                        [](const input::Release&) { return json{{"type", "release"}}; },
                        [](const input::Ride& m) { return json{{"type", "ride"}, {"item", m.item}}; },
                        [](const input::ExitRide&) { return json{{"type", "exitRide"}}; },
                    },
                    in);
}

std::string toJsonLine(const FrameRecord& rec) {
  json players = json::array();
  for (const auto& p : rec.players) players.push_back({{"id", p.id}, {"pos", vecJson(p.position)}});
  json items = json::array();
  for (const auto& i : rec.items) items.push_back({{"id", i.id}, {"pos", vecJson(i.position)}});
  json j = {{"frame", rec.frame},     {"time", rec.time},       {"players", players},
            {"items", items},         {"console", rec.console}, {"errors", rec.errors}};
  return j.dump();
}

FrameRecord frameFromJson(const json& j) {
  FrameRecord rec;
  rec.frame = j.at("frame").get<std::uint64_t>();
  rec.time = j.at("time").get<double>();
  for (const auto& p : j.at("players")) rec.players.push_back({p.at("id"), vecFrom(p.at("pos"))});
  for (const auto& i : j.at("items")) rec.items.push_back({i.at("id"), vecFrom(i.at("pos"))});
  rec.console = j.value("console", std::vector<std::string>{});
  rec.errors = j.value("errors", std::vector<std::string>{});
  return rec;
}

World::World(WorldConfig config, std::uint64_t seed)
    : config_(config), seed_(seed), rng_(seed) {
  if (!(config_.dt > 0) || !std::isfinite(config_.dt)) {
    throw std::invalid_argument("timestep must be positive");
  }
  if (!(config_.groundHalfExtent > 0) || !std::isfinite(config_.groundHalfExtent)) {
    throw std::invalid_argument("ground extent must be positive");
  }
  if (!config_.gravity.finite()) {
    throw std::invalid_argument("gravity must be finite");
  }
}

int World::spawnItem(ItemKind kind, Vec3 position) {
  if (!position.finite()) {
    throw std::invalid_argument("item position must be finite");
  }
  Item item;
  item.id = nextItemId_++;
  item.kind = kind;
  item.position = position;
  int id = item.id;
  items_.emplace(id, std::move(item));
  return id;
}

int World::spawnPlayer(Vec3 position) {
  if (!position.finite()) {
    throw std::invalid_argument("player position must be finite");
  }
  Player p;
  p.id = nextPlayerId_++;
  p.spawn = position;
  resetToSpawn(p);
  int id = p.id;
  players_.emplace(id, p);
  return id;
}

const Item* World::item(int id) const {
  auto it = items_.find(id);
  return it == items_.end() ? nullptr : &it->second;
}

const Player* World::player(int id) const {
  auto it = players_.find(id);
  return it == players_.end() ? nullptr : &it->second;
}

bool World::insideGround(const Vec3& p) const {
  return std::fabs(p.x) <= config_.groundHalfExtent && std::fabs(p.z) <= config_.groundHalfExtent;
}

void World::resetToSpawn(Player& p) {
  p.position = p.spawn;
  p.velocity = {};
  p.moveIntent = {};
  p.riding.reset();
  p.holding.reset();
  p.grounded = p.spawn.y == 0 && insideGround(p.spawn);
}

runtime::WorldView World::viewFor(const Item& item) const {
  runtime::WorldView v;
  v.itemId = item.id;
  v.position = item.position;
  v.rotation = item.rotation;
  v.velocity = item.velocity;
  for (const auto& [id, p] : players_) {
    v.players[id] = runtime::PlayerView{p.position, p.velocity};
  }
  v.rngState = rng_;
  return v;
}

ConsoleReport World::installScript(int itemId, std::shared_ptr<const dsl::Program> program) {
  ConsoleReport report;
  auto it = items_.find(itemId);
  if (it == items_.end()) {
    report.ok = false;
    report.console.push_back("no item with id " + std::to_string(itemId));
    return report;
  }
  Item& item = it->second;
  item.script.reset();
  auto result = runtime::instantiate(std::move(program), config_.budget, viewFor(item));
  rng_ = result.rngState;
  report.console = std::move(result.console);
  if (result.error) {
    report.ok = false;
    report.error = std::move(result.error);
    return report;
  }
  item.script = std::move(result.instance);
  applyEffects(itemId, result.effects);

  if (item.script->hasCallback(EventKind::Start)) {
    auto start = runtime::dispatch(*item.script, runtime::Event{EventKind::Start, 0, 0},
                                   viewFor(item));
    rng_ = start.rngState;
    report.console.insert(report.console.end(), start.console.begin(), start.console.end());
    if (start.error) {
      // The script stays installed; onStart failing is a console error, like any callback.
      report.error = std::move(start.error);
    } else {
      applyEffects(itemId, start.effects);
    }
  }
  return report;
}

void World::removeScript(int itemId) {
  if (auto it = items_.find(itemId); it != items_.end()) {
    it->second.script.reset();
  }
}

InputAck World::applyInput(int playerId, const PlayerInput& in) {
  auto pit = players_.find(playerId);
  if (pit == players_.end()) {
    return {false, "no player with id " + std::to_string(playerId)};
  }
  const Player& p = pit->second;
  auto needItem = [&](int id) -> const Item* { return item(id); };
  InputAck ack = std::visit(
      Overloaded{
          [&](const input::Move& m) -> InputAck {
            const Vec3& d = m.direction;
            if (!d.finite() || d.y != 0 || d.length() > 1 + 1e-9) {
              return {false, "move direction must lie in the xz-plane with length <= 1"};
            }
            return {};
          },
          [&](const input::Jump&) -> InputAck { return {}; },
          [&](const input::Interact& m) -> InputAck {
            if (!needItem(m.item)) return {false, "no item with id " + std::to_string(m.item)};
            return {};
          },
          [&](const input::Grab& m) -> InputAck {
            const Item* it = needItem(m.item);
            if (!it) return {false, "no item with id " + std::to_string(m.item)};
            if (it->kind != ItemKind::Grabbable) return {false, "item cannot be held"};
            if ((it->position - p.position).length() > config_.interactRange) {
              return {false, "out of range"};
            }
            if (it->heldBy && *it->heldBy != playerId) return {false, "item is held by another player"};
            return {};
          },
          [&](const input::Release&) -> InputAck { return {}; },
          [&](const input::Ride& m) -> InputAck {
            const Item* it = needItem(m.item);
            if (!it) return {false, "no item with id " + std::to_string(m.item)};
            if (it->kind != ItemKind::Chair) return {false, "item cannot be ridden"};
            if ((it->position - p.position).length() > config_.interactRange) {
              return {false, "out of range"};
            }
            if (it->riddenBy && *it->riddenBy != playerId) return {false, "chair is occupied"};
            return {};
          },
          [&](const input::ExitRide&) -> InputAck { return {}; },
      },
      in);
  if (ack.accepted) {
    queued_.emplace_back(playerId, in);
  }
  return ack;
}

void World::dispatchTo(Item& item, const runtime::Event& ev, FrameRecord& rec,
                       std::vector<Emitted>& out) {
  if (!item.script) {
    return;
  }
  auto r = runtime::dispatch(*item.script, ev, viewFor(item));
  rng_ = r.rngState;
  for (const auto& line : r.console) {
    rec.console.push_back(itemTag(item.id) + line);
  }
  if (r.error) {
    rec.errors.push_back(itemTag(item.id) + r.error->consoleLine());
  }
  if (!r.effects.empty()) {
    out.push_back({item.id, std::move(r.effects)});
  }
}

void World::exitRide(Player& p, FrameRecord& rec, std::vector<Emitted>& out) {
  Item& chair = items_.at(*p.riding);
  chair.riddenBy.reset();
  p.riding.reset();
  p.velocity = {};
  p.grounded = false;
  dispatchTo(chair, {EventKind::ExitRide, 0, p.id}, rec, out);
}

void World::consumeInput(int playerId, const PlayerInput& in, FrameRecord& rec,
                         std::vector<Emitted>& out) {
  auto pit = players_.find(playerId);
  if (pit == players_.end()) {
    return;
  }
  Player& p = pit->second;
  std::visit(
      Overloaded{
          [&](const input::Move& m) {
            if (!p.riding) p.moveIntent = m.direction;
          },
          [&](const input::Jump&) {
            if (p.riding) {
              exitRide(p, rec, out);
            } else if (!p.grounded) {
              return;
            }
            p.velocity.y = config_.baseJumpSpeed * p.jumpSpeedRate;
            p.grounded = false;
          },
          [&](const input::Interact& m) {
            if (auto it = items_.find(m.item); it != items_.end()) {
              dispatchTo(it->second, {EventKind::Interact, 0, p.id}, rec, out);
            }
          },
          [&](const input::Grab& m) {
            auto it = items_.find(m.item);
            if (it == items_.end() || it->second.heldBy || p.holding) return;
            it->second.heldBy = p.id;
            p.holding = m.item;
            dispatchTo(it->second, {EventKind::Grab, 0, p.id}, rec, out);
          },
          [&](const input::Release&) {
            if (!p.holding) return;
            Item& held = items_.at(*p.holding);
            held.heldBy.reset();
            p.holding.reset();
            dispatchTo(held, {EventKind::Release, 0, p.id}, rec, out);
          },
          [&](const input::Ride& m) {
            auto it = items_.find(m.item);
            if (it == items_.end() || it->second.riddenBy || p.riding) return;
            it->second.riddenBy = p.id;
            p.riding = m.item;
            p.velocity = {};
            p.moveIntent = {};
            p.grounded = false;
            p.position = it->second.position + config_.seatOffset;
            dispatchTo(it->second, {EventKind::Ride, 0, p.id}, rec, out);
          },
          [&](const input::ExitRide&) {
            if (p.riding) exitRide(p, rec, out);
          },
      },
      in);
}

void World::applyEffects(int itemId, const std::vector<runtime::Effect>& effects) {
  auto iit = items_.find(itemId);
  if (iit == items_.end()) {
    return;
  }
  Item& item = iit->second;
  auto withPlayer = [&](int id, auto&& fn) {
    if (auto pit = players_.find(id); pit != players_.end()) fn(pit->second);
  };
  for (const auto& effect : effects) {
    std::visit(Overloaded{
                   [&](const runtime::SetItemPosition& e) { item.position = e.value; },
                   [&](const runtime::SetItemRotation& e) { item.rotation = e.degrees; },
                   [&](const runtime::SetItemVelocity& e) { item.velocity = e.value; },
                   [&](const runtime::AddItemImpulse& e) { item.velocity += e.value; },
                   [&](const runtime::SetItemUseGravity& e) { item.useGravity = e.enabled; },
                   [&](const runtime::SetItemGravityScale& e) { item.gravityScale = e.scale; },
                   [&](const runtime::SetPlayerJumpSpeedRate& e) {
                     withPlayer(e.player, [&](Player& p) { p.jumpSpeedRate = e.rate; });
                   },
                   [&](const runtime::SetPlayerMoveSpeedRate& e) {
                     withPlayer(e.player, [&](Player& p) { p.moveSpeedRate = e.rate; });
                   },
                   [&](const runtime::SetPlayerGravityRate& e) {
                     withPlayer(e.player, [&](Player& p) { p.gravityRate = e.rate; });
                   },
                   [&](const runtime::SetPlayerPosition& e) {
                     withPlayer(e.player, [&](Player& p) {
                       p.position = e.value;
                       p.velocity = {};
                       p.grounded = false;
                     });
                   },
                   [&](const runtime::RespawnPlayer& e) {
                     withPlayer(e.player, [&](Player& p) {
                       if (p.riding) items_.at(*p.riding).riddenBy.reset();
                       if (p.holding) items_.at(*p.holding).heldBy.reset();
                       resetToSpawn(p);
                     });
                   },
                   [&](const runtime::Log&) {},
               },
               effect);
  }
}

void World::resolveGround(Vec3& pos, Vec3& vel, double prevY, bool* grounded) const {
  const bool landed = insideGround(pos) && prevY >= 0 && pos.y < 0;
  if (landed) {
    pos.y = 0;
    vel.y = 0;
  }
  if (grounded) {
    *grounded = landed;
  }
}

void World::integrate() {
  const double dt = config_.dt;
  for (auto& [id, p] : players_) {
    if (p.riding) continue;
    const double speed = config_.baseMoveSpeed * p.moveSpeedRate;
    p.velocity.x = p.moveIntent.x * speed;
    p.velocity.z = p.moveIntent.z * speed;
    p.velocity += config_.gravity * (p.gravityRate * dt);
    const double prevY = p.position.y;
    p.position += p.velocity * dt;
    resolveGround(p.position, p.velocity, prevY, &p.grounded);
  }
  for (auto& [id, item] : items_) {
    if (item.heldBy) continue;
    if (item.useGravity) {
      item.velocity += config_.gravity * (item.gravityScale * dt);
    }
    const double prevY = item.position.y;
    item.position += item.velocity * dt;
    resolveGround(item.position, item.velocity, prevY, nullptr);
  }
}

void World::lockAttachments() {
  for (auto& [id, item] : items_) {
    if (item.heldBy) {
      const Player& holder = players_.at(*item.heldBy);
      item.position = holder.position + config_.heldOffset;
      item.velocity = holder.velocity;
    }
    if (item.riddenBy) {
      Player& rider = players_.at(*item.riddenBy);
      rider.position = item.position + config_.seatOffset;
      rider.velocity = item.velocity;
    }
  }
}

void World::respawnFallen() {
  for (auto& [id, p] : players_) {
    if (p.position.y < config_.killPlaneY) {
      if (p.riding) items_.at(*p.riding).riddenBy.reset();
      if (p.holding) items_.at(*p.holding).heldBy.reset();
      resetToSpawn(p);
    }
  }
}

const FrameRecord& World::step() {
  FrameRecord rec;
  rec.frame = frame_;
  std::vector<Emitted> emitted;

  auto inputs = std::move(queued_);
  queued_.clear();
  for (const auto& [playerId, in] : inputs) {
    consumeInput(playerId, in, rec, emitted);
  }
  for (auto& [id, item] : items_) {
    dispatchTo(item, {EventKind::Update, config_.dt, 0}, rec, emitted);
  }
  for (const auto& batch : emitted) {
    applyEffects(batch.itemId, batch.effects);
  }
  integrate();
  lockAttachments();
  respawnFallen();
  // Attachments again so a respawned holder does not leave its item behind.
  lockAttachments();

  ++frame_;
  rec.time = time();
  for (const auto& [id, p] : players_) rec.players.push_back({id, p.position});
  for (const auto& [id, item] : items_) rec.items.push_back({id, item.position});

  traceHash_ = sha256Hex(traceHash_ + toJsonLine(rec));
  trace_.push_back(std::move(rec));
  if (config_.traceCapacity > 0 && trace_.size() > config_.traceCapacity) {
    trace_.pop_front();
  }
  return trace_.back();
}

json World::snapshot() const {
  json players = json::array();
  for (const auto& [id, p] : players_) {
    players.push_back({{"id", id},
                       {"pos", vecJson(p.position)},
                       {"vel", vecJson(p.velocity)},
                       {"grounded", p.grounded},
                       {"riding", optId(p.riding)},
                       {"holding", optId(p.holding)},
                       {"rates",
                        {{"jump", p.jumpSpeedRate},
                         {"move", p.moveSpeedRate},
                         {"gravity", p.gravityRate}}}});
  }
  json items = json::array();
  for (const auto& [id, item] : items_) {
    items.push_back({{"id", id},
                     {"kind", toString(item.kind)},
                     {"pos", vecJson(item.position)},
                     {"rot", vecJson(item.rotation)},
                     {"vel", vecJson(item.velocity)},
                     {"useGravity", item.useGravity},
                     {"gravityScale", item.gravityScale},
                     {"heldBy", optId(item.heldBy)},
                     {"riddenBy", optId(item.riddenBy)},
                     {"hasScript", item.script != nullptr}});
  }
  return {{"frame", frame_}, {"time", time()}, {"players", players}, {"items", items}};
}

std::string World::structuralHash() const {
  std::string material = snapshot().dump();
  material += "|seed=" + std::to_string(seed_) + "|rng=" + std::to_string(rng_);
  for (const auto& [id, item] : items_) {
    if (item.script) {
      material += "|" + std::to_string(id) + ":" + item.script->program().sourceHash + ":" +
                  item.script->stateBlob();
    }
  }
  return sha256Hex(material);
}

}  // namespace magicitem::world
