#include "magicitem/world/oracle.hpp"

#include <cmath>

namespace magicitem::world {

std::string_view toString(Oracle o) { return o == Oracle::Task1 ? "task1" : "task2"; }

bool parseOracle(std::string_view text, Oracle& out) {
  if (text == "task1") {
    out = Oracle::Task1;
  } else if (text == "task2") {
    out = Oracle::Task2;
  } else {
    return false;
  }
  return true;
}

void OracleTracker::observe(const FrameRecord& rec) {
  for (const auto& p : rec.players) {
    maxHeight_ = std::max(maxHeight_, p.position.y);
    if (!task1_ && p.position.y > kTask1Height) {
      task1_ = rec.frame;
    }
    const bool overVoid = (std::fabs(p.position.x) > halfExtent_ ||
                           std::fabs(p.position.z) > halfExtent_) &&
                          p.position.y >= kTask2MinHeight;
    auto& run = overVoid_[p.id];
    run = overVoid ? run + 1 : 0;
    if (!task2_ && run >= kTask2SustainFrames) {
      task2_ = rec.frame;
    }
  }
}

void OracleTracker::reset() {
  task1_.reset();
  task2_.reset();
  overVoid_.clear();
  maxHeight_ = -1e300;
}

std::optional<std::uint64_t> OracleTracker::firedAt(Oracle o) const {
  return o == Oracle::Task1 ? task1_ : task2_;
}

std::optional<std::uint64_t> oracleFiringFrame(const std::vector<FrameRecord>& trace, Oracle o,
                                               double groundHalfExtent) {
  OracleTracker tracker(groundHalfExtent);
  for (const auto& rec : trace) {
    tracker.observe(rec);
    if (tracker.fired(o)) break;
  }
  return tracker.firedAt(o);
}

bool evaluateOracle(const std::vector<FrameRecord>& trace, Oracle o, double groundHalfExtent) {
  return oracleFiringFrame(trace, o, groundHalfExtent).has_value();
}

}  // namespace magicitem::world
