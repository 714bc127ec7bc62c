#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "magicitem/world/world.hpp"

namespace magicitem::world {

enum class Oracle { Task1, Task2 };
std::string_view toString(Oracle o);
bool parseOracle(std::string_view text, Oracle& out);

inline constexpr double kTask1Height = 2.0;
inline constexpr std::size_t kTask2SustainFrames = 30;
inline constexpr double kTask2MinHeight = 0.5;

/// Incremental oracle evaluation; feed frames in order.
class OracleTracker {
 public:
  explicit OracleTracker(double groundHalfExtent = 10) : halfExtent_(groundHalfExtent) {}

  void observe(const FrameRecord& rec);
  void reset();

  /// Frame at which the oracle first became true.
  std::optional<std::uint64_t> firedAt(Oracle o) const;
  bool fired(Oracle o) const { return firedAt(o).has_value(); }
  double maxPlayerHeight() const { return maxHeight_; }

 private:
  double halfExtent_;
  std::optional<std::uint64_t> task1_;
  std::optional<std::uint64_t> task2_;
  std::map<int, std::size_t> overVoid_;  // consecutive frames per player
  double maxHeight_ = -1e300;
};

bool evaluateOracle(const std::vector<FrameRecord>& trace, Oracle o, double groundHalfExtent = 10);
std::optional<std::uint64_t> oracleFiringFrame(const std::vector<FrameRecord>& trace, Oracle o,
                                               double groundHalfExtent = 10);

}  // namespace magicitem::world
