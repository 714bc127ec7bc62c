#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace magicitem {

/// Shortest decimal text that parses back to exactly `value`.
/// Integral values print without a fraction ("3", not "3.0").
/// Non-finite values print as "NaN", "Infinity", "-Infinity".
std::string formatNumber(double value);

/// JSON string literal (with quotes) for UTF-8 text.
std::string quoteJson(std::string_view text);

/// RFC 3339 UTC timestamp with millisecond precision.
std::string formatRfc3339(std::chrono::system_clock::time_point tp);

}  // namespace magicitem
