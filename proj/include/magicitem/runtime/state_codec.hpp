#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "magicitem/runtime/value.hpp"

namespace magicitem::runtime {

/// JSON encoding of `$.state`: keys in insertion order, numbers as shortest
/// round-trip decimals. Only null/number/string/boolean/array/object values
/// are persistable; anything else raises RuntimeError(TypeMismatch), and an
/// encoding longer than kMaxStateBytes raises RuntimeError(StateOverflow).
std::string encodeState(const Object& state);

/// Inverse of encodeState. Throws std::invalid_argument on malformed input.
std::shared_ptr<Object> decodeState(std::string_view blob);

/// Deep structural equality of persistable values.
bool deepEquals(const Value& a, const Value& b);

}  // namespace magicitem::runtime
