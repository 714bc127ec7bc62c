#include "magicitem/runtime/state_codec.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "magicitem/common/format.hpp"
#include "magicitem/runtime/error.hpp"
#include "magicitem/runtime/instance.hpp"

namespace magicitem::runtime {

namespace {

constexpr int kMaxStateNesting = 64;

void encodeValue(const Value& v, std::string& out, int depth) {
  if (depth > kMaxStateNesting) {
    throw RuntimeError(ErrorClass::StateOverflow, "$.state is nested too deeply to persist");
  }
  if (out.size() > kMaxStateBytes) {
    throw RuntimeError(ErrorClass::StateOverflow,
                       "$.state exceeds " + std::to_string(kMaxStateBytes) + " bytes");
  }
  if (std::holds_alternative<Null>(v)) {
    out += "null";
  } else if (auto* d = std::get_if<double>(&v)) {
    if (!std::isfinite(*d)) {
      throw RuntimeError(ErrorClass::TypeMismatch, "$.state cannot hold non-finite numbers");
    }
    out += formatNumber(*d);
  } else if (auto* b = std::get_if<bool>(&v)) {
    out += *b ? "true" : "false";
  } else if (auto* s = std::get_if<std::string>(&v)) {
    out += quoteJson(*s);
  } else if (auto* a = std::get_if<std::shared_ptr<Array>>(&v)) {
    out += '[';
    for (std::size_t i = 0; i < (*a)->items.size(); ++i) {
      if (i) out += ',';
      encodeValue((*a)->items[i], out, depth + 1);
    }
    out += ']';
  } else if (auto* o = std::get_if<std::shared_ptr<Object>>(&v)) {
    out += '{';
    for (std::size_t i = 0; i < (*o)->entries.size(); ++i) {
      if (i) out += ',';
      out += quoteJson((*o)->entries[i].first);
      out += ':';
      encodeValue((*o)->entries[i].second, out, depth + 1);
    }
    out += '}';
  } else {
    throw RuntimeError(ErrorClass::TypeMismatch,
                       "$.state cannot hold a " + std::string(typeName(v)) +
                           " (only numbers, strings, booleans, null, arrays and objects persist)");
  }
}

Value decodeValue(const nlohmann::ordered_json& j, int depth) {
  if (depth > kMaxStateNesting) {
    throw std::invalid_argument("state blob nested too deeply");
  }
  switch (j.type()) {
    case nlohmann::json::value_t::null: return Null{};
    case nlohmann::json::value_t::boolean: return j.get<bool>();
    case nlohmann::json::value_t::number_integer: return static_cast<double>(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return static_cast<double>(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float: return j.get<double>();
    case nlohmann::json::value_t::string: return j.get<std::string>();
    case nlohmann::json::value_t::array: {
      auto arr = std::make_shared<Array>();
      for (const auto& el : j) {
        arr->items.push_back(decodeValue(el, depth + 1));
      }
      return arr;
    }
    case nlohmann::json::value_t::object: {
      auto obj = std::make_shared<Object>();
      for (const auto& [k, el] : j.items()) {
        obj->set(k, decodeValue(el, depth + 1));
      }
      return obj;
    }
    default: throw std::invalid_argument("unsupported JSON value in state blob");
  }
}

}  // namespace

std::string encodeState(const Object& state) {
  std::string out;
  out += '{';
  for (std::size_t i = 0; i < state.entries.size(); ++i) {
    if (i) out += ',';
    out += quoteJson(state.entries[i].first);
    out += ':';
    encodeValue(state.entries[i].second, out, 1);
  }
  out += '}';
  if (out.size() > kMaxStateBytes) {
    throw RuntimeError(ErrorClass::StateOverflow, "$.state is " + std::to_string(out.size()) +
                                                      " bytes; the limit is " +
                                                      std::to_string(kMaxStateBytes));
  }
  return out;
}

std::shared_ptr<Object> decodeState(std::string_view blob) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed state blob: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("state blob must be a JSON object");
  }
  return std::get<std::shared_ptr<Object>>(decodeValue(j, 0));
}

bool deepEquals(const Value& a, const Value& b) {
  if (a.index() != b.index()) {
    return false;
  }
  if (auto* x = std::get_if<std::shared_ptr<Array>>(&a)) {
    const auto& y = std::get<std::shared_ptr<Array>>(b);
    if ((*x)->items.size() != y->items.size()) return false;
    for (std::size_t i = 0; i < y->items.size(); ++i) {
      if (!deepEquals((*x)->items[i], y->items[i])) return false;
    }
    return true;
  }
  if (auto* x = std::get_if<std::shared_ptr<Object>>(&a)) {
    const auto& y = std::get<std::shared_ptr<Object>>(b);
    if ((*x)->entries.size() != y->entries.size()) return false;
    for (std::size_t i = 0; i < y->entries.size(); ++i) {
      if ((*x)->entries[i].first != y->entries[i].first) return false;
      if (!deepEquals((*x)->entries[i].second, y->entries[i].second)) return false;
    }
    return true;
  }
  return strictEquals(a, b);
}

}  // namespace magicitem::runtime
