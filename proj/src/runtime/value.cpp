#include "magicitem/runtime/value.hpp"

#include <cmath>

#include "magicitem/common/format.hpp"

namespace magicitem::runtime {

const Value* Object::find(std::string_view key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) {
      return &v;
    }
  }
  return nullptr;
}

void Object::set(std::string_view key, Value value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries.emplace_back(std::string(key), std::move(value));
}

Binding* Env::lookupLocal(std::string_view name) {
  for (auto& b : vars) {
    if (b.name == name) {
      return &b;
    }
  }
  return nullptr;
}

Binding* Env::lookup(std::string_view name) {
  for (Env* e = this; e != nullptr; e = e->parent.get()) {
    if (auto* b = e->lookupLocal(name)) {
      return b;
    }
  }
  return nullptr;
}

std::string_view typeName(const Value& v) {
  switch (v.index()) {
    case 0: return "null";
    case 1: return "number";
    case 2: return "boolean";
    case 3: return "string";
    case 4: return "Array";
    case 5: return "Object";
    case 6: return "Function";
    case 7: return "Function";
    case 8: return kVectorType;
    case 9: return kItemType;
    case 10: return kPlayerType;
    case 11: return kMathType;
  }
  return "?";
}

bool isTruthy(const Value& v) {
  if (std::holds_alternative<Null>(v)) return false;
  if (auto* b = std::get_if<bool>(&v)) return *b;
  if (auto* d = std::get_if<double>(&v)) return *d != 0 && !std::isnan(*d);
  if (auto* s = std::get_if<std::string>(&v)) return !s->empty();
  return true;
}

bool strictEquals(const Value& a, const Value& b) {
  if (a.index() != b.index()) {
    return false;
  }
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b);
        if constexpr (std::is_same_v<T, std::shared_ptr<VectorBox>>) {
          return x->v == y->v;
        } else if constexpr (std::is_same_v<T, PlayerHandle>) {
          return x.id == y.id;
        } else if constexpr (std::is_same_v<T, ItemHandle> || std::is_same_v<T, MathNamespace>) {
          return true;
        } else if constexpr (std::is_same_v<T, std::shared_ptr<HostCallable>>) {
          return x->entry == y->entry && strictEquals(x->receiver, y->receiver);
        } else {
          return x == y;  // doubles by IEEE value, pointers by identity
        }
      },
      a);
}

namespace {

void render(const Value& v, std::string& out, bool quoteStrings, int depth) {
  if (depth > 32) {
    out += "...";
    return;
  }
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Null>) {
          out += "null";
        } else if constexpr (std::is_same_v<T, double>) {
          out += formatNumber(x);
        } else if constexpr (std::is_same_v<T, bool>) {
          out += x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          out += quoteStrings ? quoteJson(x) : x;
        } else if constexpr (std::is_same_v<T, std::shared_ptr<Array>>) {
          out += '[';
          for (std::size_t i = 0; i < x->items.size(); ++i) {
            if (i) out += ',';
            render(x->items[i], out, true, depth + 1);
          }
          out += ']';
        } else if constexpr (std::is_same_v<T, std::shared_ptr<Object>>) {
          out += '{';
          for (std::size_t i = 0; i < x->entries.size(); ++i) {
            if (i) out += ',';
            out += quoteJson(x->entries[i].first);
            out += ':';
            render(x->entries[i].second, out, true, depth + 1);
          }
          out += '}';
        } else if constexpr (std::is_same_v<T, std::shared_ptr<Closure>>) {
          out += "<function>";
        } else if constexpr (std::is_same_v<T, std::shared_ptr<HostCallable>>) {
          out += "<function " + x->entry->path + ">";
        } else if constexpr (std::is_same_v<T, std::shared_ptr<VectorBox>>) {
          out += "(" + formatNumber(x->v.x) + ", " + formatNumber(x->v.y) + ", " +
                 formatNumber(x->v.z) + ")";
        } else if constexpr (std::is_same_v<T, ItemHandle>) {
          out += "$";
        } else if constexpr (std::is_same_v<T, PlayerHandle>) {
          out += "player#" + std::to_string(x.id);
        } else {
          out += "Math";
        }
      },
      v);
}

}  // namespace

std::string displayString(const Value& v) {
  std::string out;
  render(v, out, false, 0);
  return out;
}

}  // namespace magicitem::runtime
