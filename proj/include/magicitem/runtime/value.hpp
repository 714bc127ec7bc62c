#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "magicitem/common/vec3.hpp"
#include "magicitem/dsl/ast.hpp"
#include "magicitem/runtime/catalog.hpp"

namespace magicitem::runtime {

struct Array;
struct Object;
struct Closure;
struct HostCallable;
struct VectorBox;

struct Null {
  friend bool operator==(Null, Null) { return true; }
};
struct ItemHandle {};  // `$`
struct PlayerHandle {
  int id = 0;
};
struct MathNamespace {};

using Value = std::variant<Null, double, bool, std::string, std::shared_ptr<Array>,
                           std::shared_ptr<Object>, std::shared_ptr<Closure>,
                           std::shared_ptr<HostCallable>, std::shared_ptr<VectorBox>, ItemHandle,
                           PlayerHandle, MathNamespace>;

struct Array {
  std::vector<Value> items;
};

/// Insertion-ordered string map.
struct Object {
  std::vector<std::pair<std::string, Value>> entries;

  const Value* find(std::string_view key) const;
  void set(std::string_view key, Value value);
};

struct VectorBox {
  Vec3 v;
};

struct Env;

struct Closure {
  const dsl::ArrowFunction* fn = nullptr;
  std::shared_ptr<Env> env;
  std::shared_ptr<const dsl::Program> program;  // keeps `fn` alive
};

/// A catalog method bound to its receiver, e.g. the value of `$.setPosition`.
struct HostCallable {
  const CatalogEntry* entry = nullptr;
  Value receiver;
};

struct Binding {
  std::string name;
  Value value;
  bool isConst = false;
};

struct Env {
  std::shared_ptr<Env> parent;
  std::vector<Binding> vars;

  Binding* lookup(std::string_view name);
  Binding* lookupLocal(std::string_view name);
};

std::string_view typeName(const Value& v);
bool isTruthy(const Value& v);
/// Strict equality: primitives and vectors by value, player handles by id,
/// containers and functions by identity.
bool strictEquals(const Value& a, const Value& b);
/// Console rendering used by `$.log`.
std::string displayString(const Value& v);

}  // namespace magicitem::runtime
