// Tree-walking evaluator for ItemScript.
//
// Each dispatch runs against a deep copy of the callback's captured
// environment and a freshly decoded `$.state`, so the only data that survives
// between dispatches is the re-encoded state blob and the callback table. A
// failed dispatch commits nothing.

#include <cmath>
#include <unordered_map>

#include "magicitem/common/format.hpp"
#include "magicitem/common/rng.hpp"
#include "magicitem/runtime/catalog.hpp"
#include "magicitem/runtime/instance.hpp"
#include "magicitem/runtime/state_codec.hpp"
#include "magicitem/runtime/value.hpp"

namespace magicitem::runtime {

using dsl::Expr;
using dsl::Span;
using dsl::Stmt;

std::string_view toString(EventKind kind) {
  switch (kind) {
    case EventKind::Start: return "start";
    case EventKind::Update: return "update";
    case EventKind::Interact: return "interact";
    case EventKind::Grab: return "grab";
    case EventKind::Release: return "release";
    case EventKind::Ride: return "ride";
    case EventKind::ExitRide: return "exitRide";
  }
  return "?";
}

std::string_view registrationName(EventKind kind) {
  switch (kind) {
    case EventKind::Start: return "onStart";
    case EventKind::Update: return "onUpdate";
    case EventKind::Interact: return "onInteract";
    case EventKind::Grab: return "onGrab";
    case EventKind::Release: return "onRelease";
    case EventKind::Ride: return "onRide";
    case EventKind::ExitRide: return "onExitRide";
  }
  return "?";
}

ScriptInstance::ScriptInstance(std::shared_ptr<const dsl::Program> program, BudgetConfig budget)
    : program_(std::move(program)), budget_(budget) {}

ScriptInstance::~ScriptInstance() = default;

bool ScriptInstance::hasCallback(EventKind kind) const {
  return callbacks_[static_cast<std::size_t>(kind)] != nullptr;
}

std::size_t ScriptInstance::callbackCount() const {
  std::size_t n = 0;
  for (const auto& cb : callbacks_) {
    n += cb != nullptr;
  }
  return n;
}

void ScriptInstance::appendConsole(const std::vector<std::string>& lines) {
  for (const auto& line : lines) {
    console_.push_back(line);
    while (console_.size() > budget_.maxConsoleLines) {
      console_.pop_front();
    }
  }
}

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using EnvPtr = std::shared_ptr<Env>;

struct Completion {
  bool returned = false;
  Value value;
};

// Deep copy of everything reachable from a closure, preserving sharing and
// cycles within the copied graph.
class GraphCloner {
 public:
  explicit GraphCloner(std::size_t maxDepth) : maxDepth_(maxDepth) {}

  std::shared_ptr<Closure> closure(const std::shared_ptr<Closure>& c, std::size_t depth = 0) {
    if (auto it = memo_.find(c.get()); it != memo_.end()) {
      return std::static_pointer_cast<Closure>(it->second);
    }
    auto copy = std::make_shared<Closure>();
    memo_[c.get()] = copy;
    copy->fn = c->fn;
    copy->program = c->program;
    copy->env = env(c->env, depth + 1);
    return copy;
  }

 private:
  void guard(std::size_t depth) {
    if (depth > maxDepth_) {
      throw RuntimeError(ErrorClass::BudgetExceeded,
                         "captured data is nested too deeply to carry into a callback");
    }
  }

  EnvPtr env(const EnvPtr& e, std::size_t depth) {
    if (!e) {
      return nullptr;
    }
    guard(depth);
    if (auto it = memo_.find(e.get()); it != memo_.end()) {
      return std::static_pointer_cast<Env>(it->second);
    }
    auto copy = std::make_shared<Env>();
    memo_[e.get()] = copy;
    copy->parent = env(e->parent, depth + 1);
    copy->vars.reserve(e->vars.size());
    for (const auto& b : e->vars) {
      copy->vars.push_back(Binding{b.name, value(b.value, depth + 1), b.isConst});
    }
    return copy;
  }

  Value value(const Value& v, std::size_t depth) {
    guard(depth);
    return std::visit(
        Overloaded{
            [&](const std::shared_ptr<Array>& a) -> Value {
              if (auto it = memo_.find(a.get()); it != memo_.end()) {
                return std::static_pointer_cast<Array>(it->second);
              }
              auto copy = std::make_shared<Array>();
              memo_[a.get()] = copy;
              copy->items.reserve(a->items.size());
              for (const auto& item : a->items) {
                copy->items.push_back(value(item, depth + 1));
              }
              return copy;
            },
            [&](const std::shared_ptr<Object>& o) -> Value {
              if (auto it = memo_.find(o.get()); it != memo_.end()) {
                return std::static_pointer_cast<Object>(it->second);
              }
              auto copy = std::make_shared<Object>();
              memo_[o.get()] = copy;
              for (const auto& [k, item] : o->entries) {
                copy->entries.emplace_back(k, value(item, depth + 1));
              }
              return copy;
            },
            [&](const std::shared_ptr<VectorBox>& b) -> Value {
              if (auto it = memo_.find(b.get()); it != memo_.end()) {
                return std::static_pointer_cast<VectorBox>(it->second);
              }
              auto copy = std::make_shared<VectorBox>(*b);
              memo_[b.get()] = copy;
              return copy;
            },
            [&](const std::shared_ptr<Closure>& c) -> Value { return closure(c, depth + 1); },
            [&](const std::shared_ptr<HostCallable>& h) -> Value {
              return std::make_shared<HostCallable>(
                  HostCallable{h->entry, value(h->receiver, depth + 1)});
            },
            [&](const auto& primitive) -> Value { return primitive; },
        },
        v);
  }

  std::size_t maxDepth_;
  std::unordered_map<const void*, std::shared_ptr<void>> memo_;
};

}  // namespace

class Interpreter {
 public:
  Interpreter(ScriptInstance& instance, const WorldView& view)
      : inst_(instance),
        budget_(instance.budget_),
        view_(view),
        catalog_(defaultCatalog()),
        callbacks_(instance.callbacks_),
        replaced_(instance.replaced_) {
    rng_.state = view.rngState;
  }

  void loadState(std::string_view blob) { state_ = decodeState(blob); }

  void runTopLevel() {
    auto global = std::make_shared<Env>();
    for (const auto& stmt : inst_.program_->statements) {
      if (exec(*stmt, global).returned) {
        break;
      }
    }
  }

  void runCallback(const std::shared_ptr<Closure>& registered, const Event& event) {
    GraphCloner cloner(budget_.maxEvalDepth);
    auto fn = cloner.closure(registered);
    std::vector<Value> args;
    switch (event.kind) {
      case EventKind::Start: break;
      case EventKind::Update: args.emplace_back(event.dt); break;
      default: args.emplace_back(PlayerHandle{event.player}); break;
    }
    Span span{};
    span.line = 1;
    span.column = 1;
    callClosure(fn, std::move(args), span);
  }

  // Commits callbacks and state into the instance. Throws if the state does
  // not encode, in which case nothing is committed.
  void commit() {
    std::string blob = encodeState(*state_);
    inst_.stateBlob_ = std::move(blob);
    inst_.callbacks_ = callbacks_;
    inst_.replaced_ = replaced_;
  }

  std::vector<Effect> effects;
  std::vector<std::string> console;
  SplitMix64 rng_;

 private:
  struct DepthGuard {
    DepthGuard(Interpreter& in, const Span& span) : in_(in) {
      if (++in_.evalDepth_ > in_.budget_.maxEvalDepth) {
        throw RuntimeError(ErrorClass::BudgetExceeded, "evaluation nested too deeply", span);
      }
    }
    ~DepthGuard() { --in_.evalDepth_; }
    Interpreter& in_;
  };

  void tick(const Span& span) {
    if (++nodes_ > budget_.maxNodes) {
      throw RuntimeError(ErrorClass::BudgetExceeded,
                         "instruction budget of " + std::to_string(budget_.maxNodes) +
                             " evaluated nodes exceeded",
                         span);
    }
  }

  [[noreturn]] void unsupported(const std::string& path, const Span& span) {
    throw RuntimeError(ErrorClass::UnsupportedApi, path + " is not supported by ItemScript", span,
                       path);
  }

  [[noreturn]] void typeMismatch(const std::string& message, const Span& span) {
    throw RuntimeError(ErrorClass::TypeMismatch, message, span);
  }

  // ---- statements -------------------------------------------------------

  Completion exec(const Stmt& stmt, const EnvPtr& env) {
    tick(stmt.span);
    DepthGuard guard(*this, stmt.span);
    return std::visit(
        Overloaded{
            [&](const dsl::VarDecl& n) -> Completion {
              Value v = n.init ? eval(*n.init, env) : Value{Null{}};
              if (env->lookupLocal(n.name)) {
                typeMismatch("'" + n.name + "' is already declared in this scope", stmt.span);
              }
              env->vars.push_back(Binding{n.name, std::move(v), n.isConst});
              return {};
            },
            [&](const dsl::ExprStmt& n) -> Completion {
              eval(*n.expr, env);
              return {};
            },
            [&](const dsl::IfStmt& n) -> Completion {
              if (isTruthy(eval(*n.test, env))) {
                return exec(*n.consequent, env);
              }
              if (n.alternate) {
                return exec(*n.alternate, env);
              }
              return {};
            },
            [&](const dsl::WhileStmt& n) -> Completion {
              while (isTruthy(eval(*n.test, env))) {
                auto c = exec(*n.body, env);
                if (c.returned) return c;
              }
              return {};
            },
            [&](const dsl::ForStmt& n) -> Completion {
              auto loopEnv = std::make_shared<Env>();
              loopEnv->parent = env;
              if (n.init) {
                exec(*n.init, loopEnv);
              }
              while (!n.test || isTruthy(eval(*n.test, loopEnv))) {
                auto c = exec(*n.body, loopEnv);
                if (c.returned) return c;
                if (n.update) {
                  eval(*n.update, loopEnv);
                } else {
                  tick(stmt.span);  // `for (;;) {}` still consumes budget
                }
              }
              return {};
            },
            [&](const dsl::BlockStmt& n) -> Completion {
              auto inner = std::make_shared<Env>();
              inner->parent = env;
              for (const auto& s : n.body) {
                auto c = exec(*s, inner);
                if (c.returned) return c;
              }
              return {};
            },
            [&](const dsl::ReturnStmt& n) -> Completion {
              Completion c;
              c.returned = true;
              c.value = n.value ? eval(*n.value, env) : Value{Null{}};
              return c;
            },
        },
        stmt.node);
  }

  // ---- expressions ------------------------------------------------------

  Value eval(const Expr& e, const EnvPtr& env) {
    tick(e.span);
    DepthGuard guard(*this, e.span);
    return std::visit(
        Overloaded{
            [&](const dsl::NumberLit& n) -> Value { return n.value; },
            [&](const dsl::StringLit& n) -> Value { return n.value; },
            [&](const dsl::BoolLit& n) -> Value { return n.value; },
            [&](const dsl::NullLit&) -> Value { return Null{}; },
            [&](const dsl::ArrayLit& n) -> Value {
              auto arr = std::make_shared<Array>();
              arr->items.reserve(n.elements.size());
              for (const auto& el : n.elements) {
                arr->items.push_back(eval(*el, env));
              }
              return arr;
            },
            [&](const dsl::ObjectLit& n) -> Value {
              auto obj = std::make_shared<Object>();
              for (const auto& [key, value] : n.properties) {
                obj->set(key, eval(*value, env));
              }
              return obj;
            },
            [&](const dsl::Identifier& n) -> Value { return lookupName(n.name, env, e.span); },
            [&](const dsl::MemberExpr& n) -> Value {
              return getMember(eval(*n.object, env), n.property, e.span);
            },
            [&](const dsl::IndexExpr& n) -> Value {
              Value obj = eval(*n.object, env);
              Value idx = eval(*n.index, env);
              return getIndex(obj, idx, e.span);
            },
            [&](const dsl::CallExpr& n) -> Value {
              Value callee = eval(*n.callee, env);
              std::vector<Value> args;
              args.reserve(n.args.size());
              for (const auto& a : n.args) {
                args.push_back(eval(*a, env));
              }
              return call(callee, std::move(args), e.span);
            },
            [&](const dsl::UnaryExpr& n) -> Value {
              Value v = eval(*n.operand, env);
              if (n.op == dsl::UnaryOp::Not) {
                return !isTruthy(v);
              }
              auto* d = std::get_if<double>(&v);
              if (!d) {
                typeMismatch("cannot negate a " + std::string(typeName(v)), e.span);
              }
              return -*d;
            },
            [&](const dsl::BinaryExpr& n) -> Value {
              if (n.op == dsl::BinaryOp::And) {
                Value l = eval(*n.lhs, env);
                return isTruthy(l) ? eval(*n.rhs, env) : l;
              }
              if (n.op == dsl::BinaryOp::Or) {
                Value l = eval(*n.lhs, env);
                return isTruthy(l) ? l : eval(*n.rhs, env);
              }
              Value l = eval(*n.lhs, env);
              Value r = eval(*n.rhs, env);
              return binary(n.op, l, r, e.span);
            },
            [&](const dsl::AssignExpr& n) -> Value { return assign(n, env, e.span); },
            [&](const dsl::ConditionalExpr& n) -> Value {
              return isTruthy(eval(*n.test, env)) ? eval(*n.consequent, env)
                                                  : eval(*n.alternate, env);
            },
            [&](const dsl::ArrowFunction& n) -> Value {
              auto c = std::make_shared<Closure>();
              c->fn = &n;
              c->env = env;
              c->program = inst_.program_;
              return c;
            },
        },
        e.node);
  }

  Value lookupName(const std::string& name, const EnvPtr& env, const Span& span) {
    if (auto* b = env->lookup(name)) {
      return b->value;
    }
    if (name == "$") {
      return ItemHandle{};
    }
    if (name == "Math") {
      return MathNamespace{};
    }
    if (name == kVectorType) {
      return std::make_shared<HostCallable>(HostCallable{catalog_.find(kVectorType), Null{}});
    }
    unsupported(name, span);
  }

  static std::string receiverType(const Value& v) {
    if (auto* h = std::get_if<std::shared_ptr<HostCallable>>(&v)) {
      return (*h)->entry->path;
    }
    return std::string(typeName(v));
  }

  const CatalogEntry* catalogMember(std::string_view type, const std::string& name) {
    std::string path(type);
    path += '.';
    path += name;
    return catalog_.find(path);
  }

  Value getMember(const Value& obj, const std::string& name, const Span& span) {
    if (auto* o = std::get_if<std::shared_ptr<Object>>(&obj)) {
      const Value* v = (*o)->find(name);
      return v ? *v : Value{Null{}};
    }
    if (std::holds_alternative<Null>(obj)) {
      typeMismatch("cannot read property '" + name + "' of null", span);
    }
    std::string_view type;
    if (std::holds_alternative<ItemHandle>(obj)) {
      type = kItemType;
    } else if (std::holds_alternative<PlayerHandle>(obj)) {
      type = kPlayerType;
    } else if (std::holds_alternative<std::shared_ptr<VectorBox>>(obj)) {
      type = kVectorType;
    } else if (std::holds_alternative<MathNamespace>(obj)) {
      type = kMathType;
    } else {
      unsupported(receiverType(obj) + "." + name, span);
    }
    const CatalogEntry* entry = catalogMember(type, name);
    if (!entry) {
      unsupported(std::string(type) + "." + name, span);
    }
    switch (entry->fn) {
      case HostFn::ItemState: return state_;
      case HostFn::VectorX: return std::get<std::shared_ptr<VectorBox>>(obj)->v.x;
      case HostFn::VectorY: return std::get<std::shared_ptr<VectorBox>>(obj)->v.y;
      case HostFn::VectorZ: return std::get<std::shared_ptr<VectorBox>>(obj)->v.z;
      case HostFn::MathPI: return M_PI;
      default: return std::make_shared<HostCallable>(HostCallable{entry, obj});
    }
  }

  void setMember(const Value& obj, const std::string& name, Value value, const Span& span) {
    if (auto* o = std::get_if<std::shared_ptr<Object>>(&obj)) {
      (*o)->set(name, std::move(value));
      return;
    }
    if (std::holds_alternative<Null>(obj)) {
      typeMismatch("cannot set property '" + name + "' of null", span);
    }
    std::string_view type;
    if (std::holds_alternative<ItemHandle>(obj)) {
      type = kItemType;
    } else if (std::holds_alternative<PlayerHandle>(obj)) {
      type = kPlayerType;
    } else if (std::holds_alternative<std::shared_ptr<VectorBox>>(obj)) {
      type = kVectorType;
    } else if (std::holds_alternative<MathNamespace>(obj)) {
      type = kMathType;
    } else {
      unsupported(receiverType(obj) + "." + name, span);
    }
    const CatalogEntry* entry = catalogMember(type, name);
    if (!entry) {
      unsupported(std::string(type) + "." + name, span);
    }
    switch (entry->fn) {
      case HostFn::ItemState: {
        auto* newState = std::get_if<std::shared_ptr<Object>>(&value);
        if (!newState) {
          typeMismatch("$.state must be an object", span);
        }
        state_ = *newState;
        return;
      }
      case HostFn::VectorX:
      case HostFn::VectorY:
      case HostFn::VectorZ: {
        auto* d = std::get_if<double>(&value);
        if (!d) {
          typeMismatch(entry->path + " must be a number", span);
        }
        auto& v = std::get<std::shared_ptr<VectorBox>>(obj)->v;
        (entry->fn == HostFn::VectorX ? v.x : entry->fn == HostFn::VectorY ? v.y : v.z) = *d;
        return;
      }
      default: typeMismatch(entry->path + " is read-only", span);
    }
  }

  static bool arrayIndex(const Value& idx, std::size_t& out) {
    auto* d = std::get_if<double>(&idx);
    if (!d || *d < 0 || *d != std::floor(*d) || *d > 1e9) {
      return false;
    }
    out = static_cast<std::size_t>(*d);
    return true;
  }

  static bool objectKey(const Value& idx, std::string& out) {
    if (auto* s = std::get_if<std::string>(&idx)) {
      out = *s;
      return true;
    }
    if (auto* d = std::get_if<double>(&idx)) {
      out = formatNumber(*d);
      return true;
    }
    return false;
  }

  Value getIndex(const Value& obj, const Value& idx, const Span& span) {
    if (auto* a = std::get_if<std::shared_ptr<Array>>(&obj)) {
      std::size_t i = 0;
      if (!arrayIndex(idx, i)) {
        typeMismatch("array index must be a non-negative integer", span);
      }
      return i < (*a)->items.size() ? (*a)->items[i] : Value{Null{}};
    }
    if (auto* o = std::get_if<std::shared_ptr<Object>>(&obj)) {
      std::string key;
      if (!objectKey(idx, key)) {
        typeMismatch("object key must be a string", span);
      }
      const Value* v = (*o)->find(key);
      return v ? *v : Value{Null{}};
    }
    if (auto* s = std::get_if<std::string>(&idx);
        s && (std::holds_alternative<ItemHandle>(obj) || std::holds_alternative<PlayerHandle>(obj) ||
              std::holds_alternative<std::shared_ptr<VectorBox>>(obj) ||
              std::holds_alternative<MathNamespace>(obj))) {
      return getMember(obj, *s, span);
    }
    typeMismatch("cannot index a " + std::string(typeName(obj)), span);
  }

  void setIndex(const Value& obj, const Value& idx, Value value, const Span& span) {
    if (auto* a = std::get_if<std::shared_ptr<Array>>(&obj)) {
      std::size_t i = 0;
      if (!arrayIndex(idx, i) || i > (*a)->items.size()) {
        typeMismatch("array index out of range (arrays grow one element at a time)", span);
      }
      if (i == (*a)->items.size()) {
        (*a)->items.push_back(std::move(value));
      } else {
        (*a)->items[i] = std::move(value);
      }
      return;
    }
    if (auto* o = std::get_if<std::shared_ptr<Object>>(&obj)) {
      std::string key;
      if (!objectKey(idx, key)) {
        typeMismatch("object key must be a string", span);
      }
      (*o)->set(key, std::move(value));
      return;
    }
    if (auto* s = std::get_if<std::string>(&idx)) {
      setMember(obj, *s, std::move(value), span);
      return;
    }
    typeMismatch("cannot index a " + std::string(typeName(obj)), span);
  }

  Value binary(dsl::BinaryOp op, const Value& l, const Value& r, const Span& span) {
    using dsl::BinaryOp;
    if (op == BinaryOp::Eq) return strictEquals(l, r);
    if (op == BinaryOp::Ne) return !strictEquals(l, r);

    const auto* ln = std::get_if<double>(&l);
    const auto* rn = std::get_if<double>(&r);
    if (ln && rn) {
      switch (op) {
        case BinaryOp::Add: return *ln + *rn;
        case BinaryOp::Sub: return *ln - *rn;
        case BinaryOp::Mul: return *ln * *rn;
        case BinaryOp::Div: return *ln / *rn;
        case BinaryOp::Mod: return std::fmod(*ln, *rn);
        case BinaryOp::Lt: return *ln < *rn;
        case BinaryOp::Le: return *ln <= *rn;
        case BinaryOp::Gt: return *ln > *rn;
        case BinaryOp::Ge: return *ln >= *rn;
        default: break;
      }
    }
    const auto* ls = std::get_if<std::string>(&l);
    const auto* rs = std::get_if<std::string>(&r);
    if (ls && rs) {
      switch (op) {
        case BinaryOp::Add: {
          if (ls->size() + rs->size() > budget_.maxStringBytes) {
            throw RuntimeError(ErrorClass::BudgetExceeded,
                               "string longer than " + std::to_string(budget_.maxStringBytes) +
                                   " bytes",
                               span);
          }
          return *ls + *rs;
        }
        case BinaryOp::Lt: return *ls < *rs;
        case BinaryOp::Le: return *ls <= *rs;
        case BinaryOp::Gt: return *ls > *rs;
        case BinaryOp::Ge: return *ls >= *rs;
        default: break;
      }
    }
    typeMismatch("operator " + std::string(dsl::toString(op)) + " cannot combine " +
                     std::string(typeName(l)) + " and " + std::string(typeName(r)),
                 span);
  }

  static dsl::BinaryOp compoundOp(dsl::AssignOp op) {
    switch (op) {
      case dsl::AssignOp::AddAssign: return dsl::BinaryOp::Add;
      case dsl::AssignOp::SubAssign: return dsl::BinaryOp::Sub;
      case dsl::AssignOp::MulAssign: return dsl::BinaryOp::Mul;
      default: return dsl::BinaryOp::Div;
    }
  }

  Value assign(const dsl::AssignExpr& n, const EnvPtr& env, const Span& span) {
    const bool compound = n.op != dsl::AssignOp::Assign;
    if (auto* id = std::get_if<dsl::Identifier>(&n.target->node)) {
      Binding* b = env->lookup(id->name);
      if (!b) {
        unsupported(id->name, n.target->span);
      }
      if (b->isConst) {
        typeMismatch("cannot assign to constant '" + id->name + "'", span);
      }
      Value rhs = eval(*n.value, env);
      b = env->lookup(id->name);  // evaluation may have declared in a closure, re-resolve
      Value result = compound ? binary(compoundOp(n.op), b->value, rhs, span) : std::move(rhs);
      b->value = result;
      return result;
    }
    if (auto* m = std::get_if<dsl::MemberExpr>(&n.target->node)) {
      Value obj = eval(*m->object, env);
      Value rhs = eval(*n.value, env);
      Value result = compound ? binary(compoundOp(n.op), getMember(obj, m->property, span), rhs, span)
                              : std::move(rhs);
      setMember(obj, m->property, result, span);
      return result;
    }
    auto& ix = std::get<dsl::IndexExpr>(n.target->node);
    Value obj = eval(*ix.object, env);
    Value idx = eval(*ix.index, env);
    Value rhs = eval(*n.value, env);
    Value result =
        compound ? binary(compoundOp(n.op), getIndex(obj, idx, span), rhs, span) : std::move(rhs);
    setIndex(obj, idx, result, span);
    return result;
  }

  Value call(const Value& callee, std::vector<Value> args, const Span& span) {
    if (auto* c = std::get_if<std::shared_ptr<Closure>>(&callee)) {
      return callClosure(*c, std::move(args), span);
    }
    if (auto* h = std::get_if<std::shared_ptr<HostCallable>>(&callee)) {
      return callHost(**h, args, span);
    }
    typeMismatch(std::string(typeName(callee)) + " is not a function", span);
  }

  Value callClosure(const std::shared_ptr<Closure>& fn, std::vector<Value> args, const Span& span) {
    if (callDepth_ >= budget_.maxCallDepth) {
      throw RuntimeError(ErrorClass::BudgetExceeded,
                         "call depth exceeds " + std::to_string(budget_.maxCallDepth), span);
    }
    ++callDepth_;
    struct Unwind {
      std::size_t& depth;
      ~Unwind() { --depth; }
    } unwind{callDepth_};

    auto frame = std::make_shared<Env>();
    frame->parent = fn->env;
    for (std::size_t i = 0; i < fn->fn->params.size(); ++i) {
      frame->vars.push_back(
          Binding{fn->fn->params[i], i < args.size() ? std::move(args[i]) : Value{Null{}}, false});
    }
    if (fn->fn->exprBody) {
      return eval(*fn->fn->exprBody, frame);
    }
    for (const auto& s : fn->fn->blockBody) {
      auto c = exec(*s, frame);
      if (c.returned) {
        return c.value;
      }
    }
    return Null{};
  }

  // ---- host API ---------------------------------------------------------

  void arity(const CatalogEntry& e, const std::vector<Value>& args, std::size_t n,
             const Span& span) {
    if (args.size() != n) {
      throw RuntimeError(ErrorClass::ArityMismatch,
                         e.path + " expects " + std::to_string(n) + " argument" +
                             (n == 1 ? "" : "s") + " but got " + std::to_string(args.size()),
                         span);
    }
  }

  double number(const CatalogEntry& e, const Value& v, const Span& span) {
    auto* d = std::get_if<double>(&v);
    if (!d) {
      typeMismatch(e.path + " expects a number, got " + std::string(typeName(v)), span);
    }
    return *d;
  }

  double finiteNumber(const CatalogEntry& e, const Value& v, const Span& span) {
    double d = number(e, v, span);
    if (!std::isfinite(d)) {
      typeMismatch(e.path + " received a non-finite number", span);
    }
    return d;
  }

  double rate(const CatalogEntry& e, const Value& v, const Span& span) {
    double d = finiteNumber(e, v, span);
    if (d < 0) {
      typeMismatch(e.path + " requires a rate of 0 or more", span);
    }
    return d;
  }

  Vec3 vector(const CatalogEntry& e, const Value& v, const Span& span) {
    auto* b = std::get_if<std::shared_ptr<VectorBox>>(&v);
    if (!b) {
      typeMismatch(e.path + " expects a Vector3, got " + std::string(typeName(v)), span);
    }
    return (*b)->v;
  }

  Vec3 finiteVector(const CatalogEntry& e, const Value& v, const Span& span) {
    Vec3 out = vector(e, v, span);
    if (!out.finite()) {
      typeMismatch(e.path + " received a non-finite vector", span);
    }
    return out;
  }

  static Value box(Vec3 v) { return std::make_shared<VectorBox>(VectorBox{v}); }

  const PlayerView& player(const CatalogEntry& e, int id, const Span& span) {
    auto it = view_.players.find(id);
    if (it == view_.players.end()) {
      typeMismatch(e.path + ": player " + std::to_string(id) + " is not in the world", span);
    }
    return it->second;
  }

  void registerCallback(EventKind kind, const CatalogEntry& e, const std::vector<Value>& args,
                        const Span& span) {
    arity(e, args, 1, span);
    auto* fn = std::get_if<std::shared_ptr<Closure>>(&args[0]);
    if (!fn) {
      typeMismatch(e.path + " expects a function, got " + std::string(typeName(args[0])), span);
    }
    auto& slot = callbacks_[static_cast<std::size_t>(kind)];
    if (slot) {
      ++replaced_;
      console.push_back("warning: callback replaced: " + e.path);
    }
    slot = *fn;
  }

  Value callHost(const HostCallable& h, const std::vector<Value>& args, const Span& span) {
    const CatalogEntry& e = *h.entry;
    const int playerId = std::holds_alternative<PlayerHandle>(h.receiver)
                             ? std::get<PlayerHandle>(h.receiver).id
                             : 0;
    switch (e.fn) {
      case HostFn::OnStart: registerCallback(EventKind::Start, e, args, span); return Null{};
      case HostFn::OnUpdate: registerCallback(EventKind::Update, e, args, span); return Null{};
      case HostFn::OnInteract: registerCallback(EventKind::Interact, e, args, span); return Null{};
      case HostFn::OnGrab: registerCallback(EventKind::Grab, e, args, span); return Null{};
      case HostFn::OnRelease: registerCallback(EventKind::Release, e, args, span); return Null{};
      case HostFn::OnRide: registerCallback(EventKind::Ride, e, args, span); return Null{};
      case HostFn::OnExitRide: registerCallback(EventKind::ExitRide, e, args, span); return Null{};

      case HostFn::ItemGetPosition: arity(e, args, 0, span); return box(view_.position);
      case HostFn::ItemGetRotation: arity(e, args, 0, span); return box(view_.rotation);
      case HostFn::ItemGetVelocity: arity(e, args, 0, span); return box(view_.velocity);
      case HostFn::ItemSetPosition:
        arity(e, args, 1, span);
        effects.emplace_back(SetItemPosition{finiteVector(e, args[0], span)});
        return Null{};
      case HostFn::ItemSetRotation:
        arity(e, args, 1, span);
        effects.emplace_back(SetItemRotation{finiteVector(e, args[0], span)});
        return Null{};
      case HostFn::ItemSetVelocity:
        arity(e, args, 1, span);
        effects.emplace_back(SetItemVelocity{finiteVector(e, args[0], span)});
        return Null{};
      case HostFn::ItemAddImpulse:
        arity(e, args, 1, span);
        effects.emplace_back(AddItemImpulse{finiteVector(e, args[0], span)});
        return Null{};
      case HostFn::ItemSetUseGravity: {
        arity(e, args, 1, span);
        auto* b = std::get_if<bool>(&args[0]);
        if (!b) {
          typeMismatch(e.path + " expects a boolean, got " + std::string(typeName(args[0])), span);
        }
        effects.emplace_back(SetItemUseGravity{*b});
        return Null{};
      }
      case HostFn::ItemSetGravityScale:
        arity(e, args, 1, span);
        effects.emplace_back(SetItemGravityScale{finiteNumber(e, args[0], span)});
        return Null{};
      case HostFn::ItemLog: {
        arity(e, args, 1, span);
        std::string text = displayString(args[0]);
        if (text.size() > budget_.maxStringBytes) {
          text.resize(budget_.maxStringBytes);
        }
        console.push_back(text);
        effects.emplace_back(Log{std::move(text)});
        return Null{};
      }

      case HostFn::PlayerGetPosition:
        arity(e, args, 0, span);
        return box(player(e, playerId, span).position);
      case HostFn::PlayerSetPosition:
        arity(e, args, 1, span);
        player(e, playerId, span);
        effects.emplace_back(SetPlayerPosition{playerId, finiteVector(e, args[0], span)});
        return Null{};
      case HostFn::PlayerSetJumpSpeedRate:
        arity(e, args, 1, span);
        player(e, playerId, span);
        effects.emplace_back(SetPlayerJumpSpeedRate{playerId, rate(e, args[0], span)});
        return Null{};
      case HostFn::PlayerSetMoveSpeedRate:
        arity(e, args, 1, span);
        player(e, playerId, span);
        effects.emplace_back(SetPlayerMoveSpeedRate{playerId, rate(e, args[0], span)});
        return Null{};
      case HostFn::PlayerSetGravityRate:
        arity(e, args, 1, span);
        player(e, playerId, span);
        effects.emplace_back(SetPlayerGravityRate{playerId, rate(e, args[0], span)});
        return Null{};
      case HostFn::PlayerRespawn:
        arity(e, args, 0, span);
        player(e, playerId, span);
        effects.emplace_back(RespawnPlayer{playerId});
        return Null{};

      case HostFn::Vector3Ctor:
        arity(e, args, 3, span);
        return box(Vec3{number(e, args[0], span), number(e, args[1], span),
                        number(e, args[2], span)});
      case HostFn::VectorAdd: {
        arity(e, args, 1, span);
        Vec3 self = std::get<std::shared_ptr<VectorBox>>(h.receiver)->v;
        return box(self + vector(e, args[0], span));
      }
      case HostFn::VectorSub: {
        arity(e, args, 1, span);
        Vec3 self = std::get<std::shared_ptr<VectorBox>>(h.receiver)->v;
        return box(self - vector(e, args[0], span));
      }
      case HostFn::VectorScale: {
        arity(e, args, 1, span);
        Vec3 self = std::get<std::shared_ptr<VectorBox>>(h.receiver)->v;
        return box(self * number(e, args[0], span));
      }
      case HostFn::VectorLength:
        arity(e, args, 0, span);
        return std::get<std::shared_ptr<VectorBox>>(h.receiver)->v.length();

      case HostFn::MathSin: arity(e, args, 1, span); return std::sin(number(e, args[0], span));
      case HostFn::MathCos: arity(e, args, 1, span); return std::cos(number(e, args[0], span));
      case HostFn::MathAbs: arity(e, args, 1, span); return std::fabs(number(e, args[0], span));
      case HostFn::MathSqrt: arity(e, args, 1, span); return std::sqrt(number(e, args[0], span));
      case HostFn::MathFloor: arity(e, args, 1, span); return std::floor(number(e, args[0], span));
      case HostFn::MathMin:
      case HostFn::MathMax: {
        const bool isMin = e.fn == HostFn::MathMin;
        double acc = isMin ? HUGE_VAL : -HUGE_VAL;
        for (const auto& a : args) {
          double d = number(e, a, span);
          if (std::isnan(d)) return d;
          acc = isMin ? std::min(acc, d) : std::max(acc, d);
        }
        return acc;
      }
      case HostFn::MathRandom: arity(e, args, 0, span); return rng_.nextUnit();

      case HostFn::ItemState:
      case HostFn::VectorX:
      case HostFn::VectorY:
      case HostFn::VectorZ:
      case HostFn::MathPI: break;
    }
    typeMismatch(e.path + " is not a function", span);
  }

  ScriptInstance& inst_;
  const BudgetConfig& budget_;
  const WorldView& view_;
  const ApiCatalog& catalog_;
  std::array<std::shared_ptr<Closure>, kEventKindCount> callbacks_;
  std::size_t replaced_;
  std::shared_ptr<Object> state_ = std::make_shared<Object>();
  std::size_t nodes_ = 0;
  std::size_t evalDepth_ = 0;
  std::size_t callDepth_ = 0;
};

struct InstanceAccess {
  static void setState(ScriptInstance& instance, std::string blob) {
    instance.stateBlob_ = std::move(blob);
  }
};

InstantiateResult instantiate(std::shared_ptr<const dsl::Program> program,
                              const BudgetConfig& limits, const WorldView& view) {
  InstantiateResult result;
  result.rngState = view.rngState;
  auto instance = std::make_unique<ScriptInstance>(std::move(program), limits);
  Interpreter in(*instance, view);
  try {
    in.runTopLevel();
    in.commit();
    result.effects = std::move(in.effects);
    result.rngState = in.rng_.state;
  } catch (const RuntimeError& e) {
    result.error = e;
  }
  result.console = std::move(in.console);
  if (result.error) {
    result.console.push_back(result.error->consoleLine());
    return result;
  }
  instance->appendConsole(result.console);
  result.instance = std::move(instance);
  return result;
}

DispatchResult dispatch(ScriptInstance& instance, const Event& event, const WorldView& view) {
  DispatchResult result;
  result.rngState = view.rngState;
  auto registered = instance.callbacks_[static_cast<std::size_t>(event.kind)];
  if (!registered) {
    return result;
  }
  Interpreter in(instance, view);
  try {
    in.loadState(instance.stateBlob_);
    in.runCallback(registered, event);
    in.commit();
    result.effects = std::move(in.effects);
    result.rngState = in.rng_.state;
  } catch (const RuntimeError& e) {
    result.error = e;
  }
  result.console = std::move(in.console);
  if (result.error) {
    result.console.push_back(result.error->consoleLine());
  }
  instance.appendConsole(result.console);
  return result;
}

std::string snapshotState(const ScriptInstance& instance) { return instance.stateBlob(); }

void restoreState(ScriptInstance& instance, std::string_view blob) {
  if (blob.size() > kMaxStateBytes) {
    throw RuntimeError(ErrorClass::StateOverflow, "state blob is " + std::to_string(blob.size()) +
                                                      " bytes; the limit is " +
                                                      std::to_string(kMaxStateBytes));
  }
  auto decoded = decodeState(blob);
  // Re-encode so the stored blob is canonical.
  InstanceAccess::setState(instance, encodeState(*decoded));
}

}  // namespace magicitem::runtime
