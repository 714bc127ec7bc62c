#include "magicitem/runtime/error.hpp"

#include <array>
#include <utility>

namespace magicitem::runtime {

namespace {
constexpr std::array<std::pair<ErrorClass, std::string_view>, 5> kNames = {{
    {ErrorClass::UnsupportedApi, "UnsupportedApi"},
    {ErrorClass::BudgetExceeded, "BudgetExceeded"},
    {ErrorClass::TypeMismatch, "TypeMismatch"},
    {ErrorClass::StateOverflow, "StateOverflow"},
    {ErrorClass::ArityMismatch, "ArityMismatch"},
}};
}  // namespace

std::string_view toString(ErrorClass c) {
  for (const auto& [cls, name] : kNames) {
    if (cls == c) return name;
  }
  return "?";
}

bool parseErrorClass(std::string_view text, ErrorClass& out) {
  for (const auto& [cls, name] : kNames) {
    if (name == text) {
      out = cls;
      return true;
    }
  }
  return false;
}

RuntimeError::RuntimeError(ErrorClass cls, std::string message, dsl::Span span,
                           std::string memberPath)
    : std::runtime_error(std::string(toString(cls)) + ": " + message),
      class_(cls),
      message_(std::move(message)),
      span_(span),
      memberPath_(std::move(memberPath)) {}

std::string RuntimeError::consoleLine() const {
  return std::string(toString(class_)) + " at " + std::to_string(span_.line) + ":" +
         std::to_string(span_.column) + ": " + message_;
}

}  // namespace magicitem::runtime
