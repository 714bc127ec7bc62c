#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "magicitem/dsl/ast.hpp"

namespace magicitem::runtime {

enum class ErrorClass {
  UnsupportedApi,
  BudgetExceeded,
  TypeMismatch,
  StateOverflow,
  ArityMismatch,
};

std::string_view toString(ErrorClass c);
bool parseErrorClass(std::string_view text, ErrorClass& out);

class RuntimeError : public std::runtime_error {
 public:
  RuntimeError(ErrorClass cls, std::string message, dsl::Span span = {}, std::string memberPath = {});

  ErrorClass errorClass() const { return class_; }
  const std::string& message() const { return message_; }
  const dsl::Span& span() const { return span_; }
  /// Offending name path; always set for UnsupportedApi.
  const std::string& memberPath() const { return memberPath_; }

  /// "UnsupportedApi at 1:1: $.setPostProcessing is not supported"
  std::string consoleLine() const;

 private:
  ErrorClass class_;
  std::string message_;
  dsl::Span span_;
  std::string memberPath_;
};

}  // namespace magicitem::runtime
