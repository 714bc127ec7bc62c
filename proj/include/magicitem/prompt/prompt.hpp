#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "magicitem/runtime/catalog.hpp"

namespace magicitem::prompt {

inline constexpr std::string_view kDefinitionSlot = "{CLUSTER_SCRIPT_DEFINITION}";

/// The frozen template. assets/prompt_template.txt holds the same bytes.
inline constexpr std::string_view kPromptTemplate =
    "You are a talented programmer. Please write a new function using the following JavaScript "
    "interface definition.\n"
    "\n"
    "# Interface definition\n"
    "\n"
    "{CLUSTER_SCRIPT_DEFINITION}\n"
    "\n"
    "# Instructions\n"
    "\n"
    "Please write definitions for methods that are not in the interface definition.\n"
    "\n"
    "Please only output the source code enclosed in ```javascript and ```. Do not output anything "
    "other than code.";

/// Template bytes excluding the slot.
inline constexpr std::size_t kTemplateFixedLength = kPromptTemplate.size() - kDefinitionSlot.size();

inline constexpr std::string_view kDefaultModel = "gpt-4-turbo";

struct DefinitionText {
  std::string text;
  std::string digest;  // sha256 hex of text
};

/// Renders the API definition file: a short preamble, then per entry a doc
/// comment (prose + fenced sample) followed by one declaration line.
/// Throws std::invalid_argument for an empty catalog or an entry without a
/// sample.
DefinitionText renderDefinition(const runtime::ApiCatalog& catalog);

/// Declaration line for one entry, e.g. "$.setPosition(position: Vector3): void;".
std::string declarationLine(const runtime::CatalogEntry& entry);

struct PromptEnvelope {
  std::string systemText;
  std::string userText;
  std::string model = std::string(kDefaultModel);
  double temperature = 0;
};

/// Throws std::invalid_argument when the request is blank.
PromptEnvelope buildPrompt(const DefinitionText& definition, std::string_view request,
                           std::string_view model = kDefaultModel, double temperature = 0);

/// Substitutes the definition into an arbitrary template with exactly one slot.
std::string fillTemplate(std::string_view tmpl, std::string_view definition);

enum class ExtractionErrorKind { NoCodeBlock, UnterminatedFence };
std::string_view toString(ExtractionErrorKind kind);

class ExtractionError : public std::runtime_error {
 public:
  explicit ExtractionError(ExtractionErrorKind kind);
  ExtractionErrorKind kind() const { return kind_; }

 private:
  ExtractionErrorKind kind_;
};

/// Body of the first ```javascript, ```js or bare ``` block, with leading and
/// trailing blank lines removed. Throws ExtractionError.
std::string extractCode(std::string_view reply);

}  // namespace magicitem::prompt
