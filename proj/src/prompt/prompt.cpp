#include "magicitem/prompt/prompt.hpp"

#include <vector>

#include "magicitem/common/digest.hpp"

namespace magicitem::prompt {

namespace {

constexpr std::string_view kPreamble =
    "// ItemScript interface definition.\n"
    "//\n"
    "// A script is attached to one item and talks to it through `$`. Scripts use a\n"
    "// JavaScript subset: let/const, arrow functions, if/else, while, for(;;),\n"
    "// return, arrays, object literals, and the operators + - * / % == != < <= > >=\n"
    "// && || ! ?: = += -= *= /=. There are no classes, `new`, `function`, `this`,\n"
    "// exceptions, or modules. Only the members declared below exist; anything\n"
    "// else raises UnsupportedApi.\n"
    "//\n"
    "// Top-level variables are re-initialized before every callback. Keep values\n"
    "// that must persist in `$.state`.\n";

void appendCommentLines(std::string& out, std::string_view text) {
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    out += line.empty() ? " *\n" : " * " + std::string(line) + "\n";
    start = end + 1;
  }
}

bool isBlank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::string_view trimWs(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Returns the info string if `line` is a fence line (up to three leading
// spaces, then at least three backticks).
bool fenceInfo(std::string_view line, std::string_view& info) {
  std::size_t i = 0;
  while (i < line.size() && i < 3 && line[i] == ' ') ++i;
  if (line.substr(i, 3) != "```") return false;
  i += 3;
  while (i < line.size() && line[i] == '`') ++i;
  info = trimWs(line.substr(i));
  return true;
}

}  // namespace

std::string declarationLine(const runtime::CatalogEntry& e) {
  switch (e.kind) {
    case runtime::EntryKind::Property: return e.path + ": " + e.returns + ";";
    case runtime::EntryKind::Constructor:
    case runtime::EntryKind::Method: return e.path + "(" + e.params + "): " + e.returns + ";";
  }
  return e.path + ";";
}

DefinitionText renderDefinition(const runtime::ApiCatalog& catalog) {
  if (catalog.entries.empty()) {
    throw std::invalid_argument("cannot render an empty catalog");
  }
  std::string out(kPreamble);
  for (const auto& e : catalog.entries) {
    if (e.sample.empty()) {
      throw std::invalid_argument("catalog entry " + e.path + " has no sample snippet");
    }
    out += "\n/**\n";
    appendCommentLines(out, e.doc);
    out += " *\n * ```js\n";
    appendCommentLines(out, e.sample);
    out += " * ```\n */\n";
    out += declarationLine(e);
    out += '\n';
  }
  out.pop_back();  // no trailing newline: the template supplies the line break
  DefinitionText d;
  d.digest = sha256Hex(out);
  d.text = std::move(out);
  return d;
}

std::string fillTemplate(std::string_view tmpl, std::string_view definition) {
  auto pos = tmpl.find(kDefinitionSlot);
  if (pos == std::string_view::npos ||
      tmpl.find(kDefinitionSlot, pos + kDefinitionSlot.size()) != std::string_view::npos) {
    throw std::invalid_argument("template must contain exactly one definition slot");
  }
  std::string out;
  out.reserve(tmpl.size() + definition.size());
  out += tmpl.substr(0, pos);
  out += definition;
  out += tmpl.substr(pos + kDefinitionSlot.size());
  return out;
}

PromptEnvelope buildPrompt(const DefinitionText& definition, std::string_view request,
                           std::string_view model, double temperature) {
  if (request.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw std::invalid_argument("request is empty");
  }
  PromptEnvelope env;
  env.systemText = fillTemplate(kPromptTemplate, definition.text);
  env.userText = std::string(request);
  env.model = std::string(model);
  env.temperature = temperature;
  return env;
}

std::string_view toString(ExtractionErrorKind kind) {
  return kind == ExtractionErrorKind::NoCodeBlock ? "NoCodeBlock" : "UnterminatedFence";
}

ExtractionError::ExtractionError(ExtractionErrorKind kind)
    : std::runtime_error(kind == ExtractionErrorKind::NoCodeBlock
                             ? "reply contains no code block"
                             : "code block is never closed"),
      kind_(kind) {}

std::string extractCode(std::string_view reply) {
  struct Line {
    std::size_t begin;
    std::size_t end;  // exclusive, before '\n'
  };
  std::vector<Line> lines;
  for (std::size_t start = 0; start <= reply.size();) {
    std::size_t nl = reply.find('\n', start);
    if (nl == std::string_view::npos) nl = reply.size();
    lines.push_back({start, nl});
    start = nl + 1;
  }
  auto text = [&](const Line& l) { return reply.substr(l.begin, l.end - l.begin); };

  std::size_t i = 0;
  while (i < lines.size()) {
    std::string_view info;
    if (!fenceInfo(text(lines[i]), info)) {
      ++i;
      continue;
    }
    const bool accepted = info.empty() || info == "javascript" || info == "js";
    std::size_t close = i + 1;
    std::string_view closeInfo;
    while (close < lines.size() &&
           !(fenceInfo(text(lines[close]), closeInfo) && closeInfo.empty())) {
      ++close;
    }
    if (close >= lines.size()) {
      if (accepted) throw ExtractionError(ExtractionErrorKind::UnterminatedFence);
      break;
    }
    if (!accepted) {
      i = close + 1;  // skip blocks in other languages
      continue;
    }
    std::size_t first = i + 1;
    std::size_t last = close;  // exclusive
    while (first < last && isBlank(text(lines[first]))) ++first;
    while (last > first && isBlank(text(lines[last - 1]))) --last;
    if (first == last) return {};
    return std::string(reply.substr(lines[first].begin, lines[last - 1].end - lines[first].begin));
  }
  throw ExtractionError(ExtractionErrorKind::NoCodeBlock);
}

}  // namespace magicitem::prompt
