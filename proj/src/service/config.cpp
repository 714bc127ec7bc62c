#include "magicitem/service/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace magicitem::service {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& v, const std::string& where) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) {
    if (v.back() != v.front()) throw ConfigError(where + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  return v;
}

template <class T>
T integer(const std::string& v, const std::string& where) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool boolean(const std::string& v, const std::string& where) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(where + ": expected true or false");
}

}  // namespace

void applyConfigText(ServiceConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  int lineNo = 0;
  while (std::getline(in, raw)) {
    ++lineNo;
    const std::string where = origin + ":" + std::to_string(lineNo);
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') continue;  // tables are ignored; keys are global
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!value.empty() && (value[0] == '"' || value[0] == '\'')) {
      // Drop a trailing comment after the closing quote.
      if (auto close = value.find(value[0], 1); close != std::string::npos) {
        auto rest = trim(std::string_view(value).substr(close + 1));
        if (rest.empty() || rest[0] == '#') value = value.substr(0, close + 1);
      }
    } else if (auto hash = value.find('#'); hash != std::string::npos) {
      value = trim(value.substr(0, hash));
    }
    value = unquote(value, where);

    if (key == "port") {
      cfg.port = integer<int>(value, where);
      if (cfg.port < 0 || cfg.port > 65535) throw ConfigError(where + ": port out of range");
    } else if (key == "host") {
      cfg.host = value;
    } else if (key == "seed") {
      cfg.seed = integer<std::uint64_t>(value, where);
    } else if (key == "backend") {
      if (!gateway::parseBackend(value, cfg.gateway.backend)) {
        throw ConfigError(where + ": backend must be live, mock or replay");
      }
    } else if (key == "model") {
      cfg.gateway.model = value;
    } else if (key == "fixtures_dir") {
      cfg.gateway.fixturesDir = value;
    } else if (key == "base_url") {
      cfg.gateway.baseUrl = value;
    } else if (key == "api_key_env") {
      cfg.gateway.apiKeyEnv = value;
    } else if (key == "timeout_s") {
      cfg.gateway.timeoutSeconds = integer<int>(value, where);
    } else if (key == "record") {
      cfg.gateway.record = boolean(value, where);
    } else if (key == "stream") {
      cfg.gateway.stream = boolean(value, where);
    } else if (key == "sync_dir") {
      cfg.syncDir = value;
    } else if (key == "data_dir") {
      cfg.dataDir = value;
    } else if (key == "static_dir") {
      cfg.staticDir = value;
    } else if (key == "manual_step") {
      cfg.manualStep = boolean(value, where);
    } else if (key == "api_key" || key == "key") {
      throw ConfigError(where + ": the API key is read from the environment variable named by "
                                "api_key_env, never from a file");
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

void applyConfigFile(ServiceConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  applyConfigText(cfg, ss.str(), path.string());
}

}  // namespace magicitem::service
