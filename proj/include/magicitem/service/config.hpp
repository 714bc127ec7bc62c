#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "magicitem/gateway/gateway.hpp"

namespace magicitem::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path syncDir = "sync";
  std::filesystem::path dataDir = "data";
  std::filesystem::path staticDir = "ui";
  std::uint64_t seed = 42;
  bool manualStep = false;
  gateway::GatewayConfig gateway;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies `key = value` lines (TOML subset: comments, bare or quoted
/// strings, integers, booleans) onto `cfg`. Unknown keys are errors, and so is
/// any attempt to put the API key in the file.
void applyConfigText(ServiceConfig& cfg, const std::string& text, const std::string& origin);
void applyConfigFile(ServiceConfig& cfg, const std::filesystem::path& path);

}  // namespace magicitem::service
