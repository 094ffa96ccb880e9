#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "parrot/gateway.hpp"
#include "parrot/gcr.hpp"
#include "parrot/nft.hpp"
#include "parrot/reward.hpp"

namespace parrot {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error("config error at " + field + ": " + message), field(field) {}
  std::string field;
};

// Parsed, validated application configuration. The file format is sectioned
// plain text: `[section]` headers, `key = value` lines, `#` comments.
struct AppConfig {
  std::optional<EndpointConfig> teacher;
  std::optional<EndpointConfig> judge;
  std::optional<EndpointConfig> generator;
  RewardOptions reward;
  NftConfig nft;
  GcrConfig gcr;
  std::string out_dir = "out";
  std::string template_dir;  // empty means compiled-in templates

  static AppConfig parse(const std::string& text);
  static AppConfig load(const std::string& path);

  // Throws ConfigError naming "endpoint.<name>" when the section is absent.
  const EndpointConfig& require_endpoint(const std::string& name) const;
};

}  // namespace parrot
