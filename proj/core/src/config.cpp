#include "parrot/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "parrot/util.hpp"

namespace parrot {

namespace {

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

// Inline comments need whitespace before the marker so values may contain
// '#' or ';' when glued to the text (for example in URLs).
std::string strip_inline_comment(const std::string& s) {
  for (std::size_t i = 1; i < s.size(); ++i) {
    if ((s[i] == '#' || s[i] == ';') && std::isspace(static_cast<unsigned char>(s[i - 1])))
      return s.substr(0, i);
  }
  return s;
}

SectionMap parse_sections(const std::string& text) {
  SectionMap sections;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    s = trim(strip_inline_comment(s));
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(line_no), "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no), "empty section name");
      sections[section];
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no), "key outside any section");
    sections[section][key] = value;
  }
  return sections;
}

double to_double(const std::string& field, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not a number: " + value);
  }
}

long to_long(const std::string& field, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "not an integer: " + value);
  }
}

bool to_bool(const std::string& field, const std::string& value) {
  const std::string v = to_lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(field, "not a boolean: " + value);
}

// Applies section keys through a per-key setter table; unknown keys are
// errors so typos never pass silently.
struct KeyReader {
  const std::string section;
  const std::map<std::string, std::string>& keys;

  void apply(const std::map<std::string, std::function<void(const std::string&, const std::string&)>>&
                 setters) const {
    for (const auto& [key, value] : keys) {
      const std::string field = section + "." + key;
      const auto it = setters.find(key);
      if (it == setters.end()) throw ConfigError(field, "unknown key");
      it->second(field, value);
    }
  }
};

EndpointConfig read_endpoint(const std::string& section,
                             const std::map<std::string, std::string>& keys) {
  EndpointConfig ep;
  KeyReader reader{section, keys};
  reader.apply({
      {"base_url", [&](const std::string&, const std::string& v) { ep.base_url = v; }},
      {"model", [&](const std::string&, const std::string& v) { ep.model = v; }},
      {"timeout_s", [&](const std::string& f, const std::string& v) { ep.timeout_s = to_double(f, v); }},
      {"max_retries",
       [&](const std::string& f, const std::string& v) { ep.max_retries = static_cast<int>(to_long(f, v)); }},
      {"max_inflight",
       [&](const std::string& f, const std::string& v) { ep.max_inflight = static_cast<int>(to_long(f, v)); }},
      {"temperature",
       [&](const std::string& f, const std::string& v) { ep.temperature = to_double(f, v); }},
      {"max_tokens",
       [&](const std::string& f, const std::string& v) { ep.max_tokens = static_cast<int>(to_long(f, v)); }},
      {"backoff_base_s",
       [&](const std::string& f, const std::string& v) { ep.backoff_base_s = to_double(f, v); }},
      {"api_key", [&](const std::string&, const std::string& v) { ep.api_key = v; }},
  });
  // Secrets may come from the environment instead of the file.
  if (const char* env = std::getenv("PARROT_API_KEY"); env != nullptr && *env != '\0')
    ep.api_key = env;
  try {
    ep.validate();
  } catch (const std::exception& e) {
    throw ConfigError(section, e.what());
  }
  return ep;
}

}  // namespace

AppConfig AppConfig::parse(const std::string& text) {
  const SectionMap sections = parse_sections(text);
  AppConfig cfg;
  for (const auto& [section, keys] : sections) {
    if (section == "endpoint.teacher") {
      cfg.teacher = read_endpoint(section, keys);
    } else if (section == "endpoint.judge") {
      cfg.judge = read_endpoint(section, keys);
    } else if (section == "endpoint.generator") {
      cfg.generator = read_endpoint(section, keys);
    } else if (section == "reward") {
      KeyReader reader{section, keys};
      auto& r = cfg.reward;
      reader.apply({
          {"epsilon", [&](const std::string& f, const std::string& v) { r.epsilon = to_double(f, v); }},
          {"sample_std",
           [&](const std::string& f, const std::string& v) { r.sample_std = to_bool(f, v); }},
          {"mean_threshold",
           [&](const std::string& f, const std::string& v) { r.mean_threshold = to_double(f, v); }},
          {"std_threshold",
           [&](const std::string& f, const std::string& v) { r.std_threshold = to_double(f, v); }},
      });
      if (r.epsilon <= 0) throw ConfigError(section + ".epsilon", "must be > 0");
      if (r.mean_threshold < 0 || r.mean_threshold > 1)
        throw ConfigError(section + ".mean_threshold", "must be in [0,1]");
      if (r.std_threshold < 0 || r.std_threshold > 1)
        throw ConfigError(section + ".std_threshold", "must be in [0,1]");
    } else if (section == "nft") {
      KeyReader reader{section, keys};
      auto& n = cfg.nft;
      reader.apply({
          {"group_size",
           [&](const std::string& f, const std::string& v) { n.group_size = static_cast<int>(to_long(f, v)); }},
          {"beta", [&](const std::string& f, const std::string& v) { n.beta = to_double(f, v); }},
          {"ema", [&](const std::string& f, const std::string& v) { n.ema = {to_double(f, v)}; }},
          {"learning_rate",
           [&](const std::string& f, const std::string& v) { n.learning_rate = to_double(f, v); }},
          {"iterations",
           [&](const std::string& f, const std::string& v) { n.iterations = static_cast<int>(to_long(f, v)); }},
          {"noise_level",
           [&](const std::string& f, const std::string& v) { n.noise_level = to_double(f, v); }},
          {"sample_steps",
           [&](const std::string& f, const std::string& v) { n.sample_steps = static_cast<int>(to_long(f, v)); }},
          {"hidden",
           [&](const std::string& f, const std::string& v) { n.hidden = static_cast<int>(to_long(f, v)); }},
          {"seed",
           [&](const std::string& f, const std::string& v) { n.seed = static_cast<std::uint64_t>(to_long(f, v)); }},
      });
      if (n.group_size < 2) throw ConfigError(section + ".group_size", "must be >= 2");
      if (n.iterations < 1) throw ConfigError(section + ".iterations", "must be >= 1");
      if (n.noise_level <= 0 || n.noise_level > 1)
        throw ConfigError(section + ".noise_level", "must be in (0,1]");
      if (n.sample_steps < 1) throw ConfigError(section + ".sample_steps", "must be >= 1");
    } else if (section == "gcr") {
      KeyReader reader{section, keys};
      auto& g = cfg.gcr;
      reader.apply({
          {"threshold",
           [&](const std::string& f, const std::string& v) { g.threshold = to_double(f, v); }},
          {"max_iterations",
           [&](const std::string& f, const std::string& v) { g.max_iterations = static_cast<int>(to_long(f, v)); }},
      });
      try {
        g.validate();
      } catch (const std::exception& e) {
        throw ConfigError(section, e.what());
      }
    } else if (section == "paths") {
      KeyReader reader{section, keys};
      reader.apply({
          {"out_dir", [&](const std::string&, const std::string& v) { cfg.out_dir = v; }},
          {"template_dir", [&](const std::string&, const std::string& v) { cfg.template_dir = v; }},
      });
    } else {
      throw ConfigError(section, "unknown section");
    }
  }
  return cfg;
}

AppConfig AppConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const EndpointConfig& AppConfig::require_endpoint(const std::string& name) const {
  const std::optional<EndpointConfig>* ep = nullptr;
  if (name == "teacher") ep = &teacher;
  else if (name == "judge") ep = &judge;
  else if (name == "generator") ep = &generator;
  else throw ConfigError("endpoint." + name, "unknown endpoint role");
  if (!ep->has_value()) throw ConfigError("endpoint." + name, "section is required but missing");
  return **ep;
}

}  // namespace parrot
