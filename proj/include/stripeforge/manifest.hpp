#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sf {

// Sectioned key = value configuration.  Lines are `[section]`, `key = value`,
// blank, or comments starting with '#' or ';'.
struct Config {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const;
  const std::string* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  std::string text() const;  // sorted, re-readable
};

// Throws InputError naming "section.key" (or "config" for syntax errors).
Config parse_config(const std::string& text, const std::string& origin = "config");
Config read_config(const std::filesystem::path& path);

// git blob id: sha1 of "blob <size>\0" + content, as lowercase hex.
std::string content_hash(const std::string& content);
std::string file_hash(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string version;
  std::string started;  // UTC, ISO 8601
  double wall_seconds = 0;
  int exit_status = 0;
  int threads = 0;      // 0: no cap
  Config config;                                    // fully resolved
  std::vector<std::pair<std::string, std::string>> inputs;   // path, hash
  std::vector<std::pair<std::string, std::string>> outputs;  // name relative to the run dir, hash
  // timing-bearing outputs; hashed but not expected to replay identically
  std::vector<std::pair<std::string, std::string>> volatile_outputs;
  std::vector<std::string> warnings;

  void add_output(const std::filesystem::path& run_dir, const std::string& name, bool is_volatile = false);
  std::string text() const;
  void write(const std::filesystem::path& path) const;
};

RunManifest read_manifest(const std::filesystem::path& path);

std::string tool_version();

}  // namespace sf
