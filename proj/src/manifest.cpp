#include "stripeforge/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "stripeforge/core.hpp"

#ifndef STRIPEFORGE_VERSION
#define STRIPEFORGE_VERSION "0.0.0"
#endif

namespace sf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string slurp(const std::filesystem::path& path, const std::string& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(key, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kConfigPrefix = "config.";

}  // namespace

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  if (s == sections.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  sections[section][key] = value;
}

std::string Config::text() const {
  std::string out;
  for (const auto& [name, kv] : sections) {
    if (kv.empty()) continue;
    out += fmt::format("[{}]\n", name);
    for (const auto& [k, v] : kv) out += fmt::format("{} = {}\n", k, v);
    out += "\n";
  }
  return out;
}

Config parse_config(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3)
        throw InputError("config", fmt::format("{}:{}: malformed section header", origin, lineno));
      section = trim(t.substr(1, t.size() - 2));
      cfg.sections[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError("config", fmt::format("{}:{}: expected key = value", origin, lineno));
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw InputError("config", fmt::format("{}:{}: empty key", origin, lineno));
    if (section.empty())
      throw InputError(key, fmt::format("{}:{}: key '{}' outside any section", origin, lineno, key));
    const std::string full = section + "." + key;
    if (cfg.has(section, key))
      throw InputError(full, fmt::format("{}:{}: duplicate key {}", origin, lineno, full));
    cfg.set(section, key, trim(t.substr(eq + 1)));
  }
  return cfg;
}

Config read_config(const std::filesystem::path& path) {
  return parse_config(slurp(path, "config"), path.string());
}

std::string content_hash(const std::string& content) {
  const std::string header = fmt::format("blob {}", content.size());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size() + 1);  // includes the NUL
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string file_hash(const std::filesystem::path& path) { return content_hash(slurp(path, "input")); }

void RunManifest::add_output(const std::filesystem::path& run_dir, const std::string& name, bool is_volatile) {
  (is_volatile ? volatile_outputs : outputs).emplace_back(name, file_hash(run_dir / name));
}

std::string RunManifest::text() const {
  std::string out = "# stripeforge run manifest; replay with `stripeforge replay <this file>`\n";
  out += "[run]\n";
  out += fmt::format("command = {}\nversion = {}\nstarted = {}\nwall_seconds = {:.3f}\nexit_status = {}\nthreads = {}\n\n",
                     command, version, started, wall_seconds, exit_status, threads);
  Config cfg;
  for (const auto& [name, kv] : config.sections)
    for (const auto& [k, v] : kv) cfg.set(kConfigPrefix + name, k, v);
  out += cfg.text();
  if (!inputs.empty()) {
    out += "[inputs]\n";
    for (const auto& [p, h] : inputs) out += fmt::format("{} = {}\n", p, h);
    out += "\n";
  }
  out += "[outputs]\n";
  for (const auto& [p, h] : outputs) out += fmt::format("{} = {}\n", p, h);
  if (!volatile_outputs.empty()) {
    out += "\n[volatile_outputs]\n";
    for (const auto& [p, h] : volatile_outputs) out += fmt::format("{} = {}\n", p, h);
  }
  if (!warnings.empty()) {
    out += "\n[warnings]\n";
    for (std::size_t i = 0; i < warnings.size(); ++i) out += fmt::format("{} = {}\n", i, warnings[i]);
  }
  return out;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("output", fmt::format("cannot write {}", path.string()));
  os << text();
}

RunManifest read_manifest(const std::filesystem::path& path) {
  const Config raw = read_config(path);
  RunManifest m;
  auto get = [&](const std::string& k) -> std::string {
    const std::string* v = raw.find("run", k);
    if (!v) throw InputError("run." + k, fmt::format("{}: missing run.{}", path.string(), k));
    return *v;
  };
  m.command = get("command");
  m.version = get("version");
  m.started = get("started");
  m.wall_seconds = std::stod(get("wall_seconds"));
  m.exit_status = std::stoi(get("exit_status"));
  if (const std::string* t = raw.find("run", "threads")) m.threads = std::stoi(*t);
  const std::string prefix = kConfigPrefix;
  for (const auto& [name, kv] : raw.sections) {
    if (name.rfind(prefix, 0) == 0) {
      for (const auto& [k, v] : kv) m.config.set(name.substr(prefix.size()), k, v);
    } else if (name == "inputs") {
      for (const auto& [k, v] : kv) m.inputs.emplace_back(k, v);
    } else if (name == "outputs") {
      for (const auto& [k, v] : kv) m.outputs.emplace_back(k, v);
    } else if (name == "volatile_outputs") {
      for (const auto& [k, v] : kv) m.volatile_outputs.emplace_back(k, v);
    } else if (name == "warnings") {
      for (const auto& [k, v] : kv) m.warnings.push_back(v);
    }
  }
  return m;
}

std::string tool_version() { return STRIPEFORGE_VERSION; }

}  // namespace sf
