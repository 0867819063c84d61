#pragma once

// Flat key/value configuration in a small TOML subset:
//
//   # comment
//   run_id = "demo"
//   [grid]
//   c_steps = 30          -> key "grid.c_steps"
//
// Values are kept as strings and converted on access. Every access records
// the value actually used (explicit or default), so the resolved snapshot
// can be written next to a run's outputs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace claimcheck {

class ConfigStore {
 public:
  ConfigStore() = default;

  static ConfigStore parse(const std::string& text,
                           const std::string& origin = "<config>");
  static ConfigStore load(const std::filesystem::path& path);

  // "key=value" override, as passed on the command line.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;
  // Relative paths resolve against the config file's directory. Empty string
  // means unset.
  std::filesystem::path get_path(const std::string& key) const;

  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }

  // Keys and values as resolved by the accesses made so far.
  std::string resolved_snapshot() const;

 private:
  const std::string* raw(const std::string& key) const;
  void record(const std::string& key, const std::string& value) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
  std::filesystem::path base_dir_ = ".";
};

}  // namespace claimcheck
