#include "claimcheck/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "claimcheck/error.hpp"

namespace claimcheck {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

// Accepts [a, b, c] or a bare comma list.
std::vector<std::string> split_list(std::string v) {
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

ConfigStore ConfigStore::parse(const std::string& text,
                               const std::string& origin) {
  ConfigStore store;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kParse, origin + ":" + std::to_string(line_no) +
                                         ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::kParse,
                  origin + ":" + std::to_string(line_no) + ": empty key");
    }
    store.values_[section.empty() ? key : section + "." + key] =
        unquote(trim(line.substr(eq + 1)));
  }
  return store;
}

ConfigStore ConfigStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ConfigStore store = parse(ss.str(), path.string());
  store.base_dir_ = path.has_parent_path() ? path.parent_path() : ".";
  return store;
}

void ConfigStore::set(const std::string& key, const std::string& value) {
  values_[key] = unquote(trim(value));
}

void ConfigStore::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "override must look like key=value: '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

bool ConfigStore::has(const std::string& key) const {
  return values_.count(key) > 0;
}

const std::string* ConfigStore::raw(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void ConfigStore::record(const std::string& key, const std::string& value) const {
  resolved_[key] = value;
}

std::string ConfigStore::get_string(const std::string& key,
                                    const std::string& fallback) const {
  const std::string* v = raw(key);
  const std::string out = v ? *v : fallback;
  record(key, "\"" + out + "\"");
  return out;
}

bool ConfigStore::get_bool(const std::string& key, bool fallback) const {
  bool out = fallback;
  if (const std::string* v = raw(key)) {
    if (*v == "true" || *v == "1" || *v == "yes") {
      out = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      out = false;
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "config key '" + key + "' expects a boolean, got '" + *v + "'");
    }
  }
  record(key, out ? "true" : "false");
  return out;
}

std::int64_t ConfigStore::get_int(const std::string& key,
                                  std::int64_t fallback) const {
  std::int64_t out = fallback;
  if (const std::string* v = raw(key)) {
    auto res = std::from_chars(v->data(), v->data() + v->size(), out);
    if (res.ec != std::errc() || res.ptr != v->data() + v->size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config key '" + key + "' expects an integer, got '" + *v + "'");
    }
  }
  record(key, std::to_string(out));
  return out;
}

double ConfigStore::get_double(const std::string& key, double fallback) const {
  double out = fallback;
  if (const std::string* v = raw(key)) {
    try {
      std::size_t used = 0;
      out = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config key '" + key + "' expects a number, got '" + *v + "'");
    }
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), out);
  record(key, std::string(buf, res.ptr));
  return out;
}

std::vector<std::string> ConfigStore::get_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  std::vector<std::string> out = fallback;
  if (const std::string* v = raw(key)) out = split_list(*v);
  std::string joined = "[";
  for (std::size_t i = 0; i < out.size(); ++i) {
    joined += (i ? ", \"" : "\"") + out[i] + "\"";
  }
  record(key, joined + "]");
  return out;
}

std::filesystem::path ConfigStore::get_path(const std::string& key) const {
  const std::string* v = raw(key);
  if (v == nullptr || v->empty()) {
    record(key, "\"\"");
    return {};
  }
  std::filesystem::path p(*v);
  if (p.is_relative()) p = base_dir_ / p;
  p = p.lexically_normal();
  record(key, "\"" + p.string() + "\"");
  return p;
}

std::string ConfigStore::resolved_snapshot() const {
  // Top-level keys must precede every [section] header.
  std::string out;
  for (const auto& [key, value] : resolved_) {
    if (key.find('.') == std::string::npos) out += key + " = " + value + "\n";
  }
  std::string section;
  for (const auto& [key, value] : resolved_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out += (out.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

}  // namespace claimcheck
