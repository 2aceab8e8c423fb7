#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

namespace dyadlab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool from_text(const std::string& s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

double parse_double(const std::string& text) {
  double v = 0.0;
  const std::string t = trim(text);
  if (!from_text(t, v) || !std::isfinite(v)) throw UsageError("bad number '" + t + "'");
  return v;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string tok = trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (tok.empty()) throw UsageError("empty entry in list '" + text + "'");
    out.push_back(parse_double(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw UsageError(where + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError(where + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.entries_.count(full)) throw UsageError(where + ": duplicate key '" + full + "'");
    cfg.entries_[full] = Entry{trim(t.substr(eq + 1)), where};
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config '" + path + "'");
  return parse(f, path);
}

void Config::set(const std::string& key, const std::string& value, const std::string& where) {
  entries_[key] = Entry{value, where};
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

const Config::Entry* Config::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

void Config::fail(const Entry& e, const std::string& key, const std::string& msg) const {
  throw UsageError(e.where + ": " + key + ": " + msg);
}

std::optional<std::string> Config::get_optional(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  return e->value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!from_text(e->value, v) || !std::isfinite(v)) fail(*e, key, "expected a number, got '" + e->value + "'");
  return v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  long long v = 0;
  if (!from_text(e->value, v)) fail(*e, key, "expected an integer, got '" + e->value + "'");
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!from_text(e->value, v)) fail(*e, key, "expected an unsigned integer, got '" + e->value + "'");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
  if (e->value == "false" || e->value == "no" || e->value == "0") return false;
  fail(*e, key, "expected true or false, got '" + e->value + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    return parse_doubles(e->value);
  } catch (const UsageError& err) {
    fail(*e, key, err.what());
  }
}

void Config::reject_unused() const {
  std::string msg;
  for (const auto& [k, e] : entries_)
    if (!e.used) msg += (msg.empty() ? "" : "; ") + e.where + ": unknown key '" + k + "'";
  if (!msg.empty()) throw UsageError(msg);
}

}  // namespace dyadlab::cli
