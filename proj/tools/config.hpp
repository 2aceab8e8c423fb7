#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyadlab::cli {

/// Bad command line or config: maps to exit status 3.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text with `[section]` headers. Keys inside a section
/// are stored as `section.key`. `#` starts a comment line. Every getter
/// marks its key as used so leftovers can be reported as unknown.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config parse_file(const std::string& path);

  /// Command-line override (`section.key=value`).
  void set(const std::string& key, const std::string& value, const std::string& where = "--set");
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma separated.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::optional<std::string> get_optional(const std::string& key) const;

  /// Throws UsageError naming every key no getter asked for.
  void reject_unused() const;

 private:
  struct Entry {
    std::string value;
    std::string where;  // "file:line"
    mutable bool used = false;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& msg) const;

  std::map<std::string, Entry> entries_;
};

double parse_double(const std::string& text);
std::vector<double> parse_doubles(const std::string& text);

}  // namespace dyadlab::cli
