#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace bdpm {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Numbers are written in shortest round-trip form, so serialize() followed by
/// parse() reproduces every value exactly.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  /// Sorted `key = value` lines.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set(const std::string& key, const char* value) { entries_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, bool value) { entries_[key] = value ? "true" : "false"; }

  bool has(const std::string& key) const { return entries_.contains(key); }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Values in `overrides` replace ours.
  void merge(const KeyValues& overrides);

  /// Keys never read through a getter; used to reject typos.
  std::set<std::string> unread_keys() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> read_;
};

std::string format_double(double v);

}  // namespace bdpm
