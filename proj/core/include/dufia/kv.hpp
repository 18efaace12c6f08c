#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dufia {

/// Ordered plain-text key/value record.
///
///   # comment
///   key = value
///
/// Keys are unique; whitespace around keys and values is trimmed. Doubles are
/// written in shortest round-trip form, so parse(to_text()) is exact.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);
  std::string to_text() const;

  bool has(std::string_view key) const;
  const std::string& get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  void set(std::string_view key, std::string value);
  void set(std::string_view key, const char* value) { set(key, std::string(value)); }
  void set(std::string_view key, double value);
  void set(std::string_view key, std::int64_t value);
  void set(std::string_view key, std::uint64_t value);
  void set(std::string_view key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(std::string_view key, bool value) { set(key, std::string(value ? "true" : "false")); }

  /// Appends every entry of `other` with `prefix` prepended to its key.
  void merge(const KeyValues& other, std::string_view prefix = "");
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace dufia
