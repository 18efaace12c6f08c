#include "dufia/kv.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "dufia/errors.hpp"
#include "dufia/io.hpp"

namespace dufia {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  s = trim(s);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  // "a/b" is accepted for budgets such as 8/255.
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const double den = parse_double(s.substr(slash + 1));
    if (den == 0.0) throw InvalidArgument("zero denominator: '" + std::string(s) + "'");
    return parse_double(s.substr(0, slash)) / den;
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  while (true) {
    const auto pos = s.find(sep);
    const auto item = trim(s.substr(0, pos));
    if (!item.empty()) out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidArgument("line " + std::to_string(line_no) + ": empty key");
    if (kv.has(key)) {
      throw InvalidArgument("line " + std::to_string(line_no) + ": duplicate key '" +
                            std::string(key) + "'");
    }
    kv.entries_.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

bool KeyValues::has(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return true;
  }
  return false;
}

const std::string& KeyValues::get(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  throw InvalidArgument("missing key '" + std::string(key) + "'");
}

std::string KeyValues::get_or(std::string_view key, std::string fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return parse_double(get(key));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(key) + ": " + e.what());
  }
}

std::int64_t KeyValues::get_int(std::string_view key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  try {
    return parse_int(get(key));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(key) + ": " + e.what());
  }
}

std::uint64_t KeyValues::get_u64(std::string_view key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const auto s = trim(get(key));
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw InvalidArgument(std::string(key) + ": not an unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

bool KeyValues::get_bool(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgument(std::string(key) + ": not a boolean: '" + v + "'");
}

void KeyValues::set(std::string_view key, std::string value) {
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::string(key), std::move(value));
}

void KeyValues::set(std::string_view key, double value) { set(key, format_double(value)); }
void KeyValues::set(std::string_view key, std::int64_t value) { set(key, std::to_string(value)); }
void KeyValues::set(std::string_view key, std::uint64_t value) { set(key, std::to_string(value)); }

void KeyValues::merge(const KeyValues& other, std::string_view prefix) {
  for (const auto& [k, v] : other.entries_) set(std::string(prefix) + k, v);
}

}  // namespace dufia
