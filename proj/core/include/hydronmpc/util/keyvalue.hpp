#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hnmpc {

/// Plain-text `key = value` file. '#' starts a comment, blank lines are
/// ignored, repeated keys are an error. Every get marks the key as used so
/// unknown keys can be reported.
class KeyValueFile {
 public:
  KeyValueFile() = default;
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys starting with `prefix`, in sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
  /// Throws ConfigError naming keys never read.
  void reject_unused() const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string origin_;
};

/// Splits on any of `separators`, dropping empty tokens and trimming.
std::vector<std::string> split_tokens(const std::string& text, const std::string& separators);
double parse_double(const std::string& token, const std::string& what);

}  // namespace hnmpc
