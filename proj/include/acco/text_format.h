#pragma once

#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace acco {

/// One non-blank line of a '#'-commented, whitespace-separated text file.
struct TextLine {
  int number = 0;
  std::vector<std::string> tokens;
};

std::vector<TextLine> tokenize(std::string_view text);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

/// Strict numeric conversions; throw ParseError mentioning `what` and the line.
double parse_double(const std::string& tok, std::string_view what, int line);
long long parse_integer(const std::string& tok, std::string_view what, int line);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// `key = value` text with '#' comments. A value may hold several
/// whitespace-separated tokens. Lookups throw ParseError naming the source.
class KeyValues {
 public:
  KeyValues() = default;
  static KeyValues parse(std::string_view text, std::string source);
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return map_.count(key) != 0; }
  void set(const std::string& key, std::string value);
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  /// Throws on the first key that is not listed.
  void require_known(std::initializer_list<std::string_view> known) const;
  std::vector<std::string> keys() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry& entry(const std::string& key) const;

  std::string source_ = "config";
  std::map<std::string, Entry> map_;
};

}  // namespace acco
