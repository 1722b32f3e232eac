#include "acco/text_format.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "acco/compressor_lib.h"

namespace acco {

std::vector<TextLine> tokenize(std::string_view text) {
  std::vector<TextLine> out;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++number;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::istringstream in{std::string(line)};
    TextLine tl;
    tl.number = number;
    for (std::string tok; in >> tok;) tl.tokens.push_back(tok);
    if (!tl.tokens.empty()) out.push_back(std::move(tl));
    pos = end + 1;
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path + "'");
}

double parse_double(const std::string& tok, std::string_view what, int line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(std::string(what) + " line " + std::to_string(line) + ": expected number, got '" + tok + "'");
  return v;
}

long long parse_integer(const std::string& tok, std::string_view what, int line) {
  long long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(std::string(what) + " line " + std::to_string(line) + ": expected integer, got '" + tok + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string source) {
  KeyValues kv;
  kv.source_ = std::move(source);
  for (const auto& ln : tokenize(text)) {
    std::string joined;
    for (const auto& t : ln.tokens) joined += (joined.empty() ? "" : " ") + t;
    const auto eq = joined.find('=');
    if (eq == std::string::npos)
      throw ParseError(kv.source_ + " line " + std::to_string(ln.number) + ": expected 'key = value'");
    std::string key = trim(std::string_view(joined).substr(0, eq));
    std::string value = trim(std::string_view(joined).substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(kv.source_ + " line " + std::to_string(ln.number) + ": empty key or value");
    if (kv.has(key))
      throw ParseError(kv.source_ + " line " + std::to_string(ln.number) + ": duplicate key '" + key + "'");
    kv.map_[key] = Entry{std::move(value), ln.number};
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) { return parse(read_text_file(path), path); }

void KeyValues::set(const std::string& key, std::string value) { map_[key] = Entry{std::move(value), 0}; }

const KeyValues::Entry& KeyValues::entry(const std::string& key) const {
  auto it = map_.find(key);
  if (it == map_.end()) throw ParseError(source_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_string(const std::string& key) const { return entry(key).value; }

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double KeyValues::get_double(const std::string& key) const {
  const auto& e = entry(key);
  return parse_double(e.value, source_ + " key '" + key + "'", e.line);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long KeyValues::get_int(const std::string& key) const {
  const auto& e = entry(key);
  return parse_integer(e.value, source_ + " key '" + key + "'", e.line);
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = entry(key).value;
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ParseError(source_ + " line " + std::to_string(entry(key).line) + ": expected boolean for '" + key + "'");
}

std::vector<double> KeyValues::get_doubles(const std::string& key) const {
  const auto& e = entry(key);
  std::string v = e.value;
  std::replace(v.begin(), v.end(), ',', ' ');
  std::istringstream in(v);
  std::vector<double> out;
  for (std::string tok; in >> tok;) out.push_back(parse_double(tok, source_ + " key '" + key + "'", e.line));
  return out;
}

void KeyValues::require_known(std::initializer_list<std::string_view> known) const {
  for (const auto& [k, e] : map_)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ParseError(source_ + " line " + std::to_string(e.line) + ": unknown key '" + k + "'");
}

std::vector<std::string> KeyValues::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : map_) out.push_back(k);
  return out;
}

}  // namespace acco
