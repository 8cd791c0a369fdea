#include "echem/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "echem/errors.hpp"

namespace echem {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::istream& in, const std::string& source) {
  KeyValueFile kv;
  kv.source_ = source;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(source + ": expected 'key = value'", line);
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError(source + ": empty key", line);
    if (value.empty()) throw ParseError(source + ": empty value for '" + key + "'", line);
    if (kv.entries_.count(key)) throw ParseError(source + ": duplicate key '" + key + "'", line);
    kv.entries_.emplace(std::move(key), Entry{std::move(value), line});
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return parse(in, path.string());
}

const KeyValueFile::Entry& KeyValueFile::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_ + ": missing key '" + key + "'");
  return it->second;
}

const std::string& KeyValueFile::text(const std::string& key) const { return entry(key).value; }

double KeyValueFile::number(const std::string& key) const {
  const Entry& e = entry(key);
  double v = 0.0;
  if (!parse_double(e.value, v))
    throw ParseError(source_ + ": '" + key + "' is not a number: " + e.value, e.line);
  return v;
}

double KeyValueFile::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::vector<double> KeyValueFile::numbers(const std::string& key) const {
  const Entry& e = entry(key);
  std::string s = e.value;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v))
      throw ParseError(source_ + ": '" + key + "' has a non-numeric item: " + tok, e.line);
    out.push_back(v);
  }
  return out;
}

}  // namespace echem
