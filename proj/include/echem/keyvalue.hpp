#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace echem {

/// `key = value  # comment` text files. Used for parameter sets and
/// observer configuration. Keys are case-sensitive; duplicates are rejected.
class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueFile parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& text(const std::string& key) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  /// Comma or whitespace separated list of numbers.
  std::vector<double> numbers(const std::string& key) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  const Entry& entry(const std::string& key) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

}  // namespace echem
