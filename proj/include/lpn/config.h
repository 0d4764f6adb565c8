/* Copyright 2026 The LPN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef LPN_CONFIG_H_
#define LPN_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lpn {

// Flat `section.key = value` text. Lines starting with '#' are comments.
// Later assignments override earlier ones.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Parse(std::istream& is, std::string_view origin = "<config>");
  static KeyValueConfig ParseString(std::string_view text);
  static KeyValueConfig Load(const std::string& path);

  // Keys are written sorted, one per line.
  void Write(std::ostream& os) const;
  std::string ToString() const;

  bool Has(const std::string& key) const { return values_.count(key) != 0; }
  void Set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void Set(const std::string& key, const char* value) { values_[key] = value; }
  void Set(const std::string& key, double value);
  void Set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void Set(const std::string& key, std::int64_t value) { values_[key] = std::to_string(value); }
  void Set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }
  void Set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }
  // Copies every entry of `other`, overriding existing keys.
  void Merge(const KeyValueConfig& other);

  // Typed getters throw ConfigError on malformed values.
  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  int GetInt(const std::string& key, int fallback) const;
  std::uint64_t GetUint64(const std::string& key, std::uint64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;
  std::string Require(const std::string& key) const;

  // Keys not in `known`; used to reject typos.
  std::vector<std::string> UnknownKeys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string Trim(std::string_view s);
std::vector<std::string> SplitString(std::string_view s, char sep);

}  // namespace lpn

#endif  // LPN_CONFIG_H_
