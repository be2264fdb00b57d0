// Copyright 2026 The fairrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairrank {

// Flat "section.key" -> value settings read from an INI-style file:
//
//   [rerank]
//   epsilon = 0.005   ; comments start with ';' or '#'
//
// Keys outside any section are addressed without a dot. Later Set() calls
// override earlier values, which is how command-line flags take precedence.
class Config {
 public:
  static Config FromFile(const std::filesystem::path& path);
  static Config FromString(std::string_view text);

  void Set(const std::string& key, const std::string& value);
  // Parses "section.key=value".
  void SetAssignment(std::string_view assignment);
  bool Has(const std::string& key) const;
  std::optional<std::string> Get(const std::string& key) const;

  std::string GetString(const std::string& key, const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  int64_t GetInt(const std::string& key, int64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  // Throws kConfig naming the first key not in `known`.
  void CheckKnownKeys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace fairrank
