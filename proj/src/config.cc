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

#include "fairrank/config.h"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <sstream>
#include <vector>

#include "fairrank/error.h"
#include "fairrank/util.h"

namespace fairrank {

namespace {

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Drops a trailing "; comment" or "# comment" from a value.
std::string StripInlineComment(const std::string& value) {
  for (size_t i = 0; i < value.size(); ++i) {
    if ((value[i] == ';' || value[i] == '#') &&
        (i == 0 || value[i - 1] == ' ' || value[i - 1] == '\t')) {
      return Trim(std::string_view(value).substr(0, i));
    }
  }
  return value;
}

}  // namespace

Config Config::FromString(std::string_view text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig,
                "config line " + std::to_string(e.line()) + ": " + e.message());
  }
  Config config;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      config.Set(name, StripInlineComment(node.data()));
      continue;
    }
    for (const auto& [key, leaf] : node) {
      config.Set(name + "." + key, StripInlineComment(leaf.data()));
    }
  }
  return config;
}

Config Config::FromFile(const std::filesystem::path& path) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  return FromString(text);
}

void Config::Set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

void Config::SetAssignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, "expected key=value, got '" +
                                        std::string(assignment) + "'");
  }
  Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
}

bool Config::Has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::optional<std::string> Config::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::GetString(const std::string& key,
                              const std::string& fallback) const {
  return Get(key).value_or(fallback);
}

double Config::GetDouble(const std::string& key, double fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  try {
    return ParseDouble(*v, key);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

int64_t Config::GetInt(const std::string& key, int64_t fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  try {
    return ParseInt(*v, key);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
}

bool Config::GetBool(const std::string& key, bool fallback) const {
  auto v = Get(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorCode::kConfig, key + ": expected a boolean, got '" + *v + "'");
}

void Config::CheckKnownKeys(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  }
}

}  // namespace fairrank
