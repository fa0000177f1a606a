// dfsign/keyvalue.hpp

// Copyright 2026 The dfsign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// `key = value` text files with `#` comments, used for corpus specs,
// training configs and checkpoint manifests.

#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "dfsign/error.hpp"

namespace dfsign {

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source = "<input>") {
    KeyValues kv;
    kv.source_ = source;
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string_view::npos)
        throw DataError(source + ":" + std::to_string(n) + ": expected `key = value`");
      const std::string key(trim(text.substr(0, eq)));
      if (key.empty()) throw DataError(source + ":" + std::to_string(n) + ": empty key");
      if (kv.values_.count(key)) throw DataError(source + ":" + std::to_string(n) + ": duplicate key " + key);
      kv.values_[key] = std::string(trim(text.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValues parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return convert<T>(key, it->second);
  }

  /// Throws on keys that no getter asked for, which catches typos.
  void reject_unknown() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw DataError(source_ + ": unknown key " + k);
  }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  template <class T>
  T convert(const std::string& key, const std::string& v) const {
    auto bad = [&] { return DataError(source_ + ": bad value for " + key + ": '" + v + "'"); };
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "off" || v == "no") return false;
      throw bad();
    } else if constexpr (std::is_floating_point_v<T>) {
      std::size_t pos = 0;
      T out{};
      try {
        out = T(std::stod(v, &pos));
      } catch (const std::exception&) {
        throw bad();
      }
      if (pos != v.size()) throw bad();
      return out;
    } else {
      T out{};
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || p != v.data() + v.size()) throw bad();
      return out;
    }
  }

  std::string source_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace dfsign
