#pragma once

#include <set>
#include <string>

#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth {

/// Strict reader over one JSON object: every key must be consumed before
/// finish(), so unknown keys surface as configuration errors.
class JsonReader {
 public:
  JsonReader(const json& object, std::string context)
      : object_(object), context_(std::move(context)) {
    if (!object_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    used_.insert(key);
    if (!object_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!object_.contains(key)) throw ConfigError(context_ + ": missing key '" + key + "'");
    return convert<T>(key);
  }

  /// Nested object, or nullptr when absent.
  const json* child(const std::string& key) {
    used_.insert(key);
    if (!object_.contains(key)) return nullptr;
    return &object_.at(key);
  }

  std::string path(const std::string& key) const { return context_ + "." + key; }

  void finish() const {
    for (const auto& item : object_.items()) {
      if (!used_.count(item.key()))
        throw ConfigError(context_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  template <class T>
  T convert(const std::string& key) const {
    try {
      return object_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }

  const json& object_;
  std::string context_;
  std::set<std::string> used_;
};

}  // namespace tacdepth
