#pragma once

// Strict reading of JSON config objects: every key must be known, and type
// errors name the full field path.

#include <json.hpp>
#include <set>
#include <string>

#include "dssh/nn.hpp"

namespace dssh {

class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw nn::ConfigError(path_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw nn::ConfigError(field(key) + ": " + e.what());
    }
  }

  // Returns the sub-object (or null) and marks the key as known.
  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw nn::ConfigError("unknown config key '" + field(it.key()) + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace dssh
