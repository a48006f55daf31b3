#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace skipfold::io {

/// Minimal ordered JSON document used for every file and report the tool
/// emits. Doubles print with %.17g, so binary64 values round-trip exactly
/// and identical runs produce byte-identical output. Non-finite numbers are
/// rejected (they are not representable in JSON).
class JsonValue {
 public:
  JsonValue() : value_(Null{}) {}

  static JsonValue boolean(bool v);
  static JsonValue integer(std::int64_t v);
  static JsonValue number(double v);
  static JsonValue string(std::string v);
  static JsonValue array();
  static JsonValue object();

  /// Array append; returns *this for chaining.
  JsonValue& push(JsonValue v);
  /// Ordered object insert; returns *this for chaining.
  JsonValue& set(std::string key, JsonValue v);

  std::string dump() const;

 private:
  struct Null {};
  using Array = std::vector<JsonValue>;
  using Object = std::vector<std::pair<std::string, JsonValue>>;
  std::variant<Null, bool, std::int64_t, double, std::string, Array, Object> value_;

  void write(std::string& out, int depth) const;
  bool scalar_only_array() const;
};

}  // namespace skipfold::io
