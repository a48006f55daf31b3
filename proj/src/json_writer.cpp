#include "skipfold/json_writer.hpp"

#include <cmath>
#include <cstdio>

#include "skipfold/errors.hpp"

namespace skipfold::io {

namespace {

void append_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void append_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void indent(std::string& out, int depth) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
}

}  // namespace

JsonValue JsonValue::boolean(bool v) {
  JsonValue j;
  j.value_ = v;
  return j;
}

JsonValue JsonValue::integer(std::int64_t v) {
  JsonValue j;
  j.value_ = v;
  return j;
}

JsonValue JsonValue::number(double v) {
  if (!std::isfinite(v)) throw Error("cannot serialize a non-finite number to JSON");
  JsonValue j;
  j.value_ = v;
  return j;
}

JsonValue JsonValue::string(std::string v) {
  JsonValue j;
  j.value_ = std::move(v);
  return j;
}

JsonValue JsonValue::array() {
  JsonValue j;
  j.value_ = Array{};
  return j;
}

JsonValue JsonValue::object() {
  JsonValue j;
  j.value_ = Object{};
  return j;
}

JsonValue& JsonValue::push(JsonValue v) {
  if (auto* arr = std::get_if<Array>(&value_)) {
    arr->push_back(std::move(v));
    return *this;
  }
  throw Error("JsonValue::push on a non-array");
}

JsonValue& JsonValue::set(std::string key, JsonValue v) {
  if (auto* obj = std::get_if<Object>(&value_)) {
    obj->emplace_back(std::move(key), std::move(v));
    return *this;
  }
  throw Error("JsonValue::set on a non-object");
}

bool JsonValue::scalar_only_array() const {
  const auto* arr = std::get_if<Array>(&value_);
  if (!arr) return false;
  for (const JsonValue& v : *arr)
    if (std::holds_alternative<Array>(v.value_) || std::holds_alternative<Object>(v.value_))
      return false;
  return true;
}

void JsonValue::write(std::string& out, int depth) const {
  if (std::holds_alternative<Null>(value_)) {
    out += "null";
  } else if (const auto* b = std::get_if<bool>(&value_)) {
    out += *b ? "true" : "false";
  } else if (const auto* i = std::get_if<std::int64_t>(&value_)) {
    out += std::to_string(*i);
  } else if (const auto* d = std::get_if<double>(&value_)) {
    append_double(out, *d);
  } else if (const auto* s = std::get_if<std::string>(&value_)) {
    append_escaped(out, *s);
  } else if (const auto* arr = std::get_if<Array>(&value_)) {
    if (arr->empty()) {
      out += "[]";
    } else if (scalar_only_array()) {
      out += '[';
      for (std::size_t k = 0; k < arr->size(); ++k) {
        if (k) out += ", ";
        (*arr)[k].write(out, depth);
      }
      out += ']';
    } else {
      out += "[\n";
      for (std::size_t k = 0; k < arr->size(); ++k) {
        indent(out, depth + 1);
        (*arr)[k].write(out, depth + 1);
        if (k + 1 < arr->size()) out += ',';
        out += '\n';
      }
      indent(out, depth);
      out += ']';
    }
  } else {
    const auto& obj = std::get<Object>(value_);
    if (obj.empty()) {
      out += "{}";
    } else {
      out += "{\n";
      for (std::size_t k = 0; k < obj.size(); ++k) {
        indent(out, depth + 1);
        append_escaped(out, obj[k].first);
        out += ": ";
        obj[k].second.write(out, depth + 1);
        if (k + 1 < obj.size()) out += ',';
        out += '\n';
      }
      indent(out, depth);
      out += '}';
    }
  }
}

std::string JsonValue::dump() const {
  std::string out;
  write(out, 0);
  return out;
}

}  // namespace skipfold::io
