#pragma once

// The subset of JSON Schema the published API documents use: type,
// properties, required, additionalProperties, items, enum, const, oneOf,
// anyOf, pattern, minimum, maximum, min/maxProperties and $ref across files.

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace jms::testing {

class SchemaSet {
 public:
  explicit SchemaSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  // Violations of `value` against <name>.schema.json, empty when valid.
  std::vector<std::string> validate(const std::string& name, const nlohmann::json& value) {
    std::vector<std::string> out;
    const auto file = name + ".schema.json";
    check(file, load(file), value, "$", out);
    return out;
  }

  const nlohmann::json& load(const std::string& file) {
    auto it = docs_.find(file);
    if (it == docs_.end()) {
      std::ifstream in(dir_ / file);
      if (!in) throw std::runtime_error("missing schema " + file);
      it = docs_.emplace(file, nlohmann::json::parse(in)).first;
    }
    return it->second;
  }

 private:
  static bool has_type(const nlohmann::json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
  }

  void check(const std::string& file, const nlohmann::json& s, const nlohmann::json& v, const std::string& at,
             std::vector<std::string>& out) {
    if (s.contains("$ref")) {
      const auto r = s.at("$ref").get<std::string>();
      const auto hash = r.find('#');
      const auto target_file = hash == 0 ? file : r.substr(0, hash);
      const nlohmann::json* target = &load(target_file);
      if (hash != std::string::npos) target = &target->at(nlohmann::json::json_pointer(r.substr(hash + 1)));
      check(target_file, *target, v, at, out);
      return;
    }
    if (s.contains("type")) {
      const auto& t = s.at("type");
      bool ok = false;
      if (t.is_string()) ok = has_type(v, t.get<std::string>());
      for (const auto& alt : t.is_array() ? t : nlohmann::json::array()) ok = ok || has_type(v, alt.get<std::string>());
      if (!ok) {
        out.push_back(at + ": expected type " + t.dump() + ", got " + v.dump());
        return;
      }
    }
    if (s.contains("const") && v != s.at("const")) out.push_back(at + ": expected " + s.at("const").dump());
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s.at("enum")) found = found || e == v;
      if (!found) out.push_back(at + ": " + v.dump() + " not in " + s.at("enum").dump());
    }
    if (s.contains("pattern") && v.is_string() &&
        !std::regex_search(v.get<std::string>(), std::regex(s.at("pattern").get<std::string>()))) {
      out.push_back(at + ": does not match " + s.at("pattern").get<std::string>());
    }
    if (s.contains("minimum") && v.is_number() && v.get<double>() < s.at("minimum").get<double>()) {
      out.push_back(at + ": below minimum");
    }
    if (s.contains("maximum") && v.is_number() && v.get<double>() > s.at("maximum").get<double>()) {
      out.push_back(at + ": above maximum");
    }
    for (const char* key : {"oneOf", "anyOf"}) {
      if (!s.contains(key)) continue;
      int matched = 0;
      for (const auto& alt : s.at(key)) {
        std::vector<std::string> sub;
        check(file, alt, v, at, sub);
        matched += sub.empty();
      }
      const bool ok = std::string(key) == "oneOf" ? matched == 1 : matched >= 1;
      if (!ok) out.push_back(at + ": " + key + " matched " + std::to_string(matched) + " alternatives");
    }
    if (v.is_object()) {
      if (s.contains("minProperties") && v.size() < s.at("minProperties").get<std::size_t>()) {
        out.push_back(at + ": too few properties");
      }
      if (s.contains("maxProperties") && v.size() > s.at("maxProperties").get<std::size_t>()) {
        out.push_back(at + ": too many properties");
      }
      for (const auto& r : s.value("required", nlohmann::json::array())) {
        if (!v.contains(r.get<std::string>())) out.push_back(at + ": missing " + r.get<std::string>());
      }
      const auto props = s.value("properties", nlohmann::json::object());
      for (const auto& [k, sub] : v.items()) {
        if (props.contains(k)) {
          check(file, props.at(k), sub, at + "." + k, out);
        } else if (s.contains("additionalProperties")) {
          const auto& extra = s.at("additionalProperties");
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) out.push_back(at + ": unexpected property " + k);
          } else {
            check(file, extra, sub, at + "." + k, out);
          }
        }
      }
    }
    if (v.is_array() && s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) check(file, s.at("items"), v[i], at + "[" + std::to_string(i) + "]", out);
    }
  }

  std::filesystem::path dir_;
  std::map<std::string, nlohmann::json> docs_;
};

}  // namespace jms::testing
