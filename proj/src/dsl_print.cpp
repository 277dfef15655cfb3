#include <sstream>

#include "scenforge/dsl.hpp"

namespace scenforge::dsl {

namespace {

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

// geometry keys with a fixed slot; everything else follows alphabetically
constexpr std::string_view kGeometryOrder[] = {"map", "ego_route", "source"};

std::vector<std::string> geometry_keys(const std::map<std::string, Value>& g) {
  std::vector<std::string> keys;
  for (auto k : kGeometryOrder)
    if (g.count(std::string(k))) keys.emplace_back(k);
  for (const auto& [k, v] : g) {
    bool fixed = false;
    for (auto f : kGeometryOrder) fixed = fixed || k == f;
    if (!fixed) keys.push_back(k);
  }
  return keys;
}

std::string indent_lines(const std::string& block, int spaces) {
  std::string pad(spaces, ' ');
  std::string out;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) out += (line.empty() ? "" : pad) + line + "\n";
  return out;
}

}  // namespace

std::string print_value(const Value& v) {
  switch (v.kind) {
    case Value::Kind::kNumber: return format_number(v.number);
    case Value::Kind::kString: return quote(v.text);
    case Value::Kind::kIdent: return v.text;
    case Value::Kind::kList: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.items.size(); ++i) {
        if (i) out += ", ";
        out += print_value(v.items[i]);
      }
      return out + "]";
    }
  }
  return {};
}

std::string print_action(const Action& a) {
  std::string out = a.verb;
  if (a.args.empty() && !a.duration) return out;
  out += "(";
  bool first = true;
  for (const auto& [k, v] : a.args) {
    if (!first) out += ", ";
    first = false;
    out += k + "=" + print_value(v);
  }
  if (a.duration) {
    if (!first) out += ", ";
    out += "duration=" + format_number(*a.duration);
  }
  return out + ")";
}

std::string print_vehicle(const VehicleDecl& v) {
  std::string out = "vehicle " + v.id + " { role: " + std::string(to_string(v.role)) + "; ";
  if (const auto* abs = std::get_if<AbsolutePlacement>(&v.placement)) {
    out += "lane: " + quote(abs->lane) + "; s: " + format_number(abs->arc_s) + "; ";
  } else {
    const auto& rel = std::get<RelativePlacement>(v.placement);
    out += "anchor: " + rel.anchor + "; relation: " + std::string(to_string(rel.relation)) +
           "; offset: " + format_number(rel.offset) + "; ";
  }
  out += "speed: " + format_number(v.speed) + "; ";
  if (v.length) out += "length: " + format_number(*v.length) + "; ";
  if (v.width) out += "width: " + format_number(*v.width) + "; ";
  for (const auto& [k, val] : v.extras) out += k + ": " + print_value(val) + "; ";
  return out + "}";
}

std::string print_geometry_section(const DslDocument& doc) {
  std::string out = "geometry {\n";
  for (const auto& k : geometry_keys(doc.geometry))
    out += "  " + k + ": " + print_value(doc.geometry.at(k)) + ";\n";
  return out + "}\n";
}

std::string print_spawn_section(const DslDocument& doc) {
  std::string out = "spawn {\n";
  for (const auto& v : doc.spawn) out += "  " + print_vehicle(v) + "\n";
  return out + "}\n";
}

std::string print_behavior_section(const DslDocument& doc) {
  std::string out = "behavior {\n";
  for (const auto& s : doc.behavior) {
    out += "  " + s.target + ": ";
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
      if (i) out += " -> ";
      out += print_action(s.actions[i]);
    }
    out += ";\n";
  }
  return out + "}\n";
}

std::string print_dsl(const DslDocument& doc) {
  std::string out = "scenario " + quote(doc.name) + " {\n";
  out += indent_lines(print_geometry_section(doc), 2);
  out += indent_lines(print_spawn_section(doc), 2);
  out += indent_lines(print_behavior_section(doc), 2);
  return out + "}\n";
}

}  // namespace scenforge::dsl
