#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scenforge/common.hpp"

// Scenario language: a three-section brace document.
//
//   document := "scenario" STRING "{" geometry spawn behavior "}"
//   geometry := "geometry" "{" pair* "}"
//   spawn    := "spawn" "{" vehicle+ "}"
//   vehicle  := "vehicle" IDENT "{" pair* "}"
//   behavior := "behavior" "{" schedule* "}"
//   schedule := IDENT ":" action ("->" action)* ";"
//   action   := IDENT ["(" arg ("," arg)* ")"]
//   arg      := IDENT "=" value
//   pair     := IDENT ":" value ";"
//   value    := NUMBER | STRING | IDENT | "[" value ("," value)* "]"
//
// '#' starts a comment that runs to the end of the line.

namespace scenforge::dsl {

struct SourcePos {
  int line = 0;
  int column = 0;
};

/// Syntax, structural and reference errors raised by the parser.
class DslError : public DataError {
 public:
  DslError(SourcePos pos, const std::string& message,
           std::vector<std::string> expected = {});
  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  SourcePos pos_;
  std::string message_;
  std::vector<std::string> expected_;
};

struct Value {
  enum class Kind { kNumber, kString, kIdent, kList };

  Kind kind = Kind::kNumber;
  double number = 0.0;
  std::string text;  // string and identifier payload
  std::vector<Value> items;
  SourcePos pos;

  static Value num(double v);
  static Value str(std::string s);
  static Value ident(std::string s);
  static Value list(std::vector<Value> items);

  bool is_text() const { return kind == Kind::kString || kind == Kind::kIdent; }
  bool operator==(const Value& other) const;  // positions ignored
};

enum class VehicleRole { kEgo, kAdversarial, kBackground };
enum class Relation { kRear, kFront, kLeft, kRight };

std::string_view to_string(VehicleRole role);
std::string_view to_string(Relation relation);
std::optional<Relation> parse_relation(std::string_view text);

struct AbsolutePlacement {
  std::string lane;
  double arc_s = 0.0;
  bool operator==(const AbsolutePlacement&) const = default;
};

struct RelativePlacement {
  std::string anchor;
  Relation relation = Relation::kRear;
  double offset = 0.0;  // > 0
  bool operator==(const RelativePlacement&) const = default;
};

using Placement = std::variant<AbsolutePlacement, RelativePlacement>;

inline constexpr double kDefaultVehicleLength = 4.5;
inline constexpr double kDefaultVehicleWidth = 2.0;

struct VehicleDecl {
  std::string id;
  VehicleRole role = VehicleRole::kBackground;
  Placement placement;
  double speed = 0.0;
  std::optional<double> length;
  std::optional<double> width;
  std::map<std::string, Value> extras;  // unrecognised attributes, kept verbatim
  SourcePos pos;

  double effective_length() const { return length.value_or(kDefaultVehicleLength); }
  double effective_width() const { return width.value_or(kDefaultVehicleWidth); }
  bool operator==(const VehicleDecl& other) const;
};

struct Action {
  std::string verb;
  std::map<std::string, Value> args;
  std::optional<double> duration;
  SourcePos pos;

  std::optional<double> number_arg(std::string_view name) const;
  std::optional<std::string> text_arg(std::string_view name) const;
  bool operator==(const Action& other) const;
};

struct Schedule {
  std::string target;
  std::vector<Action> actions;
  SourcePos pos;
  bool operator==(const Schedule& other) const;
};

struct DslDocument {
  std::string name;
  std::map<std::string, Value> geometry;
  std::vector<VehicleDecl> spawn;
  std::vector<Schedule> behavior;

  std::optional<std::string> map_key() const;
  std::vector<std::string> ego_route() const;
  std::optional<std::string> source() const;
  const VehicleDecl* find_vehicle(std::string_view id) const;
  const VehicleDecl* ego() const;  // first vehicle with role ego
  const Schedule* schedule_for(std::string_view id) const;

  bool operator==(const DslDocument& other) const;
};

DslDocument parse_dsl(std::string_view text);

std::map<std::string, Value> parse_geometry_section(std::string_view text);
std::vector<VehicleDecl> parse_spawn_section(std::string_view text);
std::vector<Schedule> parse_behavior_section(std::string_view text);

/// Canonical text: fixed key order, one declaration per line, shortest
/// round-trip numbers.
std::string print_dsl(const DslDocument& doc);
std::string print_geometry_section(const DslDocument& doc);
std::string print_spawn_section(const DslDocument& doc);
std::string print_behavior_section(const DslDocument& doc);
std::string print_value(const Value& v);
std::string print_action(const Action& a);
std::string print_vehicle(const VehicleDecl& v);

/// Builds a document from the three section snippets.
DslDocument document_from_snippets(std::string_view name, std::string_view geometry,
                                   std::string_view spawn, std::string_view behavior);

enum class VerbLevel { kEgo, kAdversarial };

struct VerbInfo {
  std::string name;
  VerbLevel level = VerbLevel::kEgo;
  std::vector<std::string> required_args;
};

class SemanticDictionary {
 public:
  explicit SemanticDictionary(std::vector<VerbInfo> verbs);
  static const SemanticDictionary& standard();

  const VerbInfo* find(std::string_view verb) const;
  const std::vector<VerbInfo>& verbs() const { return verbs_; }
  /// Closest verb within the given edit distance, ties to dictionary order.
  std::optional<std::string> suggest(std::string_view verb, int max_distance = 2) const;

 private:
  std::vector<VerbInfo> verbs_;
};

int edit_distance(std::string_view a, std::string_view b);

struct StructureCheck {
  std::string name;
  bool passed = true;
  std::vector<std::string> findings;
};

struct StructureReport {
  std::vector<StructureCheck> checks;  // sections, unique ego, declared targets, required args

  bool passed() const;
  const StructureCheck* check(std::string_view name) const;
  std::vector<std::string> findings() const;
  std::size_t passed_count() const;
};

StructureReport validate_structure(const DslDocument& doc,
                                   const SemanticDictionary& dict = SemanticDictionary::standard());

struct VerbFinding {
  std::string target;
  std::string verb;
  bool known = true;
  std::optional<std::string> suggestion;
};

struct DictionaryReport {
  std::vector<VerbFinding> verbs;

  std::size_t custom_count() const;
};

/// Flags custom verbs; custom verbs do not invalidate the document.
DictionaryReport check_dictionary(const DslDocument& doc,
                                  const SemanticDictionary& dict = SemanticDictionary::standard());

}  // namespace scenforge::dsl
