#include <gtest/gtest.h>

#include <algorithm>

#include "dsl_fuzz.hpp"
#include "scenforge/dsl.hpp"

using namespace scenforge;
using namespace scenforge::dsl;

namespace {

const char* kMinimal = R"(scenario "m" {
  geometry { map: "two_lane"; }
  spawn { vehicle ego { role: ego; lane: "L1"; } }
  behavior { ego: go_straight; }
})";

const char* kFull = R"(scenario "cut in" {
  geometry { map: "two_lane"; ego_route: ["L1", "L2"]; source: "SIM"; }
  spawn {
    vehicle ego { role: ego; lane: "L1"; s: 20; speed: 10; }
    vehicle adv1 { role: adversarial; anchor: ego; relation: rear; offset: 6; speed: 12; }
  }
  behavior {
    ego: policy;
    adv1: tailgate(gap=0.5, duration=4) -> cut_in(side=left) -> go_straight(speed=7);
  }
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  if (at != std::string::npos) s.replace(at, from.size(), to);
  return s;
}

bool has_finding(const StructureReport& r, const std::string& needle) {
  const auto all = r.findings();
  return std::any_of(all.begin(), all.end(), [&](const std::string& f) { return f.find(needle) != std::string::npos; });
}

}  // namespace

TEST(ParseDsl, MinimalDocument) {
  const auto doc = parse_dsl(kMinimal);
  EXPECT_EQ(doc.name, "m");
  EXPECT_EQ(doc.map_key().value(), "two_lane");
  ASSERT_EQ(doc.spawn.size(), 1u);
  ASSERT_EQ(doc.behavior.size(), 1u);
  EXPECT_EQ(doc.behavior[0].actions[0].verb, "go_straight");
  EXPECT_EQ(doc.spawn[0].effective_length(), 4.5);
  EXPECT_EQ(doc.spawn[0].effective_width(), 2.0);
}

TEST(ParseDsl, FullDocumentFields) {
  const auto doc = parse_dsl(kFull);
  EXPECT_EQ(doc.ego_route(), (std::vector<std::string>{"L1", "L2"}));
  EXPECT_EQ(doc.source().value(), "SIM");
  const auto* adv = doc.find_vehicle("adv1");
  ASSERT_TRUE(adv);
  EXPECT_EQ(adv->role, VehicleRole::kAdversarial);
  const auto& rel = std::get<RelativePlacement>(adv->placement);
  EXPECT_EQ(rel.anchor, "ego");
  EXPECT_EQ(rel.relation, Relation::kRear);
  EXPECT_EQ(rel.offset, 6.0);
  const auto* s = doc.schedule_for("adv1");
  ASSERT_TRUE(s);
  ASSERT_EQ(s->actions.size(), 3u);
  EXPECT_EQ(s->actions[0].number_arg("gap").value(), 0.5);
  EXPECT_EQ(s->actions[0].duration.value(), 4.0);
  EXPECT_EQ(s->actions[1].text_arg("side").value(), "left");
  EXPECT_FALSE(s->actions[1].duration);
  EXPECT_EQ(s->actions[0].pos.line, 9);
}

TEST(ParseDsl, MissingBehaviorSection) {
  try {
    parse_dsl(R"(scenario "m" { geometry { map: "a"; } spawn { vehicle ego { role: ego; lane: "L1"; } } })");
    FAIL();
  } catch (const DslError& e) {
    EXPECT_EQ(e.message(), "behavior section absent");
  }
}

TEST(ParseDsl, UndeclaredTarget) {
  try {
    parse_dsl(replace(kMinimal, "ego: go_straight;", "adv2: go_straight;"));
    FAIL();
  } catch (const DslError& e) {
    EXPECT_NE(std::string(e.what()).find("adv2"), std::string::npos);
    EXPECT_EQ(e.pos().line, 4);
  }
}

TEST(ParseDsl, DuplicateVehicleId) {
  const auto text = replace(kMinimal, "} }\n", "} vehicle ego { role: background; lane: \"L1\"; } }\n");
  try {
    parse_dsl(text);
    FAIL();
  } catch (const DslError& e) {
    EXPECT_NE(e.message().find("duplicate vehicle id"), std::string::npos);
  }
}

TEST(ParseDsl, SyntaxErrorCarriesExpectedSet) {
  try {
    parse_dsl(replace(kMinimal, "map: \"two_lane\";", "map \"two_lane\";"));
    FAIL();
  } catch (const DslError& e) {
    EXPECT_EQ(e.pos().line, 2);
    EXPECT_EQ(e.expected(), std::vector<std::string>{"':'"});
    EXPECT_EQ(std::string(e.what()).rfind("line 2, column", 0), 0u);
  }
}

TEST(ParseDsl, StrayTokenReportedOnItsLine) {
  const std::string base = kFull;
  std::vector<std::size_t> starts = {0};
  for (std::size_t i = 0; i < base.size(); ++i)
    if (base[i] == '\n') starts.push_back(i + 1);
  for (std::size_t line = 1; line < starts.size(); ++line) {
    std::string text = base;
    text.insert(starts[line], "@@ ");
    try {
      parse_dsl(text);
      ADD_FAILURE() << "line " << line + 1;
    } catch (const DslError& e) {
      EXPECT_EQ(e.pos().line, static_cast<int>(line + 1));
    }
  }
}

TEST(ParseDsl, PlacementRules) {
  EXPECT_THROW(parse_dsl(replace(kFull, "offset: 6;", "offset: 0;")), DslError);
  EXPECT_THROW(parse_dsl(replace(kFull, "offset: 6;", "offset: 6; lane: \"L1\";")), DslError);
  EXPECT_THROW(parse_dsl(replace(kFull, "relation: rear;", "relation: above;")), DslError);
  EXPECT_THROW(parse_dsl(replace(kMinimal, "role: ego;", "")), DslError);
}

TEST(PrintDsl, RoundTripFixtures) {
  for (const char* text : {kMinimal, kFull}) {
    const auto doc = parse_dsl(text);
    EXPECT_EQ(parse_dsl(print_dsl(doc)), doc);
  }
}

TEST(PrintDsl, WhitespaceInsensitive) {
  const std::string squashed = R"(scenario "m"{geometry{map:"two_lane";}spawn{vehicle ego{role:ego;lane:"L1";}}behavior{ego:go_straight;}})";
  const std::string spread = "scenario \"m\"\n{\n geometry {\n  map : \"two_lane\" ; # the road\n }\n spawn {\n"
                             "  vehicle ego { role : ego ; lane : \"L1\" ; }\n }\n behavior {\n  ego : go_straight ;\n }\n}\n";
  EXPECT_EQ(print_dsl(parse_dsl(squashed)), print_dsl(parse_dsl(spread)));
}

TEST(PrintDsl, MinimalNumberForm) {
  const auto doc = parse_dsl(replace(kFull, "gap=0.5", "gap=0.50"));
  const auto text = print_dsl(doc);
  EXPECT_NE(text.find("gap=0.5,"), std::string::npos);
  EXPECT_EQ(text.find("0.50"), std::string::npos);
  EXPECT_NE(text.find("s: 20;"), std::string::npos);
}

TEST(PrintDsl, CanonicalLayout) {
  const auto text = print_dsl(parse_dsl(kMinimal));
  EXPECT_EQ(text,
            "scenario \"m\" {\n"
            "  geometry {\n"
            "    map: \"two_lane\";\n"
            "  }\n"
            "  spawn {\n"
            "    vehicle ego { role: ego; lane: \"L1\"; s: 0; speed: 0; }\n"
            "  }\n"
            "  behavior {\n"
            "    ego: go_straight;\n"
            "  }\n"
            "}\n");
}

TEST(PrintDsl, FuzzFixedPoint) {
  fx::DslFuzzer fuzz(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto text = fuzz.document();
    DslDocument doc;
    try {
      doc = parse_dsl(text);
    } catch (const DslError& e) {
      FAIL() << e.what() << "\n" << text;
    }
    const auto printed = print_dsl(doc);
    const auto again = parse_dsl(printed);
    ASSERT_EQ(again, doc) << text;
    ASSERT_EQ(print_dsl(again), printed);
  }
}

TEST(Sections, SnippetsAssemble) {
  const auto doc = parse_dsl(kFull);
  const auto rebuilt = document_from_snippets(doc.name, print_geometry_section(doc), print_spawn_section(doc),
                                              print_behavior_section(doc));
  EXPECT_EQ(rebuilt, doc);
  EXPECT_EQ(parse_spawn_section(print_spawn_section(doc)), doc.spawn);
}

TEST(ValidateStructure, ValidFixturePasses) {
  const auto r = validate_structure(parse_dsl(kFull));
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.checks.size(), 4u);
  EXPECT_EQ(r.passed_count(), 4u);
}

TEST(ValidateStructure, MultipleEgo) {
  const auto r = validate_structure(parse_dsl(replace(kFull, "role: adversarial", "role: ego")));
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.check("unique ego")->passed);
  EXPECT_TRUE(has_finding(r, "multiple ego"));
}

TEST(ValidateStructure, TailgateWithoutGap) {
  const auto r = validate_structure(parse_dsl(replace(kFull, "tailgate(gap=0.5, duration=4)", "tailgate(duration=4)")));
  EXPECT_FALSE(r.check("required args")->passed);
  EXPECT_TRUE(has_finding(r, "missing arg gap"));
  EXPECT_TRUE(r.check("unique ego")->passed);
}

TEST(ValidateStructure, MissingMapAndEmptyBehavior) {
  const auto r = validate_structure(parse_dsl(R"(scenario "m" {
    geometry { horizon: 10; }
    spawn { vehicle ego { role: ego; lane: "L1"; } }
    behavior { }
  })"));
  EXPECT_FALSE(r.check("sections")->passed);
  EXPECT_TRUE(has_finding(r, "geometry missing map"));
  EXPECT_TRUE(has_finding(r, "behavior section empty"));
}

TEST(ValidateStructure, AnchorDeclaredLater) {
  const auto r = validate_structure(parse_dsl(R"(scenario "m" {
    geometry { map: "a"; }
    spawn {
      vehicle adv1 { role: adversarial; anchor: ego; relation: front; offset: 5; }
      vehicle ego { role: ego; lane: "L1"; }
    }
    behavior { ego: policy; }
  })"));
  EXPECT_FALSE(r.check("declared targets")->passed);
  EXPECT_TRUE(has_finding(r, "anchor 'ego'"));
}

TEST(ValidateStructure, MonotoneUnderAddedVehicle) {
  const auto before = validate_structure(parse_dsl(kFull));
  const auto after = validate_structure(
      parse_dsl(replace(kFull, "speed: 12; }", "speed: 12; }\n vehicle bg { role: background; lane: \"L2\"; }")));
  for (const auto& c : before.checks)
    if (c.passed) EXPECT_TRUE(after.check(c.name)->passed) << c.name;
}

TEST(CheckDictionary, TaxonomyOnly) {
  EXPECT_EQ(check_dictionary(parse_dsl(kFull)).custom_count(), 0u);
}

TEST(CheckDictionary, CustomVerbRetained) {
  const auto doc = parse_dsl(replace(kFull, "cut_in(side=left)", "drift_attack(level=2)"));
  const auto r = check_dictionary(doc);
  EXPECT_EQ(r.custom_count(), 1u);
  const auto it = std::find_if(r.verbs.begin(), r.verbs.end(), [](const VerbFinding& f) { return !f.known; });
  EXPECT_EQ(it->verb, "drift_attack");
  EXPECT_FALSE(it->suggestion);
  EXPECT_TRUE(validate_structure(doc).passed());
}

TEST(CheckDictionary, MisspellingSuggested) {
  const auto r = check_dictionary(parse_dsl(replace(kFull, "tailgate(", "tailgte(")));
  ASSERT_EQ(r.custom_count(), 1u);
  for (const auto& f : r.verbs)
    if (!f.known) EXPECT_EQ(f.suggestion.value(), "tailgate");
}

TEST(SemanticDictionary, SuggestAndDistance) {
  // Levenshtein oracle values by hand.
  EXPECT_EQ(edit_distance("tailgte", "tailgate"), 1);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3);
  EXPECT_EQ(edit_distance("", "abc"), 3);
  const auto& d = SemanticDictionary::standard();
  EXPECT_EQ(d.verbs().size(), 13u);
  EXPECT_EQ(d.find("tailgate")->required_args, std::vector<std::string>{"gap"});
  EXPECT_EQ(d.find("cut_in")->level, VerbLevel::kAdversarial);
  EXPECT_EQ(d.find("brake")->level, VerbLevel::kEgo);
  EXPECT_FALSE(d.suggest("zzzzzz"));
  EXPECT_THROW(SemanticDictionary({{"a", VerbLevel::kEgo, {}}, {"a", VerbLevel::kAdversarial, {}}}), ConfigError);
}
