#pragma once

#include <random>
#include <string>
#include <vector>

namespace scenforge::fx {

// Random grammatical scenario text with noisy whitespace and comments.
class DslFuzzer {
 public:
  explicit DslFuzzer(std::uint64_t seed) : rng_(seed) {}

  std::string document() {
    std::string out = "scenario " + string_lit() + space() + "{" + space();
    out += "geometry" + space() + "{" + space();
    out += "map:" + space() + "\"" + ident() + "\";" + space();
    if (coin()) out += "ego_route: [\"L1\"" + space() + ", \"L2\"];" + space();
    if (coin()) out += "horizon: " + number() + ";" + space();
    out += "}" + space();

    out += "spawn {" + space();
    const int n = 1 + pick(4);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      const std::string id = i == 0 ? "ego" : "v" + std::to_string(i);
      std::string v = "vehicle " + id + space() + "{" + space();
      v += "role: " + std::string(i == 0 ? "ego" : (coin() ? "adversarial" : "background")) + ";" + space();
      if (i > 0 && coin()) {
        v += "anchor: " + ids[pick(static_cast<int>(ids.size()))] + ";" + space();
        static const char* rels[] = {"rear", "front", "left", "right"};
        v += "relation: " + std::string(rels[pick(4)]) + ";" + space();
        v += "offset: " + positive() + ";" + space();
      } else {
        v += "lane: \"L" + std::to_string(1 + pick(3)) + "\";" + space();
        if (coin()) v += "s: " + number() + ";" + space();
      }
      if (coin()) v += "speed: " + unsigned_number() + ";" + space();
      if (coin()) v += "length: " + positive() + ";" + space();
      if (coin()) v += "color: " + ident() + ";" + space();
      v += "}" + space();
      out += v;
      ids.push_back(id);
    }
    out += "}" + space();

    out += "behavior {" + space();
    for (const auto& id : ids) {
      if (!coin()) continue;
      out += id + space() + ":" + space() + action();
      const int extra = pick(3);
      for (int k = 0; k < extra; ++k) out += space() + "->" + space() + action();
      out += ";" + space();
    }
    out += "}" + space() + "}" + space();
    return out;
  }

 private:
  bool coin() { return std::uniform_int_distribution<int>(0, 1)(rng_) == 1; }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  std::string space() {
    switch (pick(5)) {
      case 0: return " ";
      case 1: return "\n  ";
      case 2: return "  \t";
      case 3: return " # note " + ident() + "\n";
      default: return "\n";
    }
  }

  std::string ident() {
    static const char* words[] = {"alpha", "two_lane", "x1", "road_b", "k"};
    return words[pick(5)];
  }

  std::string string_lit() {
    static const char* words[] = {"\"cut in\"", "\"a \\\"quoted\\\" name\"", "\"brake\"", "\"\""};
    return words[pick(4)];
  }

  std::string number() {
    static const char* nums[] = {"0", "1", "2.5", "0.50", "10", "3.25", "1e1", "-4", "007"};
    return nums[pick(9)];
  }

  std::string unsigned_number() {
    static const char* nums[] = {"0", "1", "2.5", "0.50", "10", "1e1", "007"};
    return nums[pick(7)];
  }

  std::string positive() {
    static const char* nums[] = {"1", "0.5", "8", "12.75", "2.0"};
    return nums[pick(5)];
  }

  std::string action() {
    static const char* verbs[] = {"go_straight", "brake", "sudden_brake", "tailgate", "cut_in", "drift_attack", "idle"};
    std::string a = verbs[pick(7)];
    const int nargs = pick(3);
    if (nargs == 0 && coin()) return a;
    static const char* names[] = {"decel", "gap", "side", "speed"};
    std::vector<int> order = {0, 1, 2, 3};
    std::shuffle(order.begin(), order.end(), rng_);
    a += "(";
    bool first = true;
    for (int i = 0; i < nargs; ++i) {
      if (!first) a += "," + space();
      first = false;
      const std::string name = names[order[i]];
      a += name + "=" + (name == "side" ? std::string(coin() ? "left" : "\"right\"") : number());
    }
    if (coin()) {
      if (!first) a += ", ";
      first = false;
      a += "duration=" + positive();
    }
    if (first) a += "speed=" + number();
    return a + ")";
  }

  std::mt19937_64 rng_;
};

}  // namespace scenforge::fx
