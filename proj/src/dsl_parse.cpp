#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "scenforge/dsl.hpp"

namespace scenforge::dsl {

DslError::DslError(SourcePos pos, const std::string& message, std::vector<std::string> expected)
    : DataError([&] {
        std::string w = "line " + std::to_string(pos.line) + ", column " +
                        std::to_string(pos.column) + ": " + message;
        if (!expected.empty()) {
          w += " (expected ";
          for (std::size_t i = 0; i < expected.size(); ++i) w += (i ? ", " : "") + expected[i];
          w += ")";
        }
        return w;
      }()),
      pos_(pos),
      message_(message),
      expected_(std::move(expected)) {}

namespace {

enum class Tok {
  kString, kNumber, kIdent, kLBrace, kRBrace, kLParen, kRParen, kLBracket,
  kRBracket, kColon, kSemi, kComma, kEquals, kArrow, kEnd,
};

std::string describe(Tok t) {
  switch (t) {
    case Tok::kString: return "string";
    case Tok::kNumber: return "number";
    case Tok::kIdent: return "identifier";
    case Tok::kLBrace: return "'{'";
    case Tok::kRBrace: return "'}'";
    case Tok::kLParen: return "'('";
    case Tok::kRParen: return "')'";
    case Tok::kLBracket: return "'['";
    case Tok::kRBracket: return "']'";
    case Tok::kColon: return "':'";
    case Tok::kSemi: return "';'";
    case Tok::kComma: return "','";
    case Tok::kEquals: return "'='";
    case Tok::kArrow: return "'->'";
    case Tok::kEnd: return "end of input";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = {line_, col_};
      if (i_ >= src_.size()) {
        t.kind = Tok::kEnd;
        out.push_back(t);
        return out;
      }
      const char c = src_[i_];
      if (c == '"') {
        t.kind = Tok::kString;
        t.text = read_string();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '-' && i_ + 1 < src_.size() &&
                  (std::isdigit(static_cast<unsigned char>(src_[i_ + 1])) || src_[i_ + 1] == '.'))) {
        t.kind = Tok::kNumber;
        t.number = read_number(t.pos);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::kIdent;
        while (i_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
          t.text.push_back(advance());
      } else if (c == '-' && i_ + 1 < src_.size() && src_[i_ + 1] == '>') {
        advance();
        advance();
        t.kind = Tok::kArrow;
      } else {
        switch (c) {
          case '{': t.kind = Tok::kLBrace; break;
          case '}': t.kind = Tok::kRBrace; break;
          case '(': t.kind = Tok::kLParen; break;
          case ')': t.kind = Tok::kRParen; break;
          case '[': t.kind = Tok::kLBracket; break;
          case ']': t.kind = Tok::kRBracket; break;
          case ':': t.kind = Tok::kColon; break;
          case ';': t.kind = Tok::kSemi; break;
          case ',': t.kind = Tok::kComma; break;
          case '=': t.kind = Tok::kEquals; break;
          default:
            throw DslError(t.pos, std::string("unexpected character '") + c + "'");
        }
        advance();
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    const char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (i_ < src_.size()) {
      const char c = src_[i_];
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string read_string() {
    const SourcePos start{line_, col_};
    advance();  // opening quote
    std::string s;
    while (i_ < src_.size() && src_[i_] != '"') {
      char c = advance();
      if (c == '\n') throw DslError(start, "unterminated string");
      if (c == '\\') {
        if (i_ >= src_.size()) break;
        const char e = advance();
        switch (e) {
          case 'n': s.push_back('\n'); break;
          case 't': s.push_back('\t'); break;
          case '"': s.push_back('"'); break;
          case '\\': s.push_back('\\'); break;
          default: throw DslError(start, std::string("bad escape \\") + e);
        }
      } else {
        s.push_back(c);
      }
    }
    if (i_ >= src_.size()) throw DslError(start, "unterminated string");
    advance();
    return s;
  }

  double read_number(SourcePos pos) {
    const std::size_t begin = i_;
    if (src_[i_] == '-') advance();
    while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    if (i_ < src_.size() && src_[i_] == '.') {
      advance();
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      std::size_t j = i_ + 1;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      if (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) {
        while (i_ < j) advance();
        while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
      }
    }
    double v = 0.0;
    const char* b = src_.data() + begin;
    const char* e = src_.data() + i_;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e || !std::isfinite(v))
      throw DslError(pos, "malformed number '" + std::string(b, e) + "'");
    return v;
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(Lexer(text).run()) {}

  DslDocument document() {
    DslDocument doc;
    expect_keyword("scenario");
    doc.name = expect(Tok::kString).text;
    expect(Tok::kLBrace);
    require_section("geometry", {"spawn", "behavior"});
    doc.geometry = geometry();
    require_section("spawn", {"behavior"});
    doc.spawn = spawn();
    require_section("behavior", {});
    doc.behavior = behavior();
    expect(Tok::kRBrace);
    expect(Tok::kEnd);
    check_targets(doc);
    return doc;
  }

  std::map<std::string, Value> geometry() {
    expect_keyword("geometry");
    expect(Tok::kLBrace);
    std::map<std::string, Value> pairs;
    while (peek().kind != Tok::kRBrace) {
      const Token key = expect(Tok::kIdent);
      expect(Tok::kColon);
      Value v = value();
      expect(Tok::kSemi);
      if (!pairs.emplace(key.text, std::move(v)).second)
        throw DslError(key.pos, "duplicate geometry key '" + key.text + "'");
    }
    expect(Tok::kRBrace);
    return pairs;
  }

  std::vector<VehicleDecl> spawn() {
    const Token head = expect_keyword("spawn");
    expect(Tok::kLBrace);
    std::vector<VehicleDecl> out;
    std::set<std::string> ids;
    while (peek().kind != Tok::kRBrace) {
      if (!(peek().kind == Tok::kIdent && peek().text == "vehicle"))
        throw DslError(peek().pos, "unexpected " + describe(peek().kind) + " in spawn section",
                       {"'vehicle'", "'}'"});
      VehicleDecl v = vehicle();
      if (!ids.insert(v.id).second)
        throw DslError(v.pos, "duplicate vehicle id '" + v.id + "'");
      out.push_back(std::move(v));
    }
    if (out.empty()) throw DslError(head.pos, "spawn section declares no vehicles");
    expect(Tok::kRBrace);
    return out;
  }

  std::vector<Schedule> behavior() {
    expect_keyword("behavior");
    expect(Tok::kLBrace);
    std::vector<Schedule> out;
    while (peek().kind != Tok::kRBrace) {
      Schedule s;
      const Token target = expect(Tok::kIdent);
      s.target = target.text;
      s.pos = target.pos;
      expect(Tok::kColon);
      s.actions.push_back(action());
      while (peek().kind == Tok::kArrow) {
        next();
        s.actions.push_back(action());
      }
      expect(Tok::kSemi);
      out.push_back(std::move(s));
    }
    expect(Tok::kRBrace);
    return out;
  }

  void end() { expect(Tok::kEnd); }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  const Token& expect(Tok kind) {
    if (peek().kind != kind)
      throw DslError(peek().pos, "unexpected " + describe(peek().kind), {describe(kind)});
    return next();
  }

  const Token& expect_keyword(std::string_view word) {
    if (!(peek().kind == Tok::kIdent && peek().text == word))
      throw DslError(peek().pos, "unexpected " + describe(peek().kind),
                     {"'" + std::string(word) + "'"});
    return next();
  }

  // Reports a missing section by name instead of a bare token error.
  void require_section(std::string_view name, std::initializer_list<std::string_view> later) {
    const Token& t = peek();
    if (t.kind == Tok::kIdent && t.text == name) return;
    bool missing = t.kind == Tok::kRBrace || t.kind == Tok::kEnd;
    for (auto l : later) missing = missing || (t.kind == Tok::kIdent && t.text == l);
    if (missing) throw DslError(t.pos, std::string(name) + " section absent");
    throw DslError(t.pos, "unexpected " + describe(t.kind), {"'" + std::string(name) + "'"});
  }

  Value value() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kNumber: { Value v = Value::num(t.number); v.pos = t.pos; next(); return v; }
      case Tok::kString: { Value v = Value::str(t.text); v.pos = t.pos; next(); return v; }
      case Tok::kIdent: { Value v = Value::ident(t.text); v.pos = t.pos; next(); return v; }
      case Tok::kLBracket: {
        const SourcePos p = t.pos;
        next();
        std::vector<Value> items;
        items.push_back(value());
        while (peek().kind == Tok::kComma) {
          next();
          items.push_back(value());
        }
        expect(Tok::kRBracket);
        Value v = Value::list(std::move(items));
        v.pos = p;
        return v;
      }
      default:
        throw DslError(t.pos, "unexpected " + describe(t.kind),
                       {"number", "string", "identifier", "'['"});
    }
  }

  Action action() {
    Action a;
    const Token verb = expect(Tok::kIdent);
    a.verb = verb.text;
    a.pos = verb.pos;
    if (peek().kind != Tok::kLParen) return a;
    next();
    for (;;) {
      const Token name = expect(Tok::kIdent);
      expect(Tok::kEquals);
      Value v = value();
      if (name.text == "duration") {
        if (v.kind != Value::Kind::kNumber || v.number < 0.0)
          throw DslError(v.pos, "duration must be a non-negative number");
        if (a.duration) throw DslError(name.pos, "duplicate argument 'duration'");
        a.duration = v.number;
      } else if (!a.args.emplace(name.text, std::move(v)).second) {
        throw DslError(name.pos, "duplicate argument '" + name.text + "'");
      }
      if (peek().kind == Tok::kComma) {
        next();
        continue;
      }
      expect(Tok::kRParen);
      return a;
    }
  }

  static double number_of(const Value& v, std::string_view key) {
    if (v.kind != Value::Kind::kNumber)
      throw DslError(v.pos, "attribute '" + std::string(key) + "' must be a number");
    return v.number;
  }

  static std::string text_of(const Value& v, std::string_view key) {
    if (!v.is_text())
      throw DslError(v.pos, "attribute '" + std::string(key) + "' must be a name or string");
    return v.text;
  }

  VehicleDecl vehicle() {
    expect_keyword("vehicle");
    VehicleDecl d;
    const Token id = expect(Tok::kIdent);
    d.id = id.text;
    d.pos = id.pos;
    expect(Tok::kLBrace);
    std::map<std::string, Value> attrs;
    while (peek().kind != Tok::kRBrace) {
      const Token key = expect(Tok::kIdent);
      expect(Tok::kColon);
      Value v = value();
      expect(Tok::kSemi);
      if (!attrs.emplace(key.text, std::move(v)).second)
        throw DslError(key.pos, "duplicate attribute '" + key.text + "' on vehicle '" + d.id + "'");
    }
    expect(Tok::kRBrace);

    auto take = [&](const char* key) -> std::optional<Value> {
      auto it = attrs.find(key);
      if (it == attrs.end()) return std::nullopt;
      Value v = std::move(it->second);
      attrs.erase(it);
      return v;
    };

    auto role = take("role");
    if (!role) throw DslError(d.pos, "vehicle '" + d.id + "' has no role");
    const std::string r = text_of(*role, "role");
    if (r == "ego") d.role = VehicleRole::kEgo;
    else if (r == "adversarial") d.role = VehicleRole::kAdversarial;
    else if (r == "background") d.role = VehicleRole::kBackground;
    else throw DslError(role->pos, "unknown role '" + r + "'", {"ego", "adversarial", "background"});

    auto lane = take("lane");
    auto s = take("s");
    auto anchor = take("anchor");
    auto relation = take("relation");
    auto offset = take("offset");
    if (lane && (anchor || relation || offset))
      throw DslError(d.pos, "vehicle '" + d.id + "' mixes absolute and relative placement");
    if (lane) {
      d.placement = AbsolutePlacement{text_of(*lane, "lane"), s ? number_of(*s, "s") : 0.0};
    } else if (anchor || relation || offset) {
      if (!anchor || !relation || !offset)
        throw DslError(d.pos, "relative placement of '" + d.id + "' needs anchor, relation and offset");
      if (s) throw DslError(s->pos, "attribute 's' requires 'lane'");
      auto rel = parse_relation(text_of(*relation, "relation"));
      if (!rel) throw DslError(relation->pos, "unknown relation '" + relation->text + "'",
                               {"rear", "front", "left", "right"});
      const double off = number_of(*offset, "offset");
      if (!(off > 0.0)) throw DslError(offset->pos, "offset must be positive");
      d.placement = RelativePlacement{text_of(*anchor, "anchor"), *rel, off};
    } else {
      throw DslError(d.pos, "vehicle '" + d.id + "' has no placement (lane or anchor)");
    }
    if (auto v = take("speed")) {
      d.speed = number_of(*v, "speed");
      if (d.speed < 0.0) throw DslError(v->pos, "speed must be non-negative");
    }
    if (auto v = take("length")) {
      d.length = number_of(*v, "length");
      if (!(*d.length > 0.0)) throw DslError(v->pos, "length must be positive");
    }
    if (auto v = take("width")) {
      d.width = number_of(*v, "width");
      if (!(*d.width > 0.0)) throw DslError(v->pos, "width must be positive");
    }
    d.extras = std::move(attrs);
    return d;
  }

  static void check_targets(const DslDocument& doc) {
    for (const auto& s : doc.behavior) {
      if (!doc.find_vehicle(s.target))
        throw DslError(s.pos, "undeclared schedule target '" + s.target + "'");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Value Value::num(double v) { Value x; x.kind = Kind::kNumber; x.number = v; return x; }
Value Value::str(std::string s) { Value x; x.kind = Kind::kString; x.text = std::move(s); return x; }
Value Value::ident(std::string s) { Value x; x.kind = Kind::kIdent; x.text = std::move(s); return x; }
Value Value::list(std::vector<Value> items) {
  Value x;
  x.kind = Kind::kList;
  x.items = std::move(items);
  return x;
}

bool Value::operator==(const Value& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::kNumber: return number == o.number;
    case Kind::kString:
    case Kind::kIdent: return text == o.text;
    case Kind::kList: return items == o.items;
  }
  return false;
}

std::string_view to_string(VehicleRole role) {
  switch (role) {
    case VehicleRole::kEgo: return "ego";
    case VehicleRole::kAdversarial: return "adversarial";
    case VehicleRole::kBackground: return "background";
  }
  return "?";
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::kRear: return "rear";
    case Relation::kFront: return "front";
    case Relation::kLeft: return "left";
    case Relation::kRight: return "right";
  }
  return "?";
}

std::optional<Relation> parse_relation(std::string_view t) {
  if (t == "rear") return Relation::kRear;
  if (t == "front") return Relation::kFront;
  if (t == "left") return Relation::kLeft;
  if (t == "right") return Relation::kRight;
  return std::nullopt;
}

bool VehicleDecl::operator==(const VehicleDecl& o) const {
  return id == o.id && role == o.role && placement == o.placement && speed == o.speed &&
         length == o.length && width == o.width && extras == o.extras;
}

std::optional<double> Action::number_arg(std::string_view name) const {
  if (name == "duration") return duration;
  auto it = args.find(std::string(name));
  if (it == args.end() || it->second.kind != Value::Kind::kNumber) return std::nullopt;
  return it->second.number;
}

std::optional<std::string> Action::text_arg(std::string_view name) const {
  auto it = args.find(std::string(name));
  if (it == args.end() || !it->second.is_text()) return std::nullopt;
  return it->second.text;
}

bool Action::operator==(const Action& o) const {
  return verb == o.verb && args == o.args && duration == o.duration;
}

bool Schedule::operator==(const Schedule& o) const {
  return target == o.target && actions == o.actions;
}

std::optional<std::string> DslDocument::map_key() const {
  auto it = geometry.find("map");
  if (it == geometry.end() || !it->second.is_text()) return std::nullopt;
  return it->second.text;
}

std::vector<std::string> DslDocument::ego_route() const {
  std::vector<std::string> out;
  auto it = geometry.find("ego_route");
  if (it == geometry.end()) return out;
  if (it->second.is_text()) return {it->second.text};
  for (const auto& v : it->second.items)
    if (v.is_text()) out.push_back(v.text);
  return out;
}

std::optional<std::string> DslDocument::source() const {
  auto it = geometry.find("source");
  if (it == geometry.end() || !it->second.is_text()) return std::nullopt;
  return it->second.text;
}

const VehicleDecl* DslDocument::find_vehicle(std::string_view id) const {
  for (const auto& v : spawn)
    if (v.id == id) return &v;
  return nullptr;
}

const VehicleDecl* DslDocument::ego() const {
  for (const auto& v : spawn)
    if (v.role == VehicleRole::kEgo) return &v;
  return nullptr;
}

const Schedule* DslDocument::schedule_for(std::string_view id) const {
  for (const auto& s : behavior)
    if (s.target == id) return &s;
  return nullptr;
}

bool DslDocument::operator==(const DslDocument& o) const {
  return name == o.name && geometry == o.geometry && spawn == o.spawn && behavior == o.behavior;
}

DslDocument parse_dsl(std::string_view text) { return Parser(text).document(); }

std::map<std::string, Value> parse_geometry_section(std::string_view text) {
  Parser p(text);
  auto g = p.geometry();
  p.end();
  return g;
}

std::vector<VehicleDecl> parse_spawn_section(std::string_view text) {
  Parser p(text);
  auto s = p.spawn();
  p.end();
  return s;
}

std::vector<Schedule> parse_behavior_section(std::string_view text) {
  Parser p(text);
  auto b = p.behavior();
  p.end();
  return b;
}

DslDocument document_from_snippets(std::string_view name, std::string_view geometry,
                                   std::string_view spawn, std::string_view behavior) {
  std::string text = "scenario \"";
  for (char c : name) {
    if (c == '"' || c == '\\') text.push_back('\\');
    text.push_back(c);
  }
  text += "\" {\n";
  text += geometry;
  text += "\n";
  text += spawn;
  text += "\n";
  text += behavior;
  text += "\n}\n";
  return parse_dsl(text);
}

}  // namespace scenforge::dsl
