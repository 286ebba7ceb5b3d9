#include "confab/constraint.hpp"

#include <cctype>
#include <cstdlib>

namespace confab {

const char* compare_op_text(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

namespace {

struct Token {
  enum class Kind { Ident, Number, String, Op, LParen, RParen, End };
  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
};

class Lexer {
public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Result<std::vector<Token>> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
        continue;
      }
      if (c == '(') {
        out.push_back({Token::Kind::LParen, "(", 0});
        ++pos_;
        continue;
      }
      if (c == ')') {
        out.push_back({Token::Kind::RParen, ")", 0});
        ++pos_;
        continue;
      }
      if (c == '"') {
        std::string s;
        ++pos_;
        while (pos_ < src_.size() && src_[pos_] != '"') {
          s.push_back(src_[pos_++]);
        }
        if (pos_ >= src_.size()) return make_error("parse", "unterminated string literal");
        ++pos_;
        out.push_back({Token::Kind::String, s, 0});
        continue;
      }
      if (auto op = lex_operator()) {
        out.push_back({Token::Kind::Op, *op, 0});
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '-' && pos_ + 1 < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        size_t start = pos_;
        if (c == '-') ++pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
          ++pos_;
        }
        std::string t = src_.substr(start, pos_ - start);
        out.push_back({Token::Kind::Number, t, std::strtod(t.c_str(), nullptr)});
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        out.push_back({Token::Kind::Ident, src_.substr(start, pos_ - start), 0});
        continue;
      }
      return make_error("parse", std::string("unexpected character '") + c + "' in constraint");
    }
    out.push_back({Token::Kind::End, "", 0});
    return out;
  }

private:
  static bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '/' ||
           c == ':' || c == '.' || c == '-';
  }

  std::optional<std::string> lex_operator() {
    static const char* kTwoByte[] = {"!=", "<=", ">="};
    for (const char* op : kTwoByte) {
      if (src_.compare(pos_, 2, op) == 0) {
        pos_ += 2;
        return std::string(op);
      }
    }
    // UTF-8 comparison glyphs.
    struct Glyph { const char* utf8; const char* ascii; };
    static const Glyph kGlyphs[] = {
        {"\xE2\x89\xA0", "!="}, {"\xE2\x89\xA4", "<="}, {"\xE2\x89\xA5", ">="}};
    for (const auto& g : kGlyphs) {
      if (src_.compare(pos_, 3, g.utf8) == 0) {
        pos_ += 3;
        return std::string(g.ascii);
      }
    }
    char c = src_[pos_];
    if (c == '=' || c == '<' || c == '>') {
      ++pos_;
      return std::string(1, c);
    }
    return std::nullopt;
  }

  const std::string& src_;
  size_t pos_ = 0;
};

Result<CompareOp> op_from_text(const std::string& t) {
  if (t == "=") return CompareOp::Eq;
  if (t == "!=") return CompareOp::Ne;
  if (t == "<") return CompareOp::Lt;
  if (t == "<=") return CompareOp::Le;
  if (t == ">") return CompareOp::Gt;
  if (t == ">=") return CompareOp::Ge;
  return make_error("parse", "unknown comparison operator: " + t);
}

class Parser {
public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Result<ConstraintPtr> parse() {
    auto e = parse_or();
    if (!e.ok()) return e;
    if (peek().kind != Token::Kind::End) {
      return make_error("parse", "trailing tokens after constraint expression");
    }
    return e;
  }

private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }
  bool accept_ident(const char* word) {
    if (peek().kind == Token::Kind::Ident && peek().text == word) {
      ++pos_;
      return true;
    }
    return false;
  }

  Result<ConstraintPtr> parse_or() {
    auto lhs = parse_and();
    if (!lhs.ok()) return lhs;
    ConstraintPtr node = lhs.value();
    while (accept_ident("OR")) {
      auto rhs = parse_and();
      if (!rhs.ok()) return rhs;
      auto parent = std::make_shared<ConstraintNode>();
      parent->kind = ConstraintNode::Kind::Or;
      parent->children = {node, rhs.value()};
      node = parent;
    }
    return node;
  }

  Result<ConstraintPtr> parse_and() {
    auto lhs = parse_unary();
    if (!lhs.ok()) return lhs;
    ConstraintPtr node = lhs.value();
    while (accept_ident("AND")) {
      auto rhs = parse_unary();
      if (!rhs.ok()) return rhs;
      auto parent = std::make_shared<ConstraintNode>();
      parent->kind = ConstraintNode::Kind::And;
      parent->children = {node, rhs.value()};
      node = parent;
    }
    return node;
  }

  Result<ConstraintPtr> parse_unary() {
    if (accept_ident("NOT")) {
      auto inner = parse_unary();
      if (!inner.ok()) return inner;
      auto node = std::make_shared<ConstraintNode>();
      node->kind = ConstraintNode::Kind::Not;
      node->children = {inner.value()};
      return ConstraintPtr(node);
    }
    if (peek().kind == Token::Kind::LParen) {
      take();
      auto inner = parse_or();
      if (!inner.ok()) return inner;
      if (peek().kind != Token::Kind::RParen) {
        return make_error("parse", "expected ')'");
      }
      take();
      return inner;
    }
    return parse_atom();
  }

  Result<ConstraintPtr> parse_atom() {
    if (peek().kind != Token::Kind::Ident) {
      return make_error("parse", "expected field path, count(...), or NOT");
    }
    if (peek().text == "count") {
      return parse_count();
    }
    Token path = take();
    auto node = std::make_shared<ConstraintNode>();
    node->path = path.text;
    if (peek().kind == Token::Kind::Op) {
      auto op = op_from_text(take().text);
      if (!op.ok()) return op.error();
      node->kind = ConstraintNode::Kind::Compare;
      node->op = op.value();
      auto lit = parse_literal();
      if (!lit.ok()) return lit.error();
      node->literal = lit.value();
      return ConstraintPtr(node);
    }
    // Bare boolean field, shorthand for `path = true`.
    node->kind = ConstraintNode::Kind::BoolField;
    return ConstraintPtr(node);
  }

  Result<Json> parse_literal() {
    Token t = take();
    switch (t.kind) {
      case Token::Kind::Number:
        if (t.text.find('.') == std::string::npos) {
          return Json(static_cast<long long>(std::strtoll(t.text.c_str(), nullptr, 10)));
        }
        return Json(t.number);
      case Token::Kind::String:
        return Json(t.text);
      case Token::Kind::Ident:
        if (t.text == "true") return Json(true);
        if (t.text == "false") return Json(false);
        // Unquoted words compare as strings, matching enumeration domains.
        return Json(t.text);
      default:
        return make_error("parse", "expected literal");
    }
  }

  Result<ConstraintPtr> parse_count() {
    take(); // count
    if (peek().kind != Token::Kind::LParen) return make_error("parse", "expected '(' after count");
    take();
    if (!accept_ident("service")) return make_error("parse", "expected 'service' in count(...)");
    if (peek().kind != Token::Kind::Ident) return make_error("parse", "expected service name");
    auto node = std::make_shared<ConstraintNode>();
    node->kind = ConstraintNode::Kind::ServiceCount;
    node->service = take().text;
    node->min_level = 1;
    if (accept_ident("level")) {
      if (peek().kind != Token::Kind::Op || peek().text != ">=") {
        return make_error("parse", "count level bound must use >=");
      }
      take();
      if (peek().kind != Token::Kind::Number) return make_error("parse", "expected level integer");
      node->min_level = static_cast<int>(take().number);
    }
    if (peek().kind != Token::Kind::RParen) return make_error("parse", "expected ')' after count");
    take();
    if (peek().kind != Token::Kind::Op) return make_error("parse", "expected comparison after count(...)");
    auto op = op_from_text(take().text);
    if (!op.ok()) return op.error();
    node->op = op.value();
    if (peek().kind != Token::Kind::Number) return make_error("parse", "expected count threshold");
    node->threshold = static_cast<long>(take().number);
    return ConstraintPtr(node);
  }

  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

Result<bool> compare_values(const Json& lhs, CompareOp op, const Json& rhs) {
  if (lhs.is_number() && rhs.is_number()) {
    double a = lhs.get<double>();
    double b = rhs.get<double>();
    switch (op) {
      case CompareOp::Eq: return a == b;
      case CompareOp::Ne: return a != b;
      case CompareOp::Lt: return a < b;
      case CompareOp::Le: return a <= b;
      case CompareOp::Gt: return a > b;
      case CompareOp::Ge: return a >= b;
    }
  }
  if (lhs.is_string() && rhs.is_string()) {
    const auto& a = lhs.get_ref<const std::string&>();
    const auto& b = rhs.get_ref<const std::string&>();
    switch (op) {
      case CompareOp::Eq: return a == b;
      case CompareOp::Ne: return a != b;
      case CompareOp::Lt: return a < b;
      case CompareOp::Le: return a <= b;
      case CompareOp::Gt: return a > b;
      case CompareOp::Ge: return a >= b;
    }
  }
  if (lhs.is_boolean() && rhs.is_boolean()) {
    if (op == CompareOp::Eq) return lhs == rhs;
    if (op == CompareOp::Ne) return lhs != rhs;
    return make_error("evaluation", "ordering comparison on booleans");
  }
  return make_error("evaluation", "type mismatch in comparison");
}

bool compare_long(long a, CompareOp op, long b) {
  switch (op) {
    case CompareOp::Eq: return a == b;
    case CompareOp::Ne: return a != b;
    case CompareOp::Lt: return a < b;
    case CompareOp::Le: return a <= b;
    case CompareOp::Gt: return a > b;
    case CompareOp::Ge: return a >= b;
  }
  return false;
}

Result<bool> eval_node(const ConstraintNode& node,
                       const std::map<DeviceId, DeviceState>& states) {
  switch (node.kind) {
    case ConstraintNode::Kind::Compare: {
      for (const auto& [id, state] : states) {
        Json scratch;
        const Json* field = state_field(state, node.path, scratch);
        if (field == nullptr) {
          return make_error("evaluation", "unknown path " + node.path + " on device " + id);
        }
        auto r = compare_values(*field, node.op, node.literal);
        if (!r.ok()) return r;
        if (!r.value()) return false;
      }
      return true;
    }
    case ConstraintNode::Kind::BoolField: {
      for (const auto& [id, state] : states) {
        Json scratch;
        const Json* field = state_field(state, node.path, scratch);
        if (field == nullptr) {
          return make_error("evaluation", "unknown path " + node.path + " on device " + id);
        }
        if (!field->is_boolean()) {
          return make_error("evaluation", "path " + node.path + " is not boolean");
        }
        if (!field->get<bool>()) return false;
      }
      return true;
    }
    case ConstraintNode::Kind::ServiceCount: {
      long count = 0;
      for (const auto& [id, state] : states) {
        (void)id;
        auto it = state.provided_services.find(node.service);
        if (it != state.provided_services.end() && it->second >= node.min_level) {
          ++count;
        }
      }
      return compare_long(count, node.op, node.threshold);
    }
    case ConstraintNode::Kind::Not: {
      auto inner = eval_node(*node.children[0], states);
      if (!inner.ok()) return inner;
      return !inner.value();
    }
    case ConstraintNode::Kind::And:
    case ConstraintNode::Kind::Or: {
      // Strict evaluation: errors surface regardless of the other side.
      auto lhs = eval_node(*node.children[0], states);
      if (!lhs.ok()) return lhs;
      auto rhs = eval_node(*node.children[1], states);
      if (!rhs.ok()) return rhs;
      return node.kind == ConstraintNode::Kind::And ? (lhs.value() && rhs.value())
                                                    : (lhs.value() || rhs.value());
    }
  }
  return make_error("evaluation", "malformed constraint node");
}

} // namespace

const Json* state_field(const DeviceState& s, const std::string& path, Json& scratch) {
  auto it = s.current_values.find(path);
  if (it != s.current_values.end()) return &it->second;
  if (path == "charge_pct") {
    scratch = s.charge_pct;
    return &scratch;
  }
  if (path == "online") {
    scratch = s.online;
    return &scratch;
  }
  return nullptr;
}

Result<Constraint> parse_constraint(const std::string& text) {
  Lexer lexer(text);
  auto tokens = lexer.run();
  if (!tokens.ok()) return tokens.error();
  Parser parser(std::move(tokens).take());
  auto root = parser.parse();
  if (!root.ok()) return root.error();
  Constraint c;
  c.root = root.value();
  c.text = text;
  return c;
}

Result<bool> evaluate_constraint(const Constraint& c,
                                 const std::map<DeviceId, DeviceState>& states) {
  if (!c.valid()) return make_error("evaluation", "empty constraint");
  return eval_node(*c.root, states);
}

Json BusinessScenario::to_json() const {
  Json members = Json::array();
  for (const auto& d : member_devices) members.push_back(d);
  Json cs = Json::array();
  for (const auto& c : constraints) cs.push_back(c.text);
  return Json{{"scenario_id", scenario_id}, {"members", members}, {"constraints", cs}};
}

Result<BusinessScenario> BusinessScenario::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("scenario_id") || !j.contains("members")) {
    return make_error("parse", "scenario needs scenario_id and members");
  }
  BusinessScenario s;
  s.scenario_id = j["scenario_id"].get<std::string>();
  for (const auto& m : j["members"]) s.member_devices.insert(m.get<std::string>());
  if (s.member_devices.empty()) {
    return make_error("validation", "scenario member set empty: " + s.scenario_id);
  }
  for (const auto& cj : j.value("constraints", Json::array())) {
    auto c = parse_constraint(cj.get<std::string>());
    if (!c.ok()) return c.error();
    s.constraints.push_back(c.value());
  }
  return s;
}

} // namespace confab
