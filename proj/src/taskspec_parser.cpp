#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <span>

#include "demoforge/error.hpp"
#include "demoforge/taskspec.hpp"

namespace demoforge {

namespace {

// ---------------------------------------------------------------------------
// Lexing into a generic s-expression tree.

struct Node {
  enum class Kind { list, symbol, string } kind = Kind::symbol;
  std::string text;  // symbol or decoded string content
  std::vector<Node> children;
  SourceLoc loc;

  bool is_list() const { return kind == Kind::list; }
  bool is_symbol() const { return kind == Kind::symbol; }
  bool is_symbol(std::string_view s) const { return kind == Kind::symbol && text == s; }
};

class Reader {
 public:
  Reader(std::string_view src, std::vector<Diagnostic>& diags) : src_(src), diags_(diags) {}

  /// Reads every top-level form. Returns false when the text is not balanced.
  bool read_all(std::vector<Node>& out) {
    bool ok = true;
    while (true) {
      skip_space();
      if (pos_ >= src_.size()) break;
      if (src_[pos_] == ')') {
        error("UNBALANCED_PARENS", here(), "unexpected ')'");
        advance();
        ok = false;
        continue;
      }
      auto node = read_node();
      if (!node) {
        ok = false;
        break;
      }
      out.push_back(std::move(*node));
    }
    return ok;
  }

 private:
  SourceLoc here() const { return {line_, col_}; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
      ++col_;  // count code points, not UTF-8 continuation bytes
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
        advance();
      } else {
        break;
      }
    }
  }

  static bool is_delim(char c) {
    return c == '(' || c == ')' || c == ';' || c == '"' || c == ' ' || c == '\t' || c == '\n' ||
           c == '\r' || c == '\f' || c == '\v';
  }

  std::optional<Node> read_node() {
    const SourceLoc start = here();
    const char c = src_[pos_];
    if (c == '(') {
      advance();
      Node list;
      list.kind = Node::Kind::list;
      list.loc = start;
      while (true) {
        skip_space();
        if (pos_ >= src_.size()) {
          error("UNBALANCED_PARENS", start, "'(' is never closed");
          return std::nullopt;
        }
        if (src_[pos_] == ')') {
          advance();
          return list;
        }
        auto child = read_node();
        if (!child) return std::nullopt;
        list.children.push_back(std::move(*child));
      }
    }
    if (c == '"') {
      advance();
      Node str;
      str.kind = Node::Kind::string;
      str.loc = start;
      while (true) {
        if (pos_ >= src_.size()) {
          error("UNTERMINATED_STRING", start, "string literal is never closed");
          return std::nullopt;
        }
        const char d = src_[pos_];
        if (d == '"') {
          advance();
          return str;
        }
        if (d == '\\' && pos_ + 1 < src_.size()) {
          advance();
          const char e = src_[pos_];
          str.text.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
          advance();
          continue;
        }
        str.text.push_back(d);
        advance();
      }
    }
    Node sym;
    sym.kind = Node::Kind::symbol;
    sym.loc = start;
    while (pos_ < src_.size() && !is_delim(src_[pos_])) {
      sym.text.push_back(src_[pos_]);
      advance();
    }
    return sym;
  }

  void error(std::string code, SourceLoc loc, std::string message) {
    diags_.push_back({Severity::error, std::move(code), loc, std::move(message)});
  }

  std::string_view src_;
  std::vector<Diagnostic>& diags_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t col_ = 1;
};

// ---------------------------------------------------------------------------
// Interpreting the tree as a task specification.

bool is_identifier(std::string_view s) {
  if (s.empty() || s == "-" || s.front() == ':') return false;
  const char c = s.front();
  if (!(std::isalpha(static_cast<unsigned char>(c)) || c == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

class Interpreter {
 public:
  explicit Interpreter(std::vector<Diagnostic>& diags) : diags_(diags) {}

  std::optional<TaskSpec> run(const std::vector<Node>& forms) {
    if (forms.empty()) {
      error("MISSING_PROBLEM", {1, 1}, "expected '(define (problem <name>) ...)'");
      return std::nullopt;
    }
    if (forms.size() > 1) error("SYNTAX_ERROR", forms[1].loc, "unexpected form after the problem definition");
    const Node& def = forms.front();
    if (!def.is_list() || def.children.empty() || !def.children[0].is_symbol("define")) {
      error("MISSING_PROBLEM", def.loc, "expected '(define (problem <name>) ...)'");
      return std::nullopt;
    }
    TaskSpec spec;
    if (def.children.size() < 2 || !def.children[1].is_list() || def.children[1].children.size() != 2 ||
        !def.children[1].children[0].is_symbol("problem") ||
        !is_identifier(def.children[1].children[1].text) || !def.children[1].children[1].is_symbol()) {
      error("MISSING_PROBLEM", def.children.size() > 1 ? def.children[1].loc : def.loc,
            "expected '(problem <name>)'");
    } else {
      spec.problem_name = def.children[1].children[1].text;
    }

    std::set<std::string, std::less<>> seen_sections;
    for (std::size_t i = 2; i < def.children.size(); ++i) {
      const Node& section = def.children[i];
      if (!section.is_list() || section.children.empty() || !section.children[0].is_symbol() ||
          section.children[0].text.empty() || section.children[0].text.front() != ':') {
        error("SYNTAX_ERROR", section.loc, "expected a section such as '(:objects ...)'");
        continue;
      }
      const std::string& key = section.children[0].text;
      static const std::set<std::string, std::less<>> kKnown{
          ":domain", ":language", ":regions", ":fixtures", ":objects", ":obj_of_interest", ":init", ":goal"};
      if (!kKnown.count(key)) {
        error("UNKNOWN_SECTION", section.children[0].loc, "unknown section keyword '" + key + "'");
        continue;
      }
      if (!seen_sections.insert(key).second) {
        error("DUPLICATE_SECTION", section.children[0].loc, "section '" + key + "' appears twice");
        continue;
      }
      const std::span<const Node> body(section.children.data() + 1, section.children.size() - 1);
      if (key == ":domain") read_domain(section, body, spec);
      else if (key == ":language") read_language(body, spec);
      else if (key == ":regions") read_regions(body, spec);
      else if (key == ":fixtures") read_declarations(body, spec.fixtures);
      else if (key == ":objects") read_declarations(body, spec.objects);
      else if (key == ":obj_of_interest") read_interest(body, spec);
      else if (key == ":init") read_predicates(body, spec.init_conditions);
      else if (key == ":goal") read_goal(body, spec);
    }

    check_references(spec);
    if (has_errors(diags_)) return std::nullopt;
    return spec;
  }

 private:
  void error(std::string code, SourceLoc loc, std::string message) {
    diags_.push_back({Severity::error, std::move(code), loc, std::move(message)});
  }

  void read_domain(const Node& section, std::span<const Node> body, TaskSpec& spec) {
    if (body.size() != 1 || !body[0].is_symbol() || !is_identifier(body[0].text)) {
      error("SYNTAX_ERROR", section.loc, "expected '(:domain <name>)'");
      return;
    }
    spec.domain_name = body[0].text;
  }

  void read_language(std::span<const Node> body, TaskSpec& spec) {
    if (body.size() == 1 && body[0].kind == Node::Kind::string) {
      spec.language_instruction = body[0].text;
      return;
    }
    std::string text;
    for (const Node& n : body) {
      if (!n.is_symbol()) {
        error("SYNTAX_ERROR", n.loc, "language instruction must be plain words or one quoted string");
        return;
      }
      if (!text.empty()) text.push_back(' ');
      text += n.text;
    }
    spec.language_instruction = std::move(text);
  }

  // name name ... - class, repeated
  void read_declarations(std::span<const Node> body, std::vector<Declaration>& out) {
    std::vector<const Node*> pending;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const Node& n = body[i];
      if (!n.is_symbol()) {
        error("SYNTAX_ERROR", n.loc, "expected '<name> - <class>'");
        return;
      }
      if (n.text == "-") {
        if (pending.empty() || i + 1 >= body.size() || !body[i + 1].is_symbol() ||
            !is_identifier(body[i + 1].text)) {
          error("SYNTAX_ERROR", n.loc, "expected '<name> - <class>'");
          return;
        }
        for (const Node* name : pending) out.push_back({name->text, body[i + 1].text, name->loc});
        pending.clear();
        ++i;
        continue;
      }
      if (!is_identifier(n.text)) {
        error("SYNTAX_ERROR", n.loc, "'" + n.text + "' is not a valid instance name");
        return;
      }
      pending.push_back(&n);
    }
    if (!pending.empty()) error("SYNTAX_ERROR", pending.front()->loc, "instance '" + pending.front()->text + "' has no class");
  }

  void read_interest(std::span<const Node> body, TaskSpec& spec) {
    for (const Node& n : body) {
      if (!n.is_symbol() || !is_identifier(n.text)) {
        error("SYNTAX_ERROR", n.loc, "expected an instance name");
        continue;
      }
      spec.objects_of_interest.push_back(n.text);
      interest_locs_.push_back(n.loc);
    }
  }

  // (:ranges ((x0 y0 x1 y1))) and (:yaw_rotation ((a b))); the inner list is
  // also accepted without the extra wrapping parentheses.
  std::optional<std::vector<double>> read_tuple(const Node& field, std::size_t expected) {
    const Node* tuple = nullptr;
    if (field.children.size() == 2 && field.children[1].is_list()) {
      const Node& wrap = field.children[1];
      if (wrap.children.size() == 1 && wrap.children[0].is_list()) {
        tuple = &wrap.children[0];
      } else if (!wrap.children.empty() && wrap.children[0].is_list()) {
        error("BAD_REGION", wrap.loc, "a region may carry exactly one range tuple");
        return std::nullopt;
      } else {
        tuple = &wrap;
      }
    }
    if (!tuple || tuple->children.size() != expected) {
      error("BAD_REGION", field.loc,
            "expected " + std::to_string(expected) + " numbers in '" + field.children[0].text + "'");
      return std::nullopt;
    }
    std::vector<double> values;
    for (const Node& n : tuple->children) {
      const auto v = n.is_symbol() ? parse_number(n.text) : std::nullopt;
      if (!v) {
        error("BAD_NUMBER", n.loc, "'" + n.text + "' is not a finite number");
        return std::nullopt;
      }
      values.push_back(*v);
    }
    return values;
  }

  void read_regions(std::span<const Node> body, TaskSpec& spec) {
    for (const Node& block : body) {
      if (!block.is_list() || block.children.empty() || !block.children[0].is_symbol() ||
          !is_identifier(block.children[0].text)) {
        error("SYNTAX_ERROR", block.loc, "expected '(<region_name> (:target ...) (:ranges ...))'");
        continue;
      }
      Region region;
      region.name = block.children[0].text;
      region.loc = block.children[0].loc;
      bool have_target = false, have_ranges = false, ok = true;
      for (std::size_t i = 1; i < block.children.size(); ++i) {
        const Node& field = block.children[i];
        if (!field.is_list() || field.children.empty() || !field.children[0].is_symbol()) {
          error("SYNTAX_ERROR", field.loc, "expected a region field");
          ok = false;
          continue;
        }
        const std::string& key = field.children[0].text;
        if (key == ":target") {
          if (field.children.size() != 2 || !field.children[1].is_symbol() ||
              !is_identifier(field.children[1].text)) {
            error("SYNTAX_ERROR", field.loc, "expected '(:target <fixture>)'");
            ok = false;
            continue;
          }
          region.parent = field.children[1].text;
          have_target = true;
        } else if (key == ":ranges") {
          const auto v = read_tuple(field, 4);
          if (!v) {
            ok = false;
            continue;
          }
          region.x_min = (*v)[0];
          region.y_min = (*v)[1];
          region.x_max = (*v)[2];
          region.y_max = (*v)[3];
          have_ranges = true;
        } else if (key == ":yaw_rotation") {
          const auto v = read_tuple(field, 2);
          if (!v) {
            ok = false;
            continue;
          }
          region.yaw_min = (*v)[0];
          region.yaw_max = (*v)[1];
        } else {
          error("SYNTAX_ERROR", field.loc, "unknown region field '" + key + "'");
          ok = false;
        }
      }
      if (!have_target) {
        error("MISSING_FIELD", block.loc, "region '" + region.name + "' has no (:target ...)");
        ok = false;
      }
      if (!have_ranges) {
        error("MISSING_FIELD", block.loc, "region '" + region.name + "' has no (:ranges ...)");
        ok = false;
      }
      if (ok && (region.x_min > region.x_max || region.y_min > region.y_max)) {
        error("INVALID_RANGE", block.loc, "region '" + region.name + "' has min > max");
        ok = false;
      }
      if (ok && region.yaw_min > region.yaw_max) {
        error("INVALID_RANGE", block.loc, "region '" + region.name + "' has yaw_min > yaw_max");
        ok = false;
      }
      if (ok) spec.regions.push_back(std::move(region));
    }
  }

  std::optional<Predicate> read_predicate(const Node& n) {
    if (!n.is_list() || n.children.empty() || !n.children[0].is_symbol()) {
      error("SYNTAX_ERROR", n.loc, "expected a predicate such as '(On a b)'");
      return std::nullopt;
    }
    const auto rel = relation_from_string(n.children[0].text);
    if (!rel) {
      error("UNKNOWN_PREDICATE", n.children[0].loc, "unknown relation '" + n.children[0].text + "'");
      return std::nullopt;
    }
    Predicate p;
    p.relation = *rel;
    p.loc = n.loc;
    for (std::size_t i = 1; i < n.children.size(); ++i) {
      const Node& a = n.children[i];
      if (!a.is_symbol() || !is_identifier(a.text)) {
        error("SYNTAX_ERROR", a.loc, "predicate arguments must be names");
        return std::nullopt;
      }
      p.args.push_back(a.text);
    }
    if (p.args.size() != arity(p.relation)) {
      error("BAD_ARITY", n.loc,
            std::string(to_string(p.relation)) + " takes " + std::to_string(arity(p.relation)) +
                " argument(s), got " + std::to_string(p.args.size()));
      return std::nullopt;
    }
    return p;
  }

  void read_predicates(std::span<const Node> body, std::vector<Predicate>& out) {
    for (const Node& n : body)
      if (auto p = read_predicate(n)) out.push_back(std::move(*p));
  }

  void read_goal(std::span<const Node> body, TaskSpec& spec) {
    if (body.size() == 1 && body[0].is_list() && !body[0].children.empty() &&
        body[0].children[0].is_symbol() &&
        (body[0].children[0].text == "And" || body[0].children[0].text == "and")) {
      const auto& kids = body[0].children;
      read_predicates(std::span<const Node>(kids.data() + 1, kids.size() - 1), spec.goal_conditions);
      return;
    }
    read_predicates(body, spec.goal_conditions);
  }

  void check_references(const TaskSpec& spec) {
    std::set<std::string, std::less<>> names;
    auto declare = [&](const std::vector<Declaration>& decls) {
      for (const auto& d : decls)
        if (!names.insert(d.instance_name).second)
          error("DUPLICATE_INSTANCE", d.loc, "instance '" + d.instance_name + "' is declared twice");
    };
    declare(spec.fixtures);
    declare(spec.objects);

    std::set<std::string, std::less<>> region_names;
    for (const auto& r : spec.regions)
      if (!region_names.insert(r.qualified_name()).second)
        error("DUPLICATE_REGION", r.loc, "region '" + r.qualified_name() + "' is defined twice");

    for (std::size_t i = 0; i < spec.objects_of_interest.size(); ++i)
      if (!names.count(spec.objects_of_interest[i]))
        error("UNDECLARED_OBJECT", interest_locs_[i],
              "'" + spec.objects_of_interest[i] + "' is not a declared object or fixture");

    auto check = [&](const std::vector<Predicate>& preds) {
      for (const auto& p : preds) {
        for (std::size_t i = 0; i < p.args.size(); ++i) {
          const std::string& a = p.args[i];
          if (names.count(a)) continue;
          const bool may_be_region = (p.relation == Relation::On || p.relation == Relation::In) && i == 1;
          if (may_be_region && spec.find_region(a)) continue;
          if (may_be_region && a.find("region") != std::string::npos)
            error("UNDECLARED_REGION", p.loc, "region '" + a + "' is not defined");
          else
            error("UNDECLARED_OBJECT", p.loc, "'" + a + "' is not a declared object or fixture");
        }
      }
    };
    check(spec.init_conditions);
    check(spec.goal_conditions);
  }

  std::vector<Diagnostic>& diags_;
  std::vector<SourceLoc> interest_locs_;
};

}  // namespace

ParseResult parse_task_spec(std::string_view source) {
  ParseResult result;
  std::vector<Node> forms;
  Reader reader(source, result.diagnostics);
  if (!reader.read_all(forms)) return result;
  Interpreter interp(result.diagnostics);
  result.spec = interp.run(forms);
  return result;
}

TaskSpec parse_task_spec_or_throw(std::string_view source) {
  auto result = parse_task_spec(source);
  if (!result.ok()) {
    for (const auto& d : result.diagnostics)
      if (d.severity == Severity::error) throw Error("PARSE_ERROR", format_diagnostic(d));
    throw Error("PARSE_ERROR", "task specification rejected");
  }
  return std::move(*result.spec);
}

}  // namespace demoforge
