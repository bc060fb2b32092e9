#include "gsynth/syntax.hpp"

#include <cctype>
#include <charconv>
#include <sstream>
#include <vector>

namespace gsynth {

namespace {

std::string varName(int level) {
  static constexpr std::string_view kNames = "ijklmn";
  if (level < static_cast<int>(kNames.size())) {
    return std::string(1, kNames[static_cast<std::size_t>(level)]);
  }
  return "v" + std::to_string(level);
}

}  // namespace

std::string formatExpression(const Expression& e, int loopsInScope) {
  if (!e.var) return std::to_string(e.offset);
  std::string out;
  const std::string name = varName(loopsInScope - 1 - *e.var);
  if (e.scale == 1) {
    out = name;
  } else {
    out = std::to_string(e.scale) + "*" + name;
  }
  if (e.offset > 0) out += "+" + std::to_string(e.offset);
  if (e.offset < 0) out += std::to_string(e.offset);
  return out;
}

namespace {

std::string formatPrimitive(const Primitive& p, int loops) {
  std::string out = kindName(p.kind);
  out += "(";
  for (int k = 0; k < p.arity(); ++k) {
    if (k) out += ",";
    out += formatExpression(p.args[k], loops);
  }
  if (p.arrow) out += ",arrow";
  if (p.dashed) out += ",dashed";
  out += ")";
  return out;
}

std::string axisText(const Axis& a) {
  return std::string(a.dim == Axis::Dim::X ? "x" : "y") + "=" +
         std::to_string(a.value);
}

void compact(const Program& p, int loops, std::string& out) {
  bool first = true;
  for (const auto& s : p.statements) {
    if (!first) out += "; ";
    first = false;
    if (const auto* prim = std::get_if<Primitive>(&s.node)) {
      out += formatPrimitive(*prim, loops);
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      const std::string v = varName(loops);
      out += "for(" + v + "<" + formatExpression(loop->bound, loops) + "){";
      if (!loop->guarded.empty()) {
        out += "if(" + v + ">0){";
        compact(loop->guarded, loops + 1, out);
        out += "}";
        if (!loop->body.empty()) out += "; ";
      }
      compact(loop->body, loops + 1, out);
      out += "}";
    } else {
      const auto& r = std::get<Reflect>(s.node);
      out += "reflect(" + axisText(r.axis) + "){";
      compact(r.body, loops, out);
      out += "}";
    }
  }
}

void indented(const Program& p, int loops, int indent, std::ostringstream& os) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& s : p.statements) {
    if (const auto* prim = std::get_if<Primitive>(&s.node)) {
      os << pad << formatPrimitive(*prim, loops) << "\n";
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      const std::string v = varName(loops);
      os << pad << "for(" << v << "<" << formatExpression(loop->bound, loops)
         << ")\n";
      if (!loop->guarded.empty()) {
        os << pad << " if(" << v << ">0)\n";
        indented(loop->guarded, loops + 1, indent + 2, os);
      }
      indented(loop->body, loops + 1, indent + 1, os);
    } else {
      const auto& r = std::get<Reflect>(s.node);
      os << pad << "reflect(" << axisText(r.axis) << ")\n";
      indented(r.body, loops, indent + 1, os);
    }
  }
}

}  // namespace

std::string formatProgram(const Program& p, SourceStyle style) {
  if (style == SourceStyle::Compact) {
    std::string out;
    compact(p, 0, out);
    return out;
  }
  std::ostringstream os;
  indented(p, 0, 0, os);
  return os.str();
}

std::string formatCommand(const DrawCommand& c) {
  std::ostringstream os;
  switch (c.kind) {
    case CommandKind::Circle:
      os << "Circle(" << c.x1 << "," << c.y1 << ")";
      break;
    case CommandKind::Rectangle:
      os << "Rectangle(" << c.x1 << "," << c.y1 << "," << c.x2 << "," << c.y2
         << ")";
      break;
    case CommandKind::Line:
      os << "Line(" << c.x1 << "," << c.y1 << "," << c.x2 << "," << c.y2;
      if (c.arrow) os << ",arrow";
      if (c.dashed) os << ",dashed";
      os << ")";
      break;
  }
  return os.str();
}

std::string formatSpec(const Spec& s) {
  std::string out;
  for (const auto& c : s) {
    out += formatCommand(c);
    out += "\n";
  }
  return out;
}

int printedLineCount(const Program& p) {
  int n = 0;
  for (const auto& s : p.statements) {
    ++n;
    if (const auto* loop = std::get_if<For>(&s.node)) {
      if (!loop->guarded.empty()) ++n;
      n += printedLineCount(loop->guarded) + printedLineCount(loop->body);
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      n += printedLineCount(r->body);
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Program program() {
    Program p = block();
    skipSpace();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return p;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<std::string> scope_;  // loop variable names, outermost first

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at offset " + std::to_string(pos_));
  }

  void skipSpace() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
  }

  bool peek(char c) {
    skipSpace();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skipSpace();
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_')) {
      ++pos_;
    }
    if (start == pos_ ||
        std::isdigit(static_cast<unsigned char>(src_[start]))) {
      pos_ = start;
      fail("expected identifier");
    }
    return std::string(src_.substr(start, pos_ - start));
  }

  std::optional<int> number() {
    skipSpace();
    int value = 0;
    auto [ptr, ec] = std::from_chars(src_.data() + pos_,
                                     src_.data() + src_.size(), value);
    if (ec != std::errc()) return std::nullopt;
    pos_ = static_cast<std::size_t>(ptr - src_.data());
    return value;
  }

  int integer() {
    int sign = 1;
    if (accept('-')) sign = -1;
    auto v = number();
    if (!v) fail("expected integer");
    return sign * *v;
  }

  int lookupVar(const std::string& name) const {
    for (int k = static_cast<int>(scope_.size()) - 1; k >= 0; --k) {
      if (scope_[static_cast<std::size_t>(k)] == name) {
        return static_cast<int>(scope_.size()) - 1 - k;
      }
    }
    throw ParseError("unbound variable '" + name + "'");
  }

  Expression expression() {
    std::optional<int> var;
    int scale = 0;
    int offset = 0;
    bool firstTerm = true;
    while (true) {
      int sign = 1;
      if (accept('-')) {
        sign = -1;
      } else if (!firstTerm) {
        if (!accept('+')) break;
        if (accept('-')) sign = -1;
      }
      firstTerm = false;
      skipSpace();
      if (auto n = number()) {
        if (accept('*')) {
          const int v = lookupVar(identifier());
          if (var && *var != v) fail("expressions reference one variable");
          var = v;
          scale += sign * *n;
        } else {
          offset += sign * *n;
        }
      } else {
        const int v = lookupVar(identifier());
        if (var && *var != v) fail("expressions reference one variable");
        var = v;
        scale += sign;
      }
    }
    if (var && scale == 0) return Expression::constant(offset);
    if (var) return Expression::affine(scale, *var, offset);
    return Expression::constant(offset);
  }

  Program block() {
    Program p;
    while (true) {
      while (accept(';')) {
      }
      skipSpace();
      if (pos_ >= src_.size() || peek('}')) break;
      p.statements.push_back(statement());
    }
    return p;
  }

  Statement statement() {
    const std::string word = identifier();
    if (word == "circle" || word == "rectangle" || word == "line") {
      Primitive prim;
      prim.kind = word == "circle"      ? CommandKind::Circle
                  : word == "rectangle" ? CommandKind::Rectangle
                                        : CommandKind::Line;
      expect('(');
      for (int k = 0; k < prim.arity(); ++k) {
        if (k) expect(',');
        prim.args[static_cast<std::size_t>(k)] = expression();
      }
      while (accept(',')) {
        const std::string flag = identifier();
        if (prim.kind != CommandKind::Line) fail("flags apply to lines only");
        if (flag == "arrow") {
          prim.arrow = true;
        } else if (flag == "dashed") {
          prim.dashed = true;
        } else {
          fail("unknown line flag '" + flag + "'");
        }
      }
      expect(')');
      return Statement{prim};
    }
    if (word == "for") {
      expect('(');
      const std::string name = identifier();
      expect('<');
      For loop;
      loop.bound = expression();
      expect(')');
      expect('{');
      scope_.push_back(name);
      skipSpace();
      const std::size_t save = pos_;
      if (src_.substr(pos_, 2) == "if") {
        pos_ += 2;
        expect('(');
        if (identifier() != name) fail("guard must test the loop variable");
        expect('>');
        if (integer() != 0) fail("guard must be 'Var > 0'");
        expect(')');
        expect('{');
        loop.guarded = block();
        expect('}');
      } else {
        pos_ = save;
      }
      loop.body = block();
      scope_.pop_back();
      expect('}');
      return Statement{std::move(loop)};
    }
    if (word == "reflect") {
      expect('(');
      const std::string dim = identifier();
      if (dim != "x" && dim != "y") fail("axis must be x or y");
      expect('=');
      Reflect r;
      r.axis = {dim == "x" ? Axis::Dim::X : Axis::Dim::Y, integer()};
      expect(')');
      expect('{');
      r.body = block();
      expect('}');
      return Statement{std::move(r)};
    }
    fail("unknown statement '" + word + "'");
  }
};

}  // namespace

Program parseProgram(std::string_view source) { return Parser(source).program(); }

}  // namespace gsynth
