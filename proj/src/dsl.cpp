#include "gsynth/dsl.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <utility>

namespace gsynth {

const char* kindName(CommandKind kind) {
  switch (kind) {
    case CommandKind::Circle:
      return "circle";
    case CommandKind::Rectangle:
      return "rectangle";
    case CommandKind::Line:
      return "line";
  }
  return "?";
}

std::optional<DrawCommand> DrawCommand::fromRaw(CommandKind kind,
                                                std::array<int, 4> raw,
                                                bool arrow, bool dashed) {
  DrawCommand c;
  c.kind = kind;
  switch (kind) {
    case CommandKind::Circle:
      c.x1 = raw[0];
      c.y1 = raw[1];
      return c;
    case CommandKind::Rectangle:
      if (raw[0] == raw[2] || raw[1] == raw[3]) return std::nullopt;
      c.x1 = std::min(raw[0], raw[2]);
      c.x2 = std::max(raw[0], raw[2]);
      c.y1 = std::min(raw[1], raw[3]);
      c.y2 = std::max(raw[1], raw[3]);
      return c;
    case CommandKind::Line:
      if (raw[0] == raw[2] && raw[1] == raw[3]) return std::nullopt;
      c.arrow = arrow;
      c.dashed = dashed;
      if (!arrow && std::pair(raw[2], raw[3]) < std::pair(raw[0], raw[1])) {
        std::swap(raw[0], raw[2]);
        std::swap(raw[1], raw[3]);
      }
      c.x1 = raw[0];
      c.y1 = raw[1];
      c.x2 = raw[2];
      c.y2 = raw[3];
      return c;
  }
  return std::nullopt;
}

DrawCommand DrawCommand::circle(int x, int y) {
  return *fromRaw(CommandKind::Circle, {x, y, 0, 0}, false, false);
}

DrawCommand DrawCommand::rectangle(int x1, int y1, int x2, int y2) {
  auto c = fromRaw(CommandKind::Rectangle, {x1, y1, x2, y2}, false, false);
  if (!c) throw DslError("degenerate rectangle");
  return *c;
}

DrawCommand DrawCommand::line(int x1, int y1, int x2, int y2, bool arrow,
                              bool dashed) {
  auto c = fromRaw(CommandKind::Line, {x1, y1, x2, y2}, arrow, dashed);
  if (!c) throw DslError("zero-length line");
  return *c;
}

bool DrawCommand::onGrid(int gridSize) const {
  auto in = [gridSize](int v) { return v >= 0 && v < gridSize; };
  if (kind == CommandKind::Circle) return in(x1) && in(y1);
  return in(x1) && in(y1) && in(x2) && in(y2);
}

std::uint64_t DrawCommand::key() const {
  auto b = [](int v) { return static_cast<std::uint64_t>((v + 2048) & 0xFFF); };
  std::uint64_t k = static_cast<std::uint64_t>(kind);
  k = (k << 12) | b(x1);
  k = (k << 12) | b(y1);
  k = (k << 12) | b(x2);
  k = (k << 12) | b(y2);
  k = (k << 1) | (arrow ? 1u : 0u);
  k = (k << 1) | (dashed ? 1u : 0u);
  return k;
}

namespace {

std::pair<int, int> anchor(const DrawCommand& c) {
  if (c.kind == CommandKind::Line) {
    return std::min(std::pair(c.x1, c.y1), std::pair(c.x2, c.y2));
  }
  return {c.x1, c.y1};
}

auto fieldTuple(const DrawCommand& c) {
  return std::tuple(c.x1, c.y1, c.x2, c.y2, c.arrow, c.dashed);
}

}  // namespace

bool canonicalLess(const DrawCommand& a, const DrawCommand& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  auto pa = anchor(a);
  auto pb = anchor(b);
  if (pa != pb) return pa < pb;
  return fieldTuple(a) < fieldTuple(b);
}

std::vector<DrawCommand> canonicalize(std::span<const DrawCommand> commands) {
  std::vector<DrawCommand> out(commands.begin(), commands.end());
  std::sort(out.begin(), out.end(), canonicalLess);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Spec::Spec(std::vector<DrawCommand> commands)
    : commands_(canonicalize(commands)) {}

bool Spec::insert(const DrawCommand& c) {
  auto it = std::lower_bound(commands_.begin(), commands_.end(), c,
                             canonicalLess);
  if (it != commands_.end() && *it == c) return false;
  commands_.insert(it, c);
  return true;
}

void Spec::merge(const Spec& other) {
  std::vector<DrawCommand> out;
  out.reserve(commands_.size() + other.commands_.size());
  std::set_union(commands_.begin(), commands_.end(), other.commands_.begin(),
                 other.commands_.end(), std::back_inserter(out), canonicalLess);
  commands_ = std::move(out);
}

bool Spec::contains(const DrawCommand& c) const {
  return std::binary_search(commands_.begin(), commands_.end(), c,
                            canonicalLess);
}

std::array<int, 3> Spec::kindCounts() const {
  std::array<int, 3> counts{};
  for (const auto& c : commands_) ++counts[static_cast<int>(c.kind)];
  return counts;
}

bool Spec::isSubsetOf(const Spec& other) const {
  return std::includes(other.commands_.begin(), other.commands_.end(),
                       commands_.begin(), commands_.end(), canonicalLess);
}

std::size_t intersectionSize(const Spec& a, const Spec& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (canonicalLess(*i, *j)) {
      ++i;
    } else if (canonicalLess(*j, *i)) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

std::size_t symmetricDifference(const Spec& a, const Spec& b) {
  return a.size() + b.size() - 2 * intersectionSize(a, b);
}

double iou(const Spec& a, const Spec& b) {
  if (a.empty() && b.empty()) return 1.0;
  const auto inter = intersectionSize(a, b);
  const auto uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

int Expression::eval(std::span<const int> env) const {
  if (!var) return offset;
  const int idx = static_cast<int>(env.size()) - 1 - *var;
  if (*var < 0 || idx < 0) throw DslError("free variable in expression");
  return scale * env[static_cast<std::size_t>(idx)] + offset;
}

DrawCommand mirror(const DrawCommand& c, const Axis& axis) {
  auto r = c.coords();
  if (axis.dim == Axis::Dim::X) {
    r[0] = axis.value - r[0];
    r[2] = axis.value - r[2];
  } else {
    r[1] = axis.value - r[1];
    r[3] = axis.value - r[3];
  }
  auto m = DrawCommand::fromRaw(c.kind, r, c.arrow, c.dashed);
  if (!m) throw DslError("degenerate mirrored command");
  return *m;
}

DrawCommand evalPrimitive(const Primitive& p, std::span<const int> env) {
  std::array<int, 4> raw{};
  for (int k = 0; k < p.arity(); ++k) raw[k] = p.args[k].eval(env);
  auto c = DrawCommand::fromRaw(p.kind, raw, p.arrow, p.dashed);
  if (!c) throw DslError("degenerate primitive");
  return *c;
}

namespace {

struct Executor {
  const ExecOptions& options;
  std::vector<int> env;

  void emit(const DrawCommand& c, Spec& out) const {
    if (options.gridSize && !c.onGrid(*options.gridSize)) {
      throw DslError("command outside the grid");
    }
    out.insert(c);
  }

  void run(const Program& p, Spec& out) {
    for (const auto& s : p.statements) run(s, out);
  }

  void run(const Statement& s, Spec& out) {
    if (const auto* prim = std::get_if<Primitive>(&s.node)) {
      emit(evalPrimitive(*prim, env), out);
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      const int n = loop->bound.eval(env);
      for (int i = 0; i < n; ++i) {
        env.push_back(i);
        if (i > 0) run(loop->guarded, out);
        run(loop->body, out);
        env.pop_back();
      }
    } else {
      const auto& refl = std::get<Reflect>(s.node);
      Spec inner;
      run(refl.body, inner);
      for (const auto& c : inner) {
        out.insert(c);
        emit(mirror(c, refl.axis), out);
      }
    }
  }
};

}  // namespace

Spec execute(const Program& program, std::span<const int> env,
             const ExecOptions& options) {
  Executor ex{options, std::vector<int>(env.begin(), env.end())};
  Spec out;
  ex.run(program, out);
  return out;
}

Spec execute(const Program& program, const ExecOptions& options) {
  return execute(program, std::span<const int>{}, options);
}

int depth(const Program& program) {
  int d = 0;
  for (const auto& s : program.statements) {
    if (std::holds_alternative<Primitive>(s.node)) {
      d = std::max(d, 1);
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      d = std::max(d, 1 + std::max({1, depth(loop->guarded), depth(loop->body)}));
    } else {
      d = std::max(d, 1 + std::max(1, depth(std::get<Reflect>(s.node).body)));
    }
  }
  return d;
}

std::string Cost::str() const {
  std::ostringstream os;
  if (thirds_ % 3 == 0) {
    os << thirds_ / 3;
  } else {
    os << thirds_ << "/3";
  }
  return os.str();
}

Cost CostBreakdown::total() const {
  return Cost::whole(commandNodes + lengthTwoLoops) +
         Cost::fromThirds(std::max(0, distinctCoefficients - 1));
}

namespace {

void collect(const Expression& e, std::set<int>& out) {
  if (e.var) out.insert(e.scale);
  out.insert(e.offset);
}

void walkCost(const Program& p, const CostOptions& options, CostBreakdown& b,
              std::set<int>& coeffs) {
  for (const auto& s : p.statements) {
    ++b.commandNodes;
    if (const auto* prim = std::get_if<Primitive>(&s.node)) {
      for (int k = 0; k < prim->arity(); ++k) collect(prim->args[k], coeffs);
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      if (options.chargeBoundConstants) collect(loop->bound, coeffs);
      if (loop->bound.isConstant() && loop->bound.offset == 2) {
        ++b.lengthTwoLoops;
      }
      walkCost(loop->guarded, options, b, coeffs);
      walkCost(loop->body, options, b, coeffs);
    } else {
      walkCost(std::get<Reflect>(s.node).body, options, b, coeffs);
    }
  }
}

}  // namespace

CostBreakdown costBreakdown(const Program& program,
                            const CostOptions& options) {
  CostBreakdown b;
  std::set<int> coeffs;
  walkCost(program, options, b, coeffs);
  b.distinctCoefficients = static_cast<int>(coeffs.size());
  return b;
}

Cost cost(const Program& program, const CostOptions& options) {
  return costBreakdown(program, options).total();
}

std::vector<int> coefficients(const Program& program,
                              const CostOptions& options) {
  CostBreakdown b;
  std::set<int> coeffs;
  walkCost(program, options, b, coeffs);
  return {coeffs.begin(), coeffs.end()};
}

namespace {

struct NormalFormChecker {
  const DslLimits& limits;
  std::vector<int> env;
  // Values each variable-bearing expression observed for its variable.
  std::map<const Expression*, std::set<int>> seen;
  std::optional<std::string> error;

  bool inRange(int v) const {
    return v >= limits.coeffMin && v <= limits.coeffMax;
  }

  void checkStatic(const Expression& e, int loopsInScope) {
    if (error) return;
    if (!inRange(e.offset)) {
      error = "offset out of coefficient range";
    } else if (e.var) {
      if (*e.var < 0 || *e.var >= loopsInScope) {
        error = "free variable";
      } else if (e.scale == 0) {
        error = "zero scale on a variable term";
      } else if (!inRange(e.scale)) {
        error = "scale out of coefficient range";
      }
    }
  }

  // Static checks and loop-variable usage.
  bool references(const Program& p, int target) {
    bool used = false;
    for (const auto& s : p.statements) {
      if (const auto* prim = std::get_if<Primitive>(&s.node)) {
        for (int k = 0; k < prim->arity(); ++k) {
          used |= prim->args[k].var == target;
        }
      } else if (const auto* loop = std::get_if<For>(&s.node)) {
        used |= loop->bound.var == target;
        used |= references(loop->guarded, target + 1);
        used |= references(loop->body, target + 1);
      } else {
        used |= references(std::get<Reflect>(s.node).body, target);
      }
    }
    return used;
  }

  void statics(const Program& p, int loops) {
    for (const auto& s : p.statements) {
      if (const auto* prim = std::get_if<Primitive>(&s.node)) {
        for (int k = 0; k < prim->arity(); ++k) checkStatic(prim->args[k], loops);
      } else if (const auto* loop = std::get_if<For>(&s.node)) {
        checkStatic(loop->bound, loops);
        if (!error && !references(loop->guarded, 0) &&
            !references(loop->body, 0)) {
          error = "loop variable is never referenced";
        }
        statics(loop->guarded, loops + 1);
        statics(loop->body, loops + 1);
      } else {
        const auto& body = std::get<Reflect>(s.node).body;
        if (!error && body.empty()) error = "empty reflect body";
        statics(body, loops);
      }
    }
  }

  void observe(const Expression& e) {
    if (!e.var) return;
    const int idx = static_cast<int>(env.size()) - 1 - *e.var;
    seen[&e].insert(env[static_cast<std::size_t>(idx)]);
  }

  void registerAll(const Program& p) {
    for (const auto& s : p.statements) {
      if (const auto* prim = std::get_if<Primitive>(&s.node)) {
        for (int k = 0; k < prim->arity(); ++k) {
          if (prim->args[k].var) seen[&prim->args[k]];
        }
      } else if (const auto* loop = std::get_if<For>(&s.node)) {
        if (loop->bound.var) seen[&loop->bound];
        registerAll(loop->guarded);
        registerAll(loop->body);
      } else {
        registerAll(std::get<Reflect>(s.node).body);
      }
    }
  }

  void dynamics(const Program& p) {
    for (const auto& s : p.statements) {
      if (const auto* prim = std::get_if<Primitive>(&s.node)) {
        for (int k = 0; k < prim->arity(); ++k) observe(prim->args[k]);
      } else if (const auto* loop = std::get_if<For>(&s.node)) {
        observe(loop->bound);
        const int n = loop->bound.eval(env);
        if (n < 1 && !error) error = "loop bound evaluates below one";
        for (int i = 0; i < n; ++i) {
          env.push_back(i);
          if (i > 0) dynamics(loop->guarded);
          dynamics(loop->body);
          env.pop_back();
        }
      } else {
        dynamics(std::get<Reflect>(s.node).body);
      }
    }
  }
};

}  // namespace

std::optional<std::string> normalFormViolation(const Program& program,
                                               const DslLimits& limits) {
  if (depth(program) > limits.maxDepth) return "depth bound exceeded";
  NormalFormChecker checker{limits, {}, {}, std::nullopt};
  checker.statics(program, 0);
  if (checker.error) return checker.error;
  checker.registerAll(program);
  checker.dynamics(program);
  if (checker.error) return checker.error;
  for (const auto& [expr, values] : checker.seen) {
    if (values.size() < 2) return "variable term sees fewer than two values";
  }
  try {
    execute(program, ExecOptions{limits.gridSize});
  } catch (const DslError& e) {
    return std::string("execution failed: ") + e.what();
  }
  return std::nullopt;
}

}  // namespace gsynth
