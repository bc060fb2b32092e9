#include <algorithm>
#include <map>
#include <tuple>

#include "gsynth/synth.hpp"
#include "synth_universe.hpp"

namespace gsynth {

namespace {

struct Unit {
  Statement stmt;
  int units = 0;
};

struct Block {
  Program program;
  int units = 0;
};

// Streams programs bottom-up: statements are built per (loop scope, remaining
// depth, unit budget) and blocks are strictly increasing subsets of them.
class Enumerator {
 public:
  Enumerator(const SearchSubspace& sigma, Cost ceiling, const DslLimits& limits,
             const std::function<bool(const Program&)>& visit)
      : sigma_(sigma), limits_(limits), ceiling_(ceiling), visit_(visit) {
    limits_.maxDepth = std::min(limits.maxDepth, sigma.maxDepth);
  }

  void run() {
    const int maxUnits = static_cast<int>(ceiling_.thirds() / 3);
    if (maxUnits < 1) return;
    const auto& pool = statements(0, limits_.maxDepth, maxUnits);
    Program p;
    streamBlocks(pool, 0, maxUnits, p);
  }

 private:
  SearchSubspace sigma_;
  DslLimits limits_;
  Cost ceiling_;
  const std::function<bool(const Program&)>& visit_;
  bool stopped_ = false;
  std::map<std::tuple<int, int, int>, std::vector<Unit>> cache_;
  std::map<std::tuple<int, int, int>, std::vector<Block>> blockCache_;

  std::vector<Expression> expressions(int scope, bool topLevelArg) const {
    std::vector<Expression> out;
    const int lo = topLevelArg ? 0 : limits_.coeffMin;
    const int hi = topLevelArg ? limits_.gridSize - 1 : limits_.coeffMax;
    for (int c = lo; c <= hi; ++c) out.push_back(Expression::constant(c));
    for (int v = 0; v < scope; ++v) {
      for (int a = limits_.coeffMin; a <= limits_.coeffMax; ++a) {
        if (a == 0) continue;
        for (int b = limits_.coeffMin; b <= limits_.coeffMax; ++b) {
          out.push_back(Expression::affine(a, v, b));
        }
      }
    }
    return out;
  }

  void primitives(int scope, std::vector<Unit>& out) const {
    const auto exprs = expressions(scope, scope == 0);
    const auto n = exprs.size();
    struct Flavor {
      CommandKind kind;
      bool arrow;
      bool dashed;
    };
    const Flavor flavors[] = {{CommandKind::Circle, false, false},
                              {CommandKind::Rectangle, false, false},
                              {CommandKind::Line, false, false},
                              {CommandKind::Line, false, true},
                              {CommandKind::Line, true, false},
                              {CommandKind::Line, true, true}};
    for (const auto& f : flavors) {
      Primitive p;
      p.kind = f.kind;
      p.arrow = f.arrow;
      p.dashed = f.dashed;
      const int arity = p.arity();
      std::vector<std::size_t> idx(static_cast<std::size_t>(arity), 0);
      while (true) {
        for (int k = 0; k < arity; ++k) p.args[k] = exprs[idx[k]];
        bool keep = true;
        if (scope == 0) {
          // Ground primitives must draw something, written in normalized
          // argument order so each command appears once.
          std::array<int, 4> raw{};
          for (int k = 0; k < arity; ++k) raw[k] = p.args[k].offset;
          if (p.kind != CommandKind::Circle) {
            const auto c = DrawCommand::fromRaw(p.kind, raw, p.arrow, p.dashed);
            keep = c && c->coords() == raw;
          }
        }
        if (keep) out.push_back({Statement{p}, 1});
        int k = arity - 1;
        while (k >= 0 && ++idx[k] == n) idx[k--] = 0;
        if (k < 0) break;
      }
    }
  }

  const std::vector<Unit>& statements(int scope, int depthLeft, int maxUnits) {
    const auto key = std::tuple(scope, depthLeft, maxUnits);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::vector<Unit> out;
    if (depthLeft >= 1 && maxUnits >= 1) {
      primitives(scope, out);
    }
    if (depthLeft >= 2 && sigma_.loops) {
      for (const auto& bound : expressions(scope, false)) {
        if (bound.isConstant() && bound.offset < 1) continue;
        const int header = bound.isConstant() && bound.offset == 2 ? 2 : 1;
        const int room = maxUnits - header;
        if (room < 1) continue;
        const auto& inner = blocks(scope + 1, depthLeft - 1, room);
        for (const auto& g : inner) {
          for (const auto& b : inner) {
            if (g.units + b.units > room) continue;
            if (g.program.empty() && b.program.empty()) continue;
            For f;
            f.bound = bound;
            f.guarded = g.program;
            f.body = b.program;
            out.push_back({Statement{std::move(f)}, header + g.units + b.units});
          }
        }
      }
    }
    if (depthLeft >= 2 && sigma_.reflects && maxUnits >= 2) {
      const auto& inner = blocks(scope, depthLeft - 1, maxUnits - 1);
      for (int dim = 0; dim < 2; ++dim) {
        for (int v = 0; v <= 2 * (limits_.gridSize - 1); ++v) {
          for (const auto& b : inner) {
            if (b.program.empty()) continue;
            Reflect r;
            r.axis = {dim == 0 ? Axis::Dim::X : Axis::Dim::Y, v};
            r.body = b.program;
            out.push_back({Statement{std::move(r)}, 1 + b.units});
          }
        }
      }
    }
    std::vector<std::pair<std::string, Unit>> keyed;
    keyed.reserve(out.size());
    for (auto& u : out) keyed.emplace_back(detail::statementKey(u.stmt), std::move(u));
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    out.clear();
    for (auto& [k, u] : keyed) out.push_back(std::move(u));
    return cache_.emplace(key, std::move(out)).first->second;
  }

  // Every block (including the empty one) over the statement pool.
  const std::vector<Block>& blocks(int scope, int depthLeft, int maxUnits) {
    const auto key = std::tuple(scope, depthLeft, maxUnits);
    if (auto it = blockCache_.find(key); it != blockCache_.end()) {
      return it->second;
    }
    const auto& pool = statements(scope, depthLeft, maxUnits);
    std::vector<Block> out;
    Block cur;
    collect(pool, 0, maxUnits, cur, out);
    return blockCache_.emplace(key, std::move(out)).first->second;
  }

  void collect(const std::vector<Unit>& pool, std::size_t from, int room,
               Block& cur, std::vector<Block>& out) {
    out.push_back(cur);
    for (std::size_t i = from; i < pool.size(); ++i) {
      if (pool[i].units > room) continue;
      cur.program.statements.push_back(pool[i].stmt);
      cur.units += pool[i].units;
      collect(pool, i + 1, room - pool[i].units, cur, out);
      cur.units -= pool[i].units;
      cur.program.statements.pop_back();
    }
  }

  void streamBlocks(const std::vector<Unit>& pool, std::size_t from, int room,
                    Program& cur) {
    for (std::size_t i = from; i < pool.size() && !stopped_; ++i) {
      if (pool[i].units > room) continue;
      cur.statements.push_back(pool[i].stmt);
      if (cost(cur) <= ceiling_ && !normalFormViolation(cur, limits_)) {
        if (!visit_(cur)) stopped_ = true;
      }
      streamBlocks(pool, i + 1, room - pool[i].units, cur);
      cur.statements.pop_back();
    }
  }
};

}  // namespace

void enumerateSubspace(const SearchSubspace& sigma, Cost ceiling,
                       const DslLimits& limits,
                       const std::function<bool(const Program&)>& visit) {
  Enumerator(sigma, ceiling, limits, visit).run();
}

}  // namespace gsynth
