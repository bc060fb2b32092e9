#include "synth_universe.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "gsynth/json_io.hpp"

namespace gsynth::detail {

namespace {

using Raw = std::array<int, 4>;

std::vector<Raw> rawForms(const DrawCommand& c) {
  const Raw r = c.coords();
  switch (c.kind) {
    case CommandKind::Circle:
      return {r};
    case CommandKind::Rectangle:
      return {r,
              {r[2], r[1], r[0], r[3]},
              {r[0], r[3], r[2], r[1]},
              {r[2], r[3], r[0], r[1]}};
    case CommandKind::Line:
      if (c.arrow) return {r};
      return {r, {r[2], r[3], r[0], r[1]}};
  }
  return {r};
}

Raw add(const Raw& a, const Raw& d, int k) {
  return {a[0] + k * d[0], a[1] + k * d[1], a[2] + k * d[2], a[3] + k * d[3]};
}

bool isZero(const Raw& d) { return d == Raw{0, 0, 0, 0}; }

class Builder {
 public:
  Builder(const Spec& spec, const SearchSubspace& sigma, const DslLimits& limits)
      : sigma_(sigma), limits_(limits) {
    if (spec.size() > static_cast<std::size_t>(kMaxSpecSize)) {
      throw std::invalid_argument("spec has more than " +
                                  std::to_string(kMaxSpecSize) + " commands");
    }
    if (limits.coeffMax - limits.coeffMin + 1 > 64 ||
        limits.coeffMin > limits.coeffMax) {
      throw std::invalid_argument("coefficient range must span 1..64 values");
    }
    u_.commands = spec.commands();
    u_.coeffMin = limits.coeffMin;
    for (std::size_t i = 0; i < u_.commands.size(); ++i) {
      index_[u_.commands[i].key()] = static_cast<int>(i);
    }
    const int g = limits.gridSize;
    axesPerDim_ = 2 * g - 1;
    mirrorIdx_.assign(u_.commands.size(), std::vector<int>(2 * axesPerDim_, -1));
    for (std::size_t i = 0; i < u_.commands.size(); ++i) {
      for (int a = 0; a < 2 * axesPerDim_; ++a) {
        const DrawCommand m = mirror(u_.commands[i], axisAt(a));
        mirrorIdx_[i][a] = find(m);
      }
    }
  }

  Universe build() {
    const bool loops = sigma_.loops && sigma_.maxDepth >= 2;
    const bool reflects = sigma_.reflects && sigma_.maxDepth >= 2;
    const bool deep = sigma_.maxDepth >= 3;

    constantAtoms(reflects, deep);
    if (loops) {
      for (const auto& group : groups()) {
        const auto deltas = deltaSet(group);
        std::vector<std::vector<Raw>> steps(u_.commands.size());
        for (int anchor : group) {
          const auto& c = u_.commands[anchor];
          for (const Raw& d : deltas) {
            ++u_.workUnits;
            if (lookup(c, add(c.coords(), d, 1)) >= 0) steps[anchor].push_back(d);
          }
          for (const Raw& d : steps[anchor]) progression(anchor, d, reflects && deep);
        }
        if (deep) {
          for (int anchor : group) {
            const auto& c = u_.commands[anchor];
            for (const Raw& di : steps[anchor]) {
              const Raw next = add(c.coords(), di, 1);
              for (const Raw& dj : deltas) {
                ++u_.workUnits;
                if (lookup(c, add(c.coords(), dj, 1)) < 0 &&
                    lookup(c, add(next, dj, 1)) < 0) {
                  continue;
                }
                grid(anchor, di, dj, false);
              }
              // Guarded atoms that only use the outer variable.
              grid(anchor, di, Raw{}, false);
            }
          }
          // Atoms that only use the inner variable ride on existing contexts.
          for (int anchor : group) {
            for (const Raw& dj : steps[anchor]) grid(anchor, Raw{}, dj, true);
          }
        }
      }
      if (reflects && deep) constantsInLoopReflects();
    }
    pruneDominated();
    pruneUnreferencable();
    for (auto& n : u_.nodes) n.cover = Mask{};
    for (const auto& it : u_.items) {
      for (int v = it.node; v >= 0; v = u_.nodes[v].parent) {
        u_.nodes[v].cover |= it.cover;
      }
    }
    return std::move(u_);
  }

 private:
  SearchSubspace sigma_;
  DslLimits limits_;
  Universe u_;
  std::unordered_map<std::uint64_t, int> index_;
  int axesPerDim_ = 0;
  std::vector<std::vector<int>> mirrorIdx_;
  std::map<std::tuple<int, int, int, int, int, int>, int> nodeIds_;

  Axis axisAt(int a) const {
    return {a < axesPerDim_ ? Axis::Dim::X : Axis::Dim::Y, a % axesPerDim_};
  }
  int axisCount() const { return 2 * axesPerDim_; }

  int find(const DrawCommand& c) const {
    if (!c.onGrid(limits_.gridSize)) return -1;
    auto it = index_.find(c.key());
    return it == index_.end() ? -1 : it->second;
  }

  int lookup(const DrawCommand& proto, const Raw& raw) const {
    auto c = DrawCommand::fromRaw(proto.kind, raw, proto.arrow, proto.dashed);
    return c ? find(*c) : -1;
  }

  bool inRange(int v) const {
    return v >= limits_.coeffMin && v <= limits_.coeffMax;
  }
  std::uint64_t bit(int v) const {
    return std::uint64_t{1} << u_.coeffBit(v);
  }

  std::vector<std::vector<int>> groups() const {
    std::map<std::tuple<int, bool, bool>, std::vector<int>> byKind;
    for (std::size_t i = 0; i < u_.commands.size(); ++i) {
      const auto& c = u_.commands[i];
      byKind[{static_cast<int>(c.kind), c.arrow, c.dashed}].push_back(
          static_cast<int>(i));
    }
    std::vector<std::vector<int>> out;
    for (auto& [k, v] : byKind) out.push_back(std::move(v));
    return out;
  }

  // Raw differences between any orientations of any two commands in a group.
  std::vector<Raw> deltaSet(const std::vector<int>& group) const {
    std::set<Raw> out;
    for (int a : group) {
      for (int b : group) {
        for (const Raw& ra : rawForms(u_.commands[a])) {
          for (const Raw& rb : rawForms(u_.commands[b])) {
            Raw d{rb[0] - ra[0], rb[1] - ra[1], rb[2] - ra[2], rb[3] - ra[3]};
            if (isZero(d)) continue;
            if (std::all_of(d.begin(), d.end(),
                            [&](int x) { return x == 0 || inRange(x); })) {
              out.insert(d);
            }
          }
        }
      }
    }
    return {out.begin(), out.end()};
  }

  int node(int parent, int parentSlot, NodeKind kind, const Expression& bound,
           int axis) {
    const auto key = kind == NodeKind::Loop
                         ? std::tuple(parent, parentSlot, 0,
                                      bound.var ? bound.scale : 0,
                                      bound.var ? 1 : 0, bound.offset)
                         : std::tuple(parent, parentSlot, 1, axis, 0, 0);
    auto it = nodeIds_.find(key);
    if (it != nodeIds_.end()) return it->second;
    ContextNode n;
    n.parent = parent;
    n.parentSlot = parentSlot;
    n.kind = kind;
    if (kind == NodeKind::Loop) {
      n.bound = bound;
      n.units = bound.isConstant() && bound.offset == 2 ? 2 : 1;
      n.coeff = bit(bound.offset) | (bound.var ? bit(bound.scale) : 0);
      n.boundRefsParent = bound.var.has_value();
    } else {
      n.axis = axisAt(axis);
    }
    u_.nodes.push_back(n);
    const int id = static_cast<int>(u_.nodes.size()) - 1;
    nodeIds_.emplace(key, id);
    return id;
  }

  int loopNode(int parent, int slot, const Expression& bound) {
    return node(parent, slot, NodeKind::Loop, bound, 0);
  }
  int reflectNode(int parent, int slot, int axis) {
    return node(parent, slot, NodeKind::Reflect, Expression{}, axis);
  }
  int existingLoopNode(int parent, int slot, const Expression& bound) const {
    auto it = nodeIds_.find(std::tuple(parent, slot, 0,
                                       bound.var ? bound.scale : 0,
                                       bound.var ? 1 : 0, bound.offset));
    return it == nodeIds_.end() ? -1 : it->second;
  }

  bool closure(const Mask& m, int axis, Mask& out) const {
    out = m;
    bool ok = true;
    m.forEach([&](int e) {
      const int k = mirrorIdx_[e][axis];
      if (k < 0) {
        ok = false;
      } else {
        out.set(k);
      }
    });
    return ok;
  }

  void addItem(const Mask& cover, std::uint64_t coeff, int nodeId, int slot,
               std::uint8_t refs, const Primitive& prim) {
    Item it;
    it.cover = cover;
    it.coeff = coeff;
    it.node = nodeId;
    it.slot = slot;
    it.refs = refs;
    it.prim = prim;
    u_.items.push_back(std::move(it));
  }

  std::uint64_t constantCoeffs(const DrawCommand& c) const {
    std::uint64_t k = 0;
    const Raw r = c.coords();
    for (int i = 0; i < c.arity(); ++i) k |= bit(r[i]);
    return k;
  }

  static Primitive constantPrim(const DrawCommand& c) {
    Primitive p;
    p.kind = c.kind;
    p.arrow = c.arrow;
    p.dashed = c.dashed;
    const Raw r = c.coords();
    for (int i = 0; i < c.arity(); ++i) p.args[i] = Expression::constant(r[i]);
    return p;
  }

  void constantAtoms(bool reflects, bool deep) {
    for (std::size_t e = 0; e < u_.commands.size(); ++e) {
      const auto& c = u_.commands[e];
      Mask m;
      m.set(static_cast<int>(e));
      const auto coeff = constantCoeffs(c);
      const auto prim = constantPrim(c);
      addItem(m, coeff, -1, 0, 0, prim);
      if (!reflects) continue;
      for (int a = 0; a < axisCount(); ++a) {
        ++u_.workUnits;
        Mask inner;
        if (!closure(m, a, inner)) continue;
        addItem(inner, coeff, reflectNode(-1, 0, a), 0, 0, prim);
        if (!deep) continue;
        for (int outer = 0; outer < axisCount(); ++outer) {
          ++u_.workUnits;
          Mask full;
          if (outer == a || !closure(inner, outer, full)) continue;
          addItem(full, coeff, reflectNode(reflectNode(-1, 0, outer), 0, a), 0,
                  0, prim);
        }
      }
    }
  }

  // Constant atoms inside a reflect nested in a loop; only useful alongside
  // atoms that already open that context.
  void constantsInLoopReflects() {
    const int count = static_cast<int>(u_.nodes.size());
    for (int v = 0; v < count; ++v) {
      const auto& n = u_.nodes[v];
      if (n.kind != NodeKind::Reflect || n.parent < 0 ||
          u_.nodes[n.parent].kind != NodeKind::Loop) {
        continue;
      }
      const int a = (n.axis.dim == Axis::Dim::X ? 0 : axesPerDim_) + n.axis.value;
      for (std::size_t e = 0; e < u_.commands.size(); ++e) {
        Mask m;
        m.set(static_cast<int>(e));
        Mask full;
        if (!closure(m, a, full)) continue;
        addItem(full, constantCoeffs(u_.commands[e]), v, 0, 0,
                constantPrim(u_.commands[e]));
      }
    }
  }

  // Template value at the origin of its loop variables, given the anchor's
  // raw coordinates at (outer, inner) = (io, jo). Returns false when a
  // coefficient leaves the allowed range.
  bool makeTemplate(const DrawCommand& c, const Raw& anchor, const Raw& di,
                    const Raw& dj, int io, int jo, int varI, int varJ,
                    Primitive& prim, std::uint64_t& coeff) const {
    prim = Primitive{};
    prim.kind = c.kind;
    prim.arrow = c.arrow;
    prim.dashed = c.dashed;
    coeff = 0;
    for (int k = 0; k < c.arity(); ++k) {
      if (di[k] != 0) {
        const int base = anchor[k] - io * di[k] - jo * dj[k];
        if (!inRange(base) || !inRange(di[k])) return false;
        prim.args[k] = Expression::affine(di[k], varI, base);
        coeff |= bit(base) | bit(di[k]);
      } else if (dj[k] != 0) {
        const int base = anchor[k] - io * di[k] - jo * dj[k];
        if (!inRange(base) || !inRange(dj[k])) return false;
        prim.args[k] = Expression::affine(dj[k], varJ, base);
        coeff |= bit(base) | bit(dj[k]);
      } else {
        if (!inRange(anchor[k])) return false;
        prim.args[k] = Expression::constant(anchor[k]);
        coeff |= bit(anchor[k]);
      }
    }
    return true;
  }

  // Atoms of a single loop: arithmetic progressions through the spec.
  void progression(int anchor, const Raw& d, bool withReflects) {
    const auto& c = u_.commands[anchor];
    const Raw start = c.coords();
    std::vector<int> run{anchor};
    while (static_cast<int>(run.size()) < limits_.coeffMax) {
      ++u_.workUnits;
      const int k = lookup(c, add(start, d, static_cast<int>(run.size())));
      if (k < 0) break;
      run.push_back(k);
    }
    if (run.size() < 2) return;
    for (int r0 = 0; r0 <= 1; ++r0) {
      Primitive prim;
      std::uint64_t coeff = 0;
      if (!makeTemplate(c, start, d, Raw{}, r0, 0, 0, 0, prim, coeff)) continue;
      Mask m;
      m.set(run[0]);
      for (std::size_t len = 2; len <= run.size(); ++len) {
        m.set(run[len - 1]);
        const int n = r0 + static_cast<int>(len);
        if (!inRange(n)) break;
        const auto bound = Expression::constant(n);
        addItem(m, coeff, loopNode(-1, 0, bound), r0, 1, prim);
        if (!withReflects) continue;
        for (int a = 0; a < axisCount(); ++a) {
          ++u_.workUnits;
          Mask full;
          if (!closure(m, a, full)) continue;
          addItem(full, coeff, reflectNode(loopNode(-1, 0, bound), r0, a), 0,
                  2, prim);
          addItem(full, coeff, loopNode(reflectNode(-1, 0, a), 0, bound), r0,
                  1, prim);
        }
      }
    }
  }

  // Atoms of two nested loops. Row k (outer variable i* + k) starts at
  // anchor + k*di and runs along dj. The anchor is the first emitted command.
  void grid(int anchor, const Raw& di, const Raw& dj, bool innerOnly) {
    const bool usesI = !isZero(di);
    const bool usesJ = !isZero(dj);
    if (usesI == innerOnly) return;
    if (!usesJ && !usesI) return;
    for (int k = 0; k < 4; ++k) {
      if (di[k] != 0 && dj[k] != 0) return;
    }
    const auto& c = u_.commands[anchor];
    const Raw start = c.coords();
    const int maxRows = limits_.coeffMax;
    const int maxLen = limits_.coeffMax;

    // rows[k]: commands of row k in order (empty when the row start misses).
    std::vector<std::vector<int>> rows;
    for (int k = 0; k < maxRows; ++k) {
      ++u_.workUnits;
      if (!usesI && k > 0) {
        rows.push_back(rows[0]);
        continue;
      }
      const Raw rs = add(start, di, k);
      std::vector<int> row;
      int first = k == 0 ? anchor : lookup(c, rs);
      if (first >= 0) {
        row.push_back(first);
        if (usesJ) {
          while (static_cast<int>(row.size()) < maxLen) {
            ++u_.workUnits;
            const int x = lookup(c, add(rs, dj, static_cast<int>(row.size())));
            if (x < 0) break;
            row.push_back(x);
          }
        }
      }
      rows.push_back(std::move(row));
      if (rows.back().empty()) break;
    }
    if (usesI && (rows.size() < 2 || rows[1].empty())) return;
    // Without the inner variable, a row's length is irrelevant.
    auto rowCap = [&](int k) -> int {
      if (k >= static_cast<int>(rows.size())) return 0;
      if (!usesJ) return rows[k].empty() ? 0 : maxLen;
      return static_cast<int>(rows[k].size());
    };

    for (int s0 = usesJ ? 0 : 1; s0 <= 1; ++s0) {
      for (int r0 = 0; r0 <= 1; ++r0) {
        for (int pre = 0; pre <= s0; ++pre) {
          const int iStar = r0 + pre;
          Primitive prim;
          std::uint64_t coeff = 0;
          if (!makeTemplate(c, start, di, dj, iStar, s0, 1, 0, prim, coeff)) {
            continue;
          }
          const int vMax = std::min(limits_.coeffMax, s0 + rowCap(0));
          for (int a = limits_.coeffMin; a <= limits_.coeffMax; ++a) {
            for (int v = s0 + 1; v <= vMax; ++v) {
              const int b = v - a * iStar;
              if (a != 0 && !inRange(b)) continue;
              if (pre && a * r0 + b != 1) continue;
              const Expression bound = a == 0 ? Expression::constant(v)
                                              : Expression::affine(a, 0, b);
              emitGrid(c, rows, rowCap, prim, coeff, bound, r0, s0, iStar,
                       usesI, usesJ, innerOnly);
            }
          }
        }
      }
    }
  }

  template <typename Cap>
  void emitGrid(const DrawCommand&, const std::vector<std::vector<int>>& rows,
                Cap&& rowCap, const Primitive& prim, std::uint64_t coeff,
                const Expression& bound, int r0, int s0, int iStar, bool usesI,
                bool usesJ, bool innerOnly) {
    Mask m;
    int longest = 0;
    int nonEmpty = 0;
    bool filters = false;  // some reached row emits nothing
    for (int n = iStar + 1; n <= limits_.coeffMax; ++n) {
      ++u_.workUnits;
      const int i = n - 1;
      const int e = bound.var ? bound.scale * i + bound.offset : bound.offset;
      if (e < 1) break;
      const int len = e - s0;
      const int k = i - iStar;
      if (len > 0) {
        if (k < 0 || len > rowCap(k)) break;
        const auto& row = rows[k];
        if (usesJ) {
          for (int t = 0; t < len; ++t) m.set(row[t]);
        } else {
          m.set(row[0]);
        }
        longest = std::max(longest, len);
        ++nonEmpty;
      } else {
        filters = true;
      }
      if (iStar > r0) filters = true;
      if (n - r0 < 2) continue;
      if (usesJ && longest < 2) continue;
      if (usesI && nonEmpty < 2) continue;
      // Outer-only atoms are only worth having when the inner guard filters
      // out a row; otherwise the same atom sits directly in the outer loop.
      if (!usesJ && !filters) continue;
      const auto outer = Expression::constant(n);
      int inner;
      if (innerOnly) {
        const int parent = existingLoopNode(-1, 0, outer);
        if (parent < 0) continue;
        if (bound.isConstant()) {
          inner = existingLoopNode(parent, r0, bound);
          if (inner < 0) continue;
        } else {
          inner = loopNode(parent, r0, bound);
        }
      } else {
        inner = loopNode(loopNode(-1, 0, outer), r0, bound);
      }
      const std::uint8_t refs =
          static_cast<std::uint8_t>((usesJ ? 1 : 0) | (usesI ? 2 : 0));
      addItem(m, coeff, inner, s0, refs, prim);
    }
  }

  // Removes items beaten by another item in the same context that covers at
  // least as much with no extra coefficients.
  void pruneDominated() {
    std::map<int, std::vector<int>> byNode;
    for (std::size_t i = 0; i < u_.items.size(); ++i) {
      byNode[u_.items[i].node].push_back(static_cast<int>(i));
    }
    std::vector<char> dead(u_.items.size(), 0);
    for (auto& [nodeId, ids] : byNode) {
      std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        const auto& x = u_.items[a];
        const auto& y = u_.items[b];
        const int cx = x.cover.count();
        const int cy = y.cover.count();
        if (cx != cy) return cx > cy;
        return std::popcount(x.coeff) < std::popcount(y.coeff);
      });
      for (std::size_t p = 0; p < ids.size(); ++p) {
        const auto& a = u_.items[ids[p]];
        for (std::size_t q = 0; q < p && !dead[ids[p]]; ++q) {
          if (dead[ids[q]]) continue;
          const auto& b = u_.items[ids[q]];
          if (b.refs == a.refs && a.cover.subsetOf(b.cover) &&
              (b.coeff & ~a.coeff) == 0) {
            dead[ids[p]] = 1;
          }
        }
      }
    }
    compact(dead);
  }

  // A loop context must reference its variable somewhere below it; drop the
  // items of contexts that never can.
  void pruneUnreferencable() {
    while (true) {
      const std::size_t nn = u_.nodes.size();
      std::vector<char> hasItems(nn, 0);
      std::vector<char> referenced(nn, 0);
      for (const auto& it : u_.items) {
        if (it.node < 0) continue;
        for (int v = it.node; v >= 0; v = u_.nodes[v].parent) hasItems[v] = 1;
        if (it.refs & 1) referenced[it.node] = 1;
        const int p = u_.nodes[it.node].parent;
        if ((it.refs & 2) && p >= 0) referenced[p] = 1;
      }
      for (std::size_t v = 0; v < nn; ++v) {
        const auto& n = u_.nodes[v];
        if (hasItems[v] && n.boundRefsParent && n.parent >= 0) {
          referenced[n.parent] = 1;
        }
      }
      std::vector<char> dead(u_.items.size(), 0);
      bool any = false;
      for (std::size_t i = 0; i < u_.items.size(); ++i) {
        for (int v = u_.items[i].node; v >= 0; v = u_.nodes[v].parent) {
          if (u_.nodes[v].kind == NodeKind::Loop && !referenced[v]) {
            dead[i] = 1;
            any = true;
          }
        }
      }
      if (!any) return;
      compact(dead);
    }
  }

  void compact(const std::vector<char>& dead) {
    std::vector<Item> kept;
    kept.reserve(u_.items.size());
    for (std::size_t i = 0; i < u_.items.size(); ++i) {
      if (!dead[i]) kept.push_back(std::move(u_.items[i]));
    }
    u_.items = std::move(kept);
  }
};

// ---------------------------------------------------------------------------
// Program assembly

void sortBlock(Program& p) {
  std::vector<std::pair<std::string, Statement>> keyed;
  for (auto& s : p.statements) keyed.emplace_back(statementKey(s), std::move(s));
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  p.statements.clear();
  for (auto& [k, s] : keyed) p.statements.push_back(std::move(s));
}

struct Assembler {
  const Universe& u;
  std::vector<char> open;
  std::vector<std::vector<int>> itemsAt;  // per node + 1 (index 0: top level)

  Program block(int nodeId, int slot) {
    Program p;
    for (int i : itemsAt[static_cast<std::size_t>(nodeId + 1)]) {
      if (u.items[i].slot == slot) p.statements.push_back(Statement{u.items[i].prim});
    }
    for (std::size_t v = 0; v < u.nodes.size(); ++v) {
      const auto& n = u.nodes[v];
      if (!open[v] || n.parent != nodeId || n.parentSlot != slot) continue;
      if (n.kind == NodeKind::Loop) {
        For loop;
        loop.bound = n.bound;
        loop.guarded = block(static_cast<int>(v), 1);
        loop.body = block(static_cast<int>(v), 0);
        p.statements.push_back(Statement{std::move(loop)});
      } else {
        Reflect r;
        r.axis = n.axis;
        r.body = block(static_cast<int>(v), 0);
        p.statements.push_back(Statement{std::move(r)});
      }
    }
    sortBlock(p);
    return p;
  }
};

}  // namespace

std::string statementKey(const Statement& s) {
  Program p;
  p.statements.push_back(s);
  return toJson(p).dump();
}

Universe buildUniverse(const Spec& spec, const SearchSubspace& sigma,
                       const DslLimits& limits) {
  return Builder(spec, sigma, limits).build();
}

Program assemble(const Universe& u, const std::vector<int>& chosen) {
  Assembler a{u, std::vector<char>(u.nodes.size(), 0),
              std::vector<std::vector<int>>(u.nodes.size() + 1)};
  std::vector<int> sorted = chosen;
  std::sort(sorted.begin(), sorted.end());
  for (int i : sorted) {
    const auto& it = u.items[i];
    a.itemsAt[static_cast<std::size_t>(it.node + 1)].push_back(i);
    for (int v = it.node; v >= 0; v = u.nodes[v].parent) a.open[v] = 1;
  }
  return a.block(-1, 0);
}

}  // namespace gsynth::detail
