#include "brute_force.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace gsynth::oracle {

namespace {

struct Frame {
  bool loop = true;
  Expression bound{};
  Axis axis{};
  int slot = 0;  // where the contents sit: 0 body, 1 guard
};

struct Candidate {
  unsigned mask = 0;
  std::uint64_t coeff = 0;
  unsigned refs = 0;  // bit l: loop level l (outermost = 0) is referenced
  int units = 0;
  Statement stmt;
};

using StateKey = std::tuple<unsigned, std::uint64_t, unsigned>;

struct State {
  int units = 0;
  std::vector<Statement> stmts;
};

class Oracle {
 public:
  Oracle(const Spec& spec, const SearchSubspace& sigma, const DslLimits& limits)
      : spec_(spec), sigma_(sigma), limits_(limits) {
    if (spec.size() > 8) throw std::invalid_argument("oracle spec too large");
    if (limits.coeffMax - limits.coeffMin >= 64) {
      throw std::invalid_argument("oracle coefficient range too wide");
    }
    for (const auto& c : spec) {
      const auto r = c.coords();
      xs_.insert(r[0]);
      ys_.insert(r[1]);
      if (c.kind != CommandKind::Circle) {
        xs_.insert(r[2]);
        ys_.insert(r[3]);
      }
    }
    full_ = (1u << spec.size()) - 1;
    // A program dearer than listing the spec flat is never the minimum.
    const Cost flat = flatCost(spec);
    maxUnits_ = static_cast<int>(flat.thirds() / 3);
    depth_ = std::min(limits.maxDepth, sigma.maxDepth);
    // A loop variable is referenced by some coordinate (directly, or through
    // an inner bound whose variable is), and a coordinate term with nonzero
    // scale takes a different spec coordinate for each value of its variable.
    // Hence no bound needs to exceed the number of distinct coordinates + 1.
    boundCap_ = static_cast<int>(std::max(xs_.size(), ys_.size())) + 1;
  }

  std::optional<BruteForceResult> run() {
    std::vector<Frame> path;
    const auto states = block(path, 0);
    std::optional<BruteForceResult> best;
    for (const auto& [key, st] : states) {
      const auto& [mask, coeff, refs] = key;
      if (mask != full_) continue;
      const Cost c = Cost::fromThirds(
          3 * st.units + std::max(0, std::popcount(coeff) - 1));
      if (!best || c < best->cost) {
        Program p;
        p.statements = st.stmts;
        best = BruteForceResult{c, std::move(p)};
      }
    }
    return best;
  }

 private:
  const Spec& spec_;
  SearchSubspace sigma_;
  DslLimits limits_;
  std::set<int> xs_;
  std::set<int> ys_;
  unsigned full_ = 0;
  int maxUnits_ = 0;
  int depth_ = 3;
  int boundCap_ = 0;

  std::uint64_t bit(int v) const {
    return std::uint64_t{1} << (v - limits_.coeffMin);
  }
  bool inRange(int v) const {
    return v >= limits_.coeffMin && v <= limits_.coeffMax;
  }
  std::uint64_t exprCoeff(const Expression& e) const {
    return bit(e.offset) | (e.var ? bit(e.scale) : 0);
  }
  int loopLevels(const std::vector<Frame>& path) const {
    return static_cast<int>(std::count_if(path.begin(), path.end(),
                                          [](const Frame& f) { return f.loop; }));
  }

  // Loop environments (outermost first) reaching the contents of `path`, or
  // nullopt when some loop bound drops below one where it is evaluated.
  std::optional<std::vector<std::vector<int>>> envs(
      const std::vector<Frame>& path) const {
    std::vector<std::vector<int>> cur{{}};
    for (const auto& f : path) {
      if (!f.loop) continue;
      std::vector<std::vector<int>> next;
      for (const auto& env : cur) {
        const int n = f.bound.eval(env);
        if (n < 1) return std::nullopt;
        for (int i = f.slot; i < n; ++i) {
          auto e = env;
          e.push_back(i);
          next.push_back(std::move(e));
        }
      }
      cur = std::move(next);
    }
    return cur;
  }

  static int distinctAt(const std::vector<std::vector<int>>& envs, int level) {
    std::set<int> v;
    for (const auto& e : envs) v.insert(e[static_cast<std::size_t>(level)]);
    return static_cast<int>(v.size());
  }

  int indexOf(const DrawCommand& c) const {
    for (std::size_t i = 0; i < spec_.size(); ++i) {
      if (spec_[i] == c) return static_cast<int>(i);
    }
    return -1;
  }

  // Expressions over `levels` loop variables whose value stays in `allowed`
  // at every environment. Variables are stored as de Bruijn indices.
  std::vector<Expression> argChoices(const std::vector<std::vector<int>>& es,
                                     int levels, const std::set<int>& allowed) const {
    std::vector<Expression> out;
    auto fits = [&](const Expression& e) {
      for (const auto& env : es) {
        if (!allowed.count(e.eval(env))) return false;
      }
      return true;
    };
    for (int c = limits_.coeffMin; c <= limits_.coeffMax; ++c) {
      const auto e = Expression::constant(c);
      if (fits(e)) out.push_back(e);
    }
    for (int level = 0; level < levels; ++level) {
      if (distinctAt(es, level) < 2) continue;
      for (int a = limits_.coeffMin; a <= limits_.coeffMax; ++a) {
        if (a == 0) continue;
        for (int b = limits_.coeffMin; b <= limits_.coeffMax; ++b) {
          const auto e = Expression::affine(a, levels - 1 - level, b);
          if (fits(e)) out.push_back(e);
        }
      }
    }
    return out;
  }

  unsigned reflectClosure(const std::vector<Frame>& path, std::set<int> idx,
                          bool& ok) const {
    ok = true;
    for (auto f = path.rbegin(); f != path.rend(); ++f) {
      if (f->loop) continue;
      std::set<int> next = idx;
      for (int i : idx) {
        const DrawCommand m = mirror(spec_[static_cast<std::size_t>(i)], f->axis);
        const int k = indexOf(m);
        if (k < 0) {
          ok = false;
          return 0;
        }
        next.insert(k);
      }
      idx = std::move(next);
    }
    unsigned mask = 0;
    for (int i : idx) mask |= 1u << i;
    return mask;
  }

  void primitives(const std::vector<Frame>& path,
                  const std::vector<std::vector<int>>& es,
                  std::vector<Candidate>& out) const {
    if (es.empty()) return;
    const int levels = loopLevels(path);
    const auto xChoices = argChoices(es, levels, xs_);
    const auto yChoices = argChoices(es, levels, ys_);
    std::set<std::tuple<int, bool, bool>> flavors;
    for (const auto& c : spec_) {
      flavors.insert({static_cast<int>(c.kind), c.arrow, c.dashed});
    }
    for (const auto& [kind, arrow, dashed] : flavors) {
      Primitive p;
      p.kind = static_cast<CommandKind>(kind);
      p.arrow = arrow;
      p.dashed = dashed;
      choose(path, es, levels, p, 0, xChoices, yChoices, out);
    }
  }

  // Prefix check: some spec command of this flavor agrees with the first k
  // raw coordinates at every environment, in some orientation.
  bool prefixOk(const Primitive& p, int k,
                const std::vector<std::vector<int>>& es) const {
    for (const auto& env : es) {
      bool hit = false;
      for (const auto& c : spec_) {
        if (c.kind != p.kind || c.arrow != p.arrow || c.dashed != p.dashed) {
          continue;
        }
        std::array<int, 4> raw{};
        for (int t = 0; t < k; ++t) raw[t] = p.args[t].eval(env);
        const auto r = c.coords();
        const std::array<std::array<int, 4>, 4> forms{
            r, std::array<int, 4>{r[2], r[1], r[0], r[3]},
            std::array<int, 4>{r[0], r[3], r[2], r[1]},
            std::array<int, 4>{r[2], r[3], r[0], r[1]}};
        for (const auto& f : forms) {
          bool same = true;
          for (int t = 0; t < k; ++t) same &= f[t] == raw[t];
          hit |= same;
        }
        if (hit) break;
      }
      if (!hit) return false;
    }
    return true;
  }

  void choose(const std::vector<Frame>& path,
              const std::vector<std::vector<int>>& es, int levels, Primitive& p,
              int k, const std::vector<Expression>& xc,
              const std::vector<Expression>& yc,
              std::vector<Candidate>& out) const {
    if (k == p.arity()) {
      finishPrimitive(path, es, levels, p, out);
      return;
    }
    for (const auto& e : (k % 2 == 0 ? xc : yc)) {
      p.args[k] = e;
      if (prefixOk(p, k + 1, es)) choose(path, es, levels, p, k + 1, xc, yc, out);
    }
    p.args[k] = Expression{};
  }

  void finishPrimitive(const std::vector<Frame>& path,
                       const std::vector<std::vector<int>>& es, int levels,
                       const Primitive& p, std::vector<Candidate>& out) const {
    std::set<int> idx;
    for (const auto& env : es) {
      const auto c = [&]() -> std::optional<DrawCommand> {
        std::array<int, 4> raw{};
        for (int t = 0; t < p.arity(); ++t) raw[t] = p.args[t].eval(env);
        return DrawCommand::fromRaw(p.kind, raw, p.arrow, p.dashed);
      }();
      if (!c) return;
      const int i = indexOf(*c);
      if (i < 0) return;
      idx.insert(i);
    }
    bool ok = false;
    const unsigned mask = reflectClosure(path, idx, ok);
    if (!ok || mask == 0) return;
    Candidate cand;
    cand.mask = mask;
    cand.units = 1;
    for (int t = 0; t < p.arity(); ++t) {
      cand.coeff |= exprCoeff(p.args[t]);
      if (p.args[t].var) cand.refs |= 1u << (levels - 1 - *p.args[t].var);
    }
    cand.stmt = Statement{p};
    out.push_back(std::move(cand));
  }

  // An item is useless when another one covers the same commands with no
  // more units, no extra coefficients, and at least the same references.
  template <typename T>
  static void dropDominated(std::vector<T>& items) {
    std::stable_sort(items.begin(), items.end(), [](const T& a, const T& b) {
      return std::tuple(a.mask, a.units, std::popcount(a.coeff)) <
             std::tuple(b.mask, b.units, std::popcount(b.coeff));
    });
    std::vector<T> kept;
    std::size_t groupStart = 0;
    for (auto& it : items) {
      if (!kept.empty() && kept.back().mask != it.mask) groupStart = kept.size();
      bool dominated = false;
      for (std::size_t k = groupStart; k < kept.size() && !dominated; ++k) {
        const auto& o = kept[k];
        dominated = o.units <= it.units && (o.coeff & ~it.coeff) == 0 &&
                    (it.refs & ~o.refs) == 0;
      }
      if (!dominated) kept.push_back(std::move(it));
    }
    items = std::move(kept);
  }

  // All non-empty blocks at the contents of `path`, cheapest per key. The
  // subset DP keeps back-pointers and rebuilds statement lists at the end.
  std::map<StateKey, State> block(std::vector<Frame>& path, int usedUnits) {
    std::vector<Candidate> items;
    const auto es = envs(path);
    if (!es) return {};
    primitives(path, *es, items);
    statementsWithHeaders(path, *es, usedUnits, items);
    dropDominated(items);

    struct Link {
      int prev;
      int item;
    };
    std::vector<Link> links;
    std::map<StateKey, std::pair<int, int>> states;  // units, link
    states[{0u, 0, 0u}] = {0, -1};
    const int room = maxUnits_ - usedUnits;
    std::vector<std::tuple<StateKey, int, int>> add;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& it = items[i];
      add.clear();
      for (const auto& [key, val] : states) {
        const auto& [mask, coeff, refs] = key;
        const int u = val.first + it.units;
        if (u > room) continue;
        add.emplace_back(StateKey{mask | it.mask, coeff | it.coeff, refs | it.refs},
                         u, val.second);
      }
      for (const auto& [nk, u, prev] : add) {
        auto f = states.find(nk);
        if (f != states.end() && f->second.first <= u) continue;
        links.push_back({prev, static_cast<int>(i)});
        states[nk] = {u, static_cast<int>(links.size()) - 1};
      }
    }
    struct Final {
      unsigned mask;
      std::uint64_t coeff;
      unsigned refs;
      int units;
      int link;
    };
    std::vector<Final> finals;
    for (const auto& [key, val] : states) {
      if (val.second < 0) continue;
      const auto& [mask, coeff, refs] = key;
      finals.push_back({mask, coeff, refs, val.first, val.second});
    }
    dropDominated(finals);
    std::map<StateKey, State> out;
    for (const auto& f : finals) {
      State st;
      st.units = f.units;
      for (int l = f.link; l >= 0; l = links[l].prev) {
        st.stmts.push_back(items[links[l].item].stmt);
      }
      std::reverse(st.stmts.begin(), st.stmts.end());
      out.emplace(StateKey{f.mask, f.coeff, f.refs}, std::move(st));
    }
    return out;
  }

  void statementsWithHeaders(std::vector<Frame>& path,
                             const std::vector<std::vector<int>>& es,
                             int usedUnits, std::vector<Candidate>& out) {
    // Contents sit at depth path.size() + 1; a new header adds one level.
    if (static_cast<int>(path.size()) + 2 > depth_) return;
    const int levels = loopLevels(path);
    if (sigma_.loops) {
      std::vector<Expression> bounds;
      for (int c = 1; c <= std::min(boundCap_, limits_.coeffMax); ++c) {
        bounds.push_back(Expression::constant(c));
      }
      for (int level = 0; level < levels; ++level) {
        if (distinctAt(es, level) < 2) continue;
        for (int a = limits_.coeffMin; a <= limits_.coeffMax; ++a) {
          if (a == 0) continue;
          for (int b = limits_.coeffMin; b <= limits_.coeffMax; ++b) {
            bounds.push_back(Expression::affine(a, levels - 1 - level, b));
          }
        }
      }
      for (const auto& bound : bounds) {
        bool reached = true;
        for (const auto& env : es) {
          const int n = bound.eval(env);
          reached &= n >= 1 && n <= boundCap_;
        }
        if (!reached) continue;
        const int header = bound.isConstant() && bound.offset == 2 ? 2 : 1;
        if (usedUnits + header + 1 > maxUnits_) continue;
        std::array<std::map<StateKey, State>, 2> slots;
        for (int slot = 0; slot <= 1; ++slot) {
          path.push_back({true, bound, {}, slot});
          slots[slot] = block(path, usedUnits + header);
          path.pop_back();
        }
        // Pair a body block with an optional guarded block.
        struct Pair {
          int units;
          const State* body;
          const State* guarded;
        };
        std::map<StateKey, Pair> merged;
        auto offer = [&](const StateKey& k, Pair p) {
          if (usedUnits + header + p.units > maxUnits_) return;
          auto f = merged.find(k);
          if (f == merged.end() || p.units < f->second.units) merged[k] = p;
        };
        // Only pairs where some half references the new loop variable can
        // produce a valid loop.
        const unsigned own = 1u << levels;
        auto refsOwn = [&](const StateKey& k) { return (std::get<2>(k) & own) != 0; };
        for (const auto& [kb, sb] : slots[0]) {
          if (refsOwn(kb)) offer(kb, {sb.units, &sb, nullptr});
        }
        for (const auto& [kg, sg] : slots[1]) {
          if (refsOwn(kg)) offer(kg, {sg.units, nullptr, &sg});
          for (const auto& [kb, sb] : slots[0]) {
            if (!refsOwn(kg) && !refsOwn(kb)) continue;
            offer({std::get<0>(kb) | std::get<0>(kg), std::get<1>(kb) | std::get<1>(kg),
                   std::get<2>(kb) | std::get<2>(kg)},
                  {sb.units + sg.units, &sb, &sg});
          }
        }
        for (const auto& [key, val] : merged) {
          const auto& [mask, coeff, refs] = key;
          if (mask == 0 || !(refs & (1u << levels))) continue;
          Candidate cand;
          cand.mask = mask;
          cand.coeff = coeff | exprCoeff(bound);
          cand.refs = refs & ~(1u << levels);
          if (bound.var) cand.refs |= 1u << (levels - 1 - *bound.var);
          cand.units = header + val.units;
          For f;
          f.bound = bound;
          if (val.guarded) f.guarded.statements = val.guarded->stmts;
          if (val.body) f.body.statements = val.body->stmts;
          cand.stmt = Statement{std::move(f)};
          out.push_back(std::move(cand));
        }
      }
    }
    if (sigma_.reflects && usedUnits + 2 <= maxUnits_) {
      for (int dim = 0; dim < 2; ++dim) {
        for (int v = 0; v <= 2 * (limits_.gridSize - 1); ++v) {
          const Axis axis{dim == 0 ? Axis::Dim::X : Axis::Dim::Y, v};
          path.push_back({false, {}, axis, 0});
          const auto states = block(path, usedUnits + 1);
          path.pop_back();
          for (const auto& [key, st] : states) {
            Candidate cand;
            std::tie(cand.mask, cand.coeff, cand.refs) = key;
            cand.units = 1 + st.units;
            Reflect r;
            r.axis = axis;
            r.body.statements = st.stmts;
            cand.stmt = Statement{std::move(r)};
            out.push_back(std::move(cand));
          }
        }
      }
    }
  }
};

}  // namespace

std::optional<BruteForceResult> bruteForceMinimum(const Spec& spec,
                                                  const SearchSubspace& sigma,
                                                  const DslLimits& limits) {
  if (spec.empty()) return BruteForceResult{Cost{}, Program{}};
  return Oracle(spec, sigma.whole(), limits).run();
}

}  // namespace gsynth::oracle
