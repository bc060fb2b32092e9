#include "gsynth/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "synth_universe.hpp"

namespace gsynth {

// ---------------------------------------------------------------------------
// Subspaces

int SearchSubspace::index() const {
  return ((int(loops) * 2 + int(reflects)) * 2 + int(incremental)) * 3 +
         (maxDepth - 1);
}

SearchSubspace SearchSubspace::fromIndex(int index) {
  if (index < 0 || index >= kSubspaceCount) {
    throw std::out_of_range("subspace index out of range");
  }
  SearchSubspace s;
  s.maxDepth = index % 3 + 1;
  index /= 3;
  s.incremental = index % 2;
  index /= 2;
  s.reflects = index % 2;
  s.loops = index / 2;
  return s;
}

std::string SearchSubspace::name() const {
  std::string out;
  auto add = [&](const char* part) {
    if (!out.empty()) out += ",";
    out += part;
  };
  if (loops) add("loops");
  if (reflects) add("reflect");
  if (incremental) add("incremental");
  add(("depth" + std::to_string(maxDepth)).c_str());
  return out;
}

SearchSubspace SearchSubspace::parse(std::string_view text) {
  SearchSubspace s{false, false, false, 3};
  std::string token;
  std::istringstream in{std::string(text)};
  while (std::getline(in, token, ',')) {
    if (token == "loops" || token == "loop") {
      s.loops = true;
    } else if (token == "reflect" || token == "reflects") {
      s.reflects = true;
    } else if (token == "incremental") {
      s.incremental = true;
    } else if (token.rfind("depth", 0) == 0 && token.size() == 6 &&
               token[5] >= '1' && token[5] <= '3') {
      s.maxDepth = token[5] - '0';
    } else if (!token.empty()) {
      throw std::invalid_argument("unknown subspace flag '" + token + "'");
    }
  }
  return s;
}

bool SearchSubspace::within(const SearchSubspace& other) const {
  return (!loops || other.loops) && (!reflects || other.reflects) &&
         maxDepth <= other.maxDepth;
}

namespace {

void usage(const Program& p, bool& loops, bool& reflects) {
  for (const auto& s : p.statements) {
    if (const auto* f = std::get_if<For>(&s.node)) {
      loops = true;
      usage(f->guarded, loops, reflects);
      usage(f->body, loops, reflects);
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      reflects = true;
      usage(r->body, loops, reflects);
    }
  }
}

}  // namespace

SearchSubspace subspaceOf(const Program& p) {
  SearchSubspace s{false, false, false, std::max(1, depth(p))};
  usage(p, s.loops, s.reflects);
  return s;
}

bool inSubspace(const Program& p, const SearchSubspace& sigma) {
  return subspaceOf(p).within(sigma);
}

const char* statusName(SynthStatus s) {
  switch (s) {
    case SynthStatus::Solved:
      return "solved";
    case SynthStatus::Exhausted:
      return "exhausted";
    case SynthStatus::Timeout:
      return "timeout";
    case SynthStatus::BudgetExpired:
      return "budgetExpired";
  }
  return "?";
}

bool consistent(const Program& p, const Spec& spec, int gridSize) {
  try {
    return execute(p, ExecOptions{gridSize}) == spec;
  } catch (const DslError&) {
    return false;
  }
}

Cost flatCost(const Spec& spec) {
  std::set<int> coeffs;
  for (const auto& c : spec) {
    const auto r = c.coords();
    for (int k = 0; k < c.arity(); ++k) coeffs.insert(r[k]);
  }
  return Cost::whole(static_cast<std::int64_t>(spec.size())) +
         Cost::fromThirds(std::max<std::int64_t>(0, std::ssize(coeffs) - 1));
}

std::vector<Spec> incrementalClusters(const Spec& spec) {
  const auto& cmds = spec.commands();
  const std::size_t n = cmds.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto points = [](const DrawCommand& c) {
    std::vector<std::pair<int, int>> p{{c.x1, c.y1}};
    if (c.kind != CommandKind::Circle) p.emplace_back(c.x2, c.y2);
    return p;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (cmds[a].kind != cmds[b].kind) continue;
      bool near = false;
      for (auto [x1, y1] : points(cmds[a])) {
        for (auto [x2, y2] : points(cmds[b])) {
          near |= std::max(std::abs(x1 - x2), std::abs(y1 - y2)) <= 2;
        }
      }
      if (near) parent[root(a)] = root(b);
    }
  }
  std::vector<std::vector<DrawCommand>> groups(n);
  for (std::size_t i = 0; i < n; ++i) groups[root(i)].push_back(cmds[i]);
  std::vector<Spec> out;
  for (auto& g : groups) {
    if (!g.empty()) out.emplace_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Branch and bound over the item universe

namespace {

using detail::Mask;
using detail::Universe;

constexpr std::int64_t kInfinity = std::numeric_limits<std::int64_t>::max() / 4;

class CoverSearch {
 public:
  explicit CoverSearch(Universe u) : u_(std::move(u)) {
    n_ = static_cast<int>(u_.commands.size());
    for (int i = 0; i < n_; ++i) full_.set(i);
    nodeUse_.assign(u_.nodes.size(), 0);
    forbidden_.assign(u_.items.size(), 0);
    paths_.resize(u_.items.size());
    for (std::size_t i = 0; i < u_.items.size(); ++i) {
      for (int v = u_.items[i].node; v >= 0; v = u_.nodes[v].parent) {
        paths_[i].push_back(v);
      }
    }
    seedIncumbent();
    if (n_ == 0) {
      done_ = true;
      return;
    }
    Frame root;
    if (expand(root)) stack_.push_back(std::move(root));
    if (stack_.empty()) done_ = true;
  }

  std::uint64_t run(std::uint64_t budget) {
    std::uint64_t used = 0;
    while (!done_ && used < budget) {
      step();
      ++used;
    }
    nodes_ += used;
    return used;
  }

  bool done() const { return done_; }
  std::uint64_t nodes() const { return nodes_; }
  std::int64_t bestThirds() const { return bestThirds_; }
  bool hasBest() const { return bestThirds_ < kInfinity; }
  const std::vector<int>& bestItems() const { return best_; }
  const Universe& universe() const { return u_; }

  std::int64_t frontierThirds() const {
    std::int64_t f = bestThirds_;
    if (!done_) {
      for (const auto& fr : stack_) f = std::min(f, fr.bound);
    }
    return f;
  }

 private:
  struct Frame {
    std::vector<int> cands;
    std::size_t next = 0;
    int applied = -1;
    std::int64_t bound = 0;  // lower bound on anything below this frame
    std::int64_t base = 0;   // cost of the state the frame branches from
    std::vector<int> forbade;
    Mask coveredBefore;
    std::uint64_t coeffBefore = 0;
  };

  Universe u_;
  int n_ = 0;
  Mask full_;
  std::vector<std::vector<int>> paths_;

  Mask covered_;
  std::uint64_t coeff_ = 0;
  std::vector<int> nodeUse_;
  std::vector<int> forbidden_;
  std::vector<int> chosen_;
  std::int64_t units_ = 0;

  std::vector<Frame> stack_;
  std::int64_t bestThirds_ = kInfinity;
  std::vector<int> best_;
  std::uint64_t nodes_ = 0;
  bool done_ = false;

  std::int64_t costThirds() const {
    return 3 * units_ + std::max(0, std::popcount(coeff_) - 1);
  }

  void apply(int a) {
    const auto& it = u_.items[a];
    covered_ |= it.cover;
    coeff_ |= it.coeff;
    units_ += 1;
    for (int v : paths_[a]) {
      if (nodeUse_[v]++ == 0) {
        units_ += u_.nodes[v].units;
        coeff_ |= u_.nodes[v].coeff;
      }
    }
    chosen_.push_back(a);
  }

  void undo(int a, const Mask& covered, std::uint64_t coeff) {
    units_ -= 1;
    for (int v : paths_[a]) {
      if (--nodeUse_[v] == 0) units_ -= u_.nodes[v].units;
    }
    covered_ = covered;
    coeff_ = coeff;
    chosen_.pop_back();
  }

  bool valid() const {
    std::vector<char> referenced(u_.nodes.size(), 0);
    for (int a : chosen_) {
      const auto& it = u_.items[a];
      if (it.node < 0) continue;
      if (it.refs & 1) referenced[it.node] = 1;
      const int p = u_.nodes[it.node].parent;
      if ((it.refs & 2) && p >= 0) referenced[p] = 1;
    }
    for (std::size_t v = 0; v < u_.nodes.size(); ++v) {
      const auto& n = u_.nodes[v];
      if (nodeUse_[v] > 0 && n.boundRefsParent && n.parent >= 0) {
        referenced[n.parent] = 1;
      }
    }
    for (std::size_t v = 0; v < u_.nodes.size(); ++v) {
      if (nodeUse_[v] > 0 && u_.nodes[v].kind == detail::NodeKind::Loop &&
          !referenced[v]) {
        return false;
      }
    }
    return true;
  }

  void record() {
    const std::int64_t c = costThirds();
    if (c < bestThirds_ && valid()) {
      bestThirds_ = c;
      best_ = chosen_;
    }
  }

  std::uint64_t unopenedHeaderCoeff(int a) const {
    std::uint64_t k = u_.items[a].coeff;
    for (int v : paths_[a]) {
      if (nodeUse_[v] == 0) k |= u_.nodes[v].coeff;
    }
    return k;
  }

  int unopenedUnits(int a) const {
    int k = 0;
    for (int v : paths_[a]) {
      if (nodeUse_[v] == 0) k += u_.nodes[v].units;
    }
    return k;
  }

  // Lower bound on the remaining cost plus the branching element and its
  // candidates, best first. Returns false when the state cannot be completed
  // within the incumbent.
  bool expand(Frame& f) {
    const Mask open = full_.without(covered_);
    std::vector<double> share(u_.nodes.size(), 0.0);
    for (std::size_t v = 0; v < u_.nodes.size(); ++v) {
      if (nodeUse_[v] > 0) continue;
      const int k = (u_.nodes[v].cover & open).count();
      if (k > 0) share[v] = static_cast<double>(u_.nodes[v].units) / k;
    }
    constexpr double kNone = std::numeric_limits<double>::infinity();
    std::vector<double> cheapest(static_cast<std::size_t>(n_), kNone);
    std::vector<int> fewestNew(static_cast<std::size_t>(n_), 64);
    std::vector<int> count(static_cast<std::size_t>(n_), 0);
    for (std::size_t a = 0; a < u_.items.size(); ++a) {
      if (forbidden_[a]) continue;
      const Mask hit = u_.items[a].cover & open;
      const int k = hit.count();
      if (k == 0) continue;
      double nodeShare = 0;
      for (int v : paths_[a]) {
        if (nodeUse_[v] == 0) nodeShare += share[v];
      }
      const double w = (1.0 + nodeShare) / k;
      const int fresh =
          std::popcount(unopenedHeaderCoeff(static_cast<int>(a)) & ~coeff_);
      hit.forEach([&](int e) {
        cheapest[e] = std::min(cheapest[e], w);
        fewestNew[e] = std::min(fewestNew[e], fresh);
        ++count[e];
      });
    }
    double frac = 0;
    int extra = 0;
    int pick = -1;
    bool feasible = true;
    open.forEach([&](int e) {
      if (count[e] == 0) feasible = false;
      frac += cheapest[e];
      extra = std::max(extra, fewestNew[e]);
      if (pick < 0 || count[e] < count[pick]) pick = e;
    });
    if (!feasible) return false;
    const int have = std::popcount(coeff_);
    const std::int64_t coeffDelta =
        std::max(0, have + extra - 1) - std::max(0, have - 1);
    const std::int64_t lb =
        3 * static_cast<std::int64_t>(std::ceil(frac - 1e-9)) + coeffDelta;
    f.base = costThirds();
    f.bound = f.base + lb;
    if (f.bound >= bestThirds_) return false;

    std::vector<std::pair<double, int>> ranked;
    for (std::size_t a = 0; a < u_.items.size(); ++a) {
      if (forbidden_[a] || !u_.items[a].cover.test(pick)) continue;
      const int k = (u_.items[a].cover & open).count();
      const double r =
          (3.0 * (1 + unopenedUnits(static_cast<int>(a))) +
           std::popcount(unopenedHeaderCoeff(static_cast<int>(a)) & ~coeff_)) /
          k;
      ranked.emplace_back(r, static_cast<int>(a));
    }
    std::sort(ranked.begin(), ranked.end());
    f.cands.clear();
    for (auto& [r, a] : ranked) f.cands.push_back(a);
    f.coveredBefore = covered_;
    f.coeffBefore = coeff_;
    return true;
  }

  void step() {
    if (stack_.empty()) {
      done_ = true;
      return;
    }
    Frame& f = stack_.back();
    if (f.applied >= 0) {
      undo(f.applied, f.coveredBefore, f.coeffBefore);
      ++forbidden_[f.applied];
      f.forbade.push_back(f.applied);
      f.applied = -1;
    }
    while (f.next < f.cands.size() && forbidden_[f.cands[f.next]]) ++f.next;
    if (f.next == f.cands.size() || f.bound >= bestThirds_) {
      for (int a : f.forbade) --forbidden_[a];
      stack_.pop_back();
      if (stack_.empty()) done_ = true;
      return;
    }
    const int a = f.cands[f.next++];
    apply(a);
    f.applied = a;
    if (covered_ == full_) {
      record();
      return;
    }
    if (costThirds() >= bestThirds_) return;
    Frame child;
    if (expand(child)) stack_.push_back(std::move(child));
  }

  void seedIncumbent() {
    // Flat program: one top-level primitive per command.
    std::vector<int> flat(static_cast<std::size_t>(n_), -1);
    for (std::size_t a = 0; a < u_.items.size(); ++a) {
      const auto& it = u_.items[a];
      if (it.node == -1 && it.cover.count() == 1) {
        it.cover.forEach([&](int e) {
          if (flat[e] < 0) flat[e] = static_cast<int>(a);
        });
      }
    }
    for (int a : flat) {
      if (a >= 0) apply(a);
    }
    if (covered_ == full_) record();
    while (!chosen_.empty()) {
      undo(chosen_.back(), Mask{}, 0);
    }
    covered_ = Mask{};
    coeff_ = 0;

    // Greedy: cheapest marginal cost per newly covered command.
    while (!(covered_ == full_)) {
      const Mask open = full_.without(covered_);
      double bestRatio = std::numeric_limits<double>::infinity();
      int pick = -1;
      for (std::size_t a = 0; a < u_.items.size(); ++a) {
        const int k = (u_.items[a].cover & open).count();
        if (k == 0) continue;
        const double r =
            (3.0 * (1 + unopenedUnits(static_cast<int>(a))) +
             std::popcount(unopenedHeaderCoeff(static_cast<int>(a)) & ~coeff_)) /
            k;
        if (r < bestRatio) {
          bestRatio = r;
          pick = static_cast<int>(a);
        }
      }
      if (pick < 0) break;
      apply(pick);
    }
    if (covered_ == full_) record();
    while (!chosen_.empty()) undo(chosen_.back(), Mask{}, 0);
    covered_ = Mask{};
    coeff_ = 0;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// Tasks

struct SynthesisTask::Impl {
  Spec spec;
  SearchSubspace sigma;
  DslLimits limits;
  // Whole mode: a single search. Incremental mode: one per cluster, run in
  // order.
  std::vector<Spec> parts;
  std::vector<std::unique_ptr<CoverSearch>> searches;
  std::size_t current = 0;
  std::uint64_t setupNodes = 0;
  double elapsed = 0;

  Impl(const Spec& s, SearchSubspace sg, const DslLimits& l)
      : spec(s), sigma(sg), limits(l) {
    const auto t0 = std::chrono::steady_clock::now();
    parts = sigma.incremental ? incrementalClusters(spec) : std::vector<Spec>{spec};
    if (parts.empty()) parts.emplace_back();
    // Universes are built lazily so that setup work is charged to the slice
    // that performs it.
    searches.resize(parts.size());
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                   .count();
  }

  CoverSearch& search(std::size_t i) {
    if (!searches[i]) {
      auto u = detail::buildUniverse(parts[i], sigma.whole(), limits);
      setupNodes += u.items.size() + u.workUnits / 64;
      searches[i] = std::make_unique<CoverSearch>(std::move(u));
    }
    return *searches[i];
  }

  bool finished() const {
    return current >= parts.size();
  }

  std::uint64_t nodes() const {
    std::uint64_t n = setupNodes;
    for (const auto& s : searches) {
      if (s) n += s->nodes();
    }
    return n;
  }

  std::uint64_t run(std::uint64_t budget) {
    const auto t0 = std::chrono::steady_clock::now();
    std::uint64_t used = 0;
    while (!finished() && used < budget) {
      const std::uint64_t before = setupNodes;
      CoverSearch& s = search(current);
      used += setupNodes - before;
      if (used < budget) used += s.run(budget - used);
      if (s.done()) ++current;
    }
    elapsed += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                   .count();
    return used;
  }

  std::optional<Program> bestProgram() const {
    Program out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!searches[i] || !searches[i]->hasBest()) return std::nullopt;
      const auto& s = *searches[i];
      Program p = detail::assemble(s.universe(), s.bestItems());
      for (auto& st : p.statements) out.statements.push_back(std::move(st));
    }
    return out;
  }
};

SynthesisTask::SynthesisTask(const Spec& spec, SearchSubspace sigma,
                             const DslLimits& limits)
    : impl_(std::make_unique<Impl>(spec, sigma, limits)) {}
SynthesisTask::~SynthesisTask() = default;
SynthesisTask::SynthesisTask(SynthesisTask&&) noexcept = default;
SynthesisTask& SynthesisTask::operator=(SynthesisTask&&) noexcept = default;

std::uint64_t SynthesisTask::run(std::uint64_t nodeBudget) {
  return impl_->run(nodeBudget);
}

bool SynthesisTask::finished() const { return impl_->finished(); }

std::uint64_t SynthesisTask::nodesExplored() const { return impl_->nodes(); }

const SearchSubspace& SynthesisTask::subspace() const { return impl_->sigma; }

std::optional<Cost> SynthesisTask::bestCost() const {
  auto p = impl_->bestProgram();
  if (!p) return std::nullopt;
  return cost(*p);
}

Cost SynthesisTask::exhaustedBelow() const {
  constexpr auto kNever = Cost::fromThirds(kInfinity);
  if (impl_->finished()) {
    auto c = bestCost();
    return c ? *c : kNever;
  }
  if (impl_->sigma.incremental || !impl_->searches[0]) return Cost{};
  return Cost::fromThirds(impl_->searches[0]->frontierThirds());
}

SynthesisResult SynthesisTask::result() const {
  SynthesisResult r;
  r.program = impl_->bestProgram();
  if (r.program) r.cost = cost(*r.program);
  r.elapsedSeconds = impl_->elapsed;
  r.nodesExplored = nodesExplored();
  if (finished()) {
    r.status = r.program ? SynthStatus::Solved : SynthStatus::Exhausted;
    r.minimal = r.program && !impl_->sigma.incremental;
  } else {
    r.status = SynthStatus::BudgetExpired;
  }
  return r;
}

SynthesisResult synthesize(const Spec& spec, SearchSubspace sigma,
                           const SynthOptions& options) {
  SynthesisTask task(spec, sigma, options.limits);
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::uint64_t kSlice = 4096;
  bool timedOut = false;
  while (!task.finished() && task.nodesExplored() < options.nodeBudget) {
    const std::uint64_t left = options.nodeBudget - task.nodesExplored();
    task.run(std::min(kSlice, left));
    if (options.timeLimitSeconds &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count() > *options.timeLimitSeconds) {
      timedOut = !task.finished();
      break;
    }
  }
  auto r = task.result();
  if (timedOut) r.status = SynthStatus::Timeout;
  return r;
}

}  // namespace gsynth
