#include "gsynth/apps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gsynth {

namespace {

void collectFeatures(const Program& p, int level, SimilarityFeatures& f) {
  for (const auto& s : p.statements) {
    f[6 + std::min(level, 3) - 1] += 1;
    if (const auto* prim = std::get_if<Primitive>(&s.node)) {
      f[3 + static_cast<int>(prim->kind)] += 1;
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      f[0] += 1;
      if (!loop->guarded.empty()) f[2] += 1;
      collectFeatures(loop->guarded, level + 1, f);
      collectFeatures(loop->body, level + 1, f);
    } else {
      f[1] += 1;
      collectFeatures(std::get<Reflect>(s.node).body, level + 1, f);
    }
  }
}

// Visits For nodes in preorder: the loop, then its guarded block, then its
// body.
template <typename F>
void forEachLoop(Program& p, int& counter, F&& visit) {
  for (auto& s : p.statements) {
    if (auto* loop = std::get_if<For>(&s.node)) {
      visit(counter++, *loop);
      forEachLoop(loop->guarded, counter, visit);
      forEachLoop(loop->body, counter, visit);
    } else if (auto* r = std::get_if<Reflect>(&s.node)) {
      forEachLoop(r->body, counter, visit);
    }
  }
}

void checkBounds(const Program& p, std::vector<int>& env) {
  for (const auto& s : p.statements) {
    if (const auto* loop = std::get_if<For>(&s.node)) {
      const int n = loop->bound.eval(env);
      if (n < 1) throw ExtrapolationError("a loop bound drops below one");
      for (int i = 0; i < n; ++i) {
        env.push_back(i);
        if (i > 0) checkBounds(loop->guarded, env);
        checkBounds(loop->body, env);
        env.pop_back();
      }
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      checkBounds(r->body, env);
    }
  }
}

}  // namespace

SimilarityFeatures similarityFeatures(const Program& p) {
  SimilarityFeatures f{};
  collectFeatures(p, 1, f);
  return f;
}

double programDistance(const Program& a, const Program& b) {
  const auto fa = similarityFeatures(a);
  const auto fb = similarityFeatures(b);
  double d = 0;
  for (int k = 0; k < kSimilarityFeatures; ++k) d += std::abs(fa[k] - fb[k]);
  return d;
}

double imageDistanceSurrogate(const Spec& a, const Spec& b) {
  return static_cast<double>(symmetricDifference(a, b));
}

std::vector<std::size_t> nearestPrograms(const Program& query, const std::vector<Program>& others) {
  std::vector<double> d;
  for (const auto& p : others) d.push_back(programDistance(query, p));
  std::vector<std::size_t> order(others.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  return order;
}

int loopCount(const Program& p) {
  Program copy = p;
  int n = 0;
  forEachLoop(copy, n, [](int, For&) {});
  return n;
}

std::vector<LoopChange> allLoops(const Program& p, int delta) {
  std::vector<LoopChange> out;
  for (int k = 0; k < loopCount(p); ++k) out.push_back({k, delta});
  return out;
}

Extrapolation extrapolate(const ExtrapolationRequest& req) {
  Extrapolation out;
  out.program = req.program;
  const int loops = loopCount(out.program);
  for (const auto& c : req.changes) {
    if (c.loop < 0 || c.loop >= loops) {
      throw ExtrapolationError("selector " + std::to_string(c.loop) + " names no loop (program has " +
                               std::to_string(loops) + ")");
    }
  }
  int counter = 0;
  forEachLoop(out.program, counter, [&](int index, For& loop) {
    for (const auto& c : req.changes) {
      if (c.loop == index) loop.bound.offset += c.delta;
    }
  });
  std::vector<int> env;
  checkBounds(out.program, env);
  out.spec = execute(out.program, ExecOptions{std::nullopt});
  out.view = fitViewport(out.spec);
  out.tikz = emitTikz(out.spec, out.view.cells > kGridSize ? double(kGridSize) / out.view.cells : 1.0);
  return out;
}

}  // namespace gsynth
