#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "brute_force.hpp"
#include "gsynth/scenegen.hpp"
#include "gsynth/synth.hpp"
#include "gsynth/syntax.hpp"

using namespace gsynth;

namespace {

const DslLimits kTiny{8, -8, 8, 3};

Program tinyProgram(std::uint64_t seed) {
  ProgramConfig pc;
  pc.gridSize = 8;
  pc.maxCommands = 4;
  pc.maxStatements = 4;
  pc.loopWeight = 6;
  pc.seed = seed;
  return randomProgram(pc);
}

SynthOptions withLimits(const DslLimits& limits) {
  SynthOptions opt;
  opt.limits = limits;
  return opt;
}

}  // namespace

TEST_CASE("subspace family") {
  std::set<std::string> names;
  for (int k = 0; k < kSubspaceCount; ++k) {
    const auto s = SearchSubspace::fromIndex(k);
    CHECK(s.index() == k);
    CHECK(SearchSubspace::parse(s.name()) == s);
    CHECK(s.within(s));
    CHECK(s.whole().within(SearchSubspace::full()));
    names.insert(s.name());
  }
  CHECK(names.size() == 24);
  CHECK(SearchSubspace::parse("loops,reflect,depth3") == SearchSubspace::full());
  CHECK_THROWS(SearchSubspace::parse("loops,depth4"));
  CHECK(subspaceOf(parseProgram("circle(1,1)")) == SearchSubspace{false, false, false, 1});
  CHECK(subspaceOf(parseProgram("reflect(x=8){circle(1,1)}")) == SearchSubspace{false, true, false, 2});
}

TEST_CASE("singleton spec") {
  for (int k = 0; k < kSubspaceCount; ++k) {
    const auto r = synthesize(Spec({DrawCommand::circle(5, 5)}), SearchSubspace::fromIndex(k));
    REQUIRE(r.status == SynthStatus::Solved);
    CHECK(formatProgram(*r.program) == "circle(5,5)");
    CHECK(*r.cost == Cost::whole(1));
  }
  const auto empty = synthesize(Spec{}, SearchSubspace::full());
  CHECK(empty.status == SynthStatus::Solved);
  CHECK(empty.program->empty());
}

TEST_CASE("printed example programs re-synthesize at least as compactly") {
  const char* programs[] = {
      "for(i<3){line(i,-1*i+6,2*i+2,-1*i+6); line(i,-2*i+4,i,-1*i+6)}",
      "circle(4,10); for(i<3){circle(-3*i+7,5); circle(-3*i+7,1); line(-3*i+7,4,-3*i+7,2,arrow); "
      "line(4,9,-3*i+7,6,arrow)}",
      "for(i<3){for(j<3){if(j>0){line(-3*j+8,-3*i+7,-3*j+9,-3*i+7); line(-3*i+7,-3*j+8,-3*i+7,-3*j+9)}; "
      "circle(-3*j+7,-3*i+7)}}",
      "for(i<4){for(j<4){rectangle(-3*i+9,-2*j+6,-3*i+11,-2*j+7)}}",
      "reflect(y=8){for(i<3){if(i>0){rectangle(3*i-1,2,3*i,3)}; circle(3*i+1,3*i+1)}}",
  };
  for (const char* src : programs) {
    CAPTURE(src);
    const auto printed = parseProgram(src);
    const auto spec = execute(printed);
    SynthOptions opt;
    opt.timeLimitSeconds = 60;
    const auto r = synthesize(spec, SearchSubspace::full(), opt);
    REQUIRE(r.program);
    CHECK(consistent(*r.program, spec));
    CHECK(printedLineCount(*r.program) <= printedLineCount(printed));
    CHECK(*r.cost <= cost(printed));
  }
}

TEST_CASE("preempted runs match a single run") {
  std::mt19937_64 rng(31);
  for (int n = 0; n < 20; ++n) {
    ProgramConfig pc;
    pc.seed = rng();
    pc.maxDepth = 2;
    const auto spec = execute(randomProgram(pc));
    const auto sigma = SearchSubspace::fromIndex(int(rng() % kSubspaceCount));
    const auto whole = synthesize(spec, sigma);
    SynthesisTask task(spec, sigma);
    while (!task.finished()) {
      task.run(37);
      CHECK(task.exhaustedBelow() <= (task.bestCost() ? *task.bestCost() : task.exhaustedBelow()));
    }
    const auto chunked = task.result();
    CHECK(chunked.cost == whole.cost);
    CHECK(chunked.program == whole.program);
    CHECK(chunked.nodesExplored == whole.nodesExplored);
  }
}

TEST_CASE("larger subspaces never cost more") {
  std::mt19937_64 rng(41);
  for (int n = 0; n < 25; ++n) {
    ProgramConfig pc;
    pc.seed = rng();
    pc.maxDepth = 2;
    pc.maxStatements = 4;
    const auto spec = execute(randomProgram(pc));
    std::map<int, Cost> best;
    for (int k = 0; k < kSubspaceCount; ++k) {
      const auto s = SearchSubspace::fromIndex(k);
      if (s.incremental) continue;
      const auto r = synthesize(spec, s);
      REQUIRE(r.minimal);
      best[k] = *r.cost;
    }
    for (const auto& [a, ca] : best) {
      for (const auto& [b, cb] : best) {
        if (SearchSubspace::fromIndex(a).within(SearchSubspace::fromIndex(b))) CHECK(cb <= ca);
      }
    }
  }
}

TEST_CASE("incremental mode is consistent and never beats the whole search") {
  std::mt19937_64 rng(43);
  for (int n = 0; n < 20; ++n) {
    SceneConfig sc;
    sc.seed = rng();
    sc.maxObjects = 10;
    sc.structuredFraction = 0.7;
    const auto spec = randomSpec(sc);
    const SearchSubspace inc{true, true, true, 2};
    const auto a = synthesize(spec, inc);
    const auto b = synthesize(spec, inc.whole());
    REQUIRE(a.program);
    CHECK(consistent(*a.program, spec));
    CHECK(inSubspace(*a.program, inc));
    CHECK_FALSE(a.minimal);
    if (b.minimal) CHECK(*a.cost >= *b.cost);
  }
  CHECK(incrementalClusters(Spec({DrawCommand::circle(1, 1), DrawCommand::circle(2, 2), DrawCommand::circle(9, 9)}))
            .size() == 2);
}

TEST_CASE("node budget") {
  const auto spec = execute(parseProgram("for(i<4){for(j<4){rectangle(-3*i+9,-2*j+6,-3*i+11,-2*j+7)}}"));
  SynthOptions opt;
  opt.nodeBudget = 50;
  const auto r = synthesize(spec, SearchSubspace::full(), opt);
  CHECK(r.status == SynthStatus::BudgetExpired);
  // universe setup is charged as one step, so only the search itself stops
  SynthesisTask probe(spec, SearchSubspace::full());
  const auto setup = probe.run(1) - 1;
  CHECK(r.nodesExplored <= setup + 50);
  // the incumbent is the flat program or better
  REQUIRE(r.program);
  CHECK(consistent(*r.program, spec));
  CHECK(*r.cost <= flatCost(spec));
}

TEST_CASE("enumerator lists each single command once") {
  const DslLimits limits{4, -4, 4, 1};
  std::set<std::uint64_t> seen;
  int programs = 0;
  enumerateSubspace({false, false, false, 1}, Cost::fromThirds(5), limits, [&](const Program& p) {
    ++programs;
    CHECK(p.statements.size() == 1);
    const auto s = execute(p, ExecOptions{4});
    REQUIRE(s.size() == 1);
    seen.insert(s[0].key());
    return true;
  });
  // every on-grid command with at most three distinct coordinates
  std::set<std::uint64_t> expected;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      expected.insert(DrawCommand::circle(a, b).key());
      for (int c = 0; c < 4; ++c) {
        for (int d = 0; d < 4; ++d) {
          if (std::set<int>{a, b, c, d}.size() > 3) continue;
          if (auto r = DrawCommand::fromRaw(CommandKind::Rectangle, {a, b, c, d}, false, false)) {
            expected.insert(r->key());
          }
          for (int f = 0; f < 4; ++f) {
            if (auto l = DrawCommand::fromRaw(CommandKind::Line, {a, b, c, d}, f & 1, f & 2)) {
              expected.insert(l->key());
            }
          }
        }
      }
    }
  }
  CHECK(programs == int(expected.size()));
  CHECK(seen == expected);
}

TEST_CASE("synthesizer matches the enumerator's cheapest program per spec") {
  // Every program up to the ceiling is listed, so the cheapest one per spec is
  // the true minimum. Specs reachable in more than one way are the
  // interesting ones: there the search has to pick the cheaper form.
  const DslLimits limits{3, -3, 3, 2};
  const SearchSubspace sigma{false, true, false, 2};
  struct Entry {
    Spec spec;
    Cost best;
    int programs = 0;
  };
  std::map<std::vector<std::uint64_t>, Entry> cheapest;
  enumerateSubspace(sigma, Cost::fromThirds(8), limits, [&](const Program& p) {
    CHECK_FALSE(normalFormViolation(p, limits).has_value());
    CHECK(inSubspace(p, sigma));
    const auto s = execute(p, ExecOptions{3});
    std::vector<std::uint64_t> key;
    for (const auto& c : s) key.push_back(c.key());
    auto [it, fresh] = cheapest.try_emplace(key, Entry{s, cost(p), 0});
    it->second.best = std::min(it->second.best, cost(p));
    ++it->second.programs;
    return true;
  });
  int checked = 0;
  for (const auto& [key, e] : cheapest) {
    if (e.programs < 2) continue;
    const auto r = synthesize(e.spec, sigma, withLimits(limits));
    REQUIRE(r.minimal);
    CHECK(*r.cost == e.best);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("synthesizer matches the brute-force oracle on tiny specs") {
  std::mt19937_64 rng(51);
  for (int n = 0; n < 8; ++n) {
    const auto truth = tinyProgram(rng());
    const auto spec = execute(truth, ExecOptions{8});
    CAPTURE(formatProgram(truth));
    for (int k = 0; k < kSubspaceCount; ++k) {
      const auto sigma = SearchSubspace::fromIndex(k);
      if (sigma.incremental) continue;
      const auto r = synthesize(spec, sigma, withLimits(kTiny));
      const auto o = oracle::bruteForceMinimum(spec, sigma, kTiny);
      REQUIRE(o);
      REQUIRE(r.minimal);
      CHECK(*r.cost == o->cost);
      CHECK(consistent(o->witness, spec, 8));
      CHECK(cost(o->witness) == o->cost);
    }
  }
}
