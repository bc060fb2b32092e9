#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gsynth/dsl.hpp"
#include "gsynth/scenegen.hpp"
#include "gsynth/syntax.hpp"

using namespace gsynth;

namespace {

using C = DrawCommand;

// Collects every scale and offset by walking the AST, for checking the cost
// function's coefficient charge.
void collectConstants(const Program& p, std::set<int>& out) {
  auto expr = [&](const Expression& e) {
    out.insert(e.offset);
    if (e.var) out.insert(e.scale);
  };
  for (const auto& s : p.statements) {
    if (const auto* prim = std::get_if<Primitive>(&s.node)) {
      for (int k = 0; k < prim->arity(); ++k) expr(prim->args[std::size_t(k)]);
    } else if (const auto* loop = std::get_if<For>(&s.node)) {
      expr(loop->bound);
      collectConstants(loop->guarded, out);
      collectConstants(loop->body, out);
    } else {
      // axis positions are not charged
      collectConstants(std::get<Reflect>(s.node).body, out);
    }
  }
}

int countNodes(const Program& p) {
  int n = 0;
  for (const auto& s : p.statements) {
    ++n;
    if (const auto* loop = std::get_if<For>(&s.node)) {
      n += countNodes(loop->guarded) + countNodes(loop->body);
      if (loop->bound.isConstant() && loop->bound.offset == 2) ++n;
    } else if (const auto* r = std::get_if<Reflect>(&s.node)) {
      n += countNodes(r->body);
    }
  }
  return n;
}

Spec randomScene(std::mt19937_64& rng, int maxObjects = 6) {
  SceneConfig cfg;
  cfg.maxObjects = maxObjects;
  cfg.seed = rng();
  return randomSpec(cfg);
}

}  // namespace

TEST_CASE("command normalization") {
  CHECK(C::rectangle(5, 6, 1, 2) == C::rectangle(1, 2, 5, 6));
  CHECK(C::line(4, 4, 1, 1) == C::line(1, 1, 4, 4));
  // arrows keep their direction
  CHECK_FALSE(C::line(4, 4, 1, 1, true) == C::line(1, 1, 4, 4, true));
  CHECK_FALSE(C::fromRaw(CommandKind::Rectangle, {1, 1, 1, 4}, false, false).has_value());
  CHECK_FALSE(C::fromRaw(CommandKind::Line, {2, 3, 2, 3}, false, false).has_value());
  CHECK_THROWS(C::rectangle(1, 1, 4, 1));
}

TEST_CASE("Fig 1(b) program") {
  const auto p = parseProgram("for(i<3){rectangle(3*i,-2*i+4,3*i+2,6); for(j<i+1){circle(3*i+1,-2*j+5)}}");
  const auto s = execute(p);
  const Spec expected({C::rectangle(0, 4, 2, 6), C::rectangle(3, 2, 5, 6), C::rectangle(6, 0, 8, 6),
                       C::circle(1, 5), C::circle(4, 5), C::circle(4, 3), C::circle(7, 5), C::circle(7, 3),
                       C::circle(7, 1)});
  CHECK(s == expected);
  CHECK(s.kindCounts() == std::array<int, 3>{6, 3, 0});
}

TEST_CASE("reflected program from the examples table") {
  const auto p = parseProgram("reflect(y=8){for(i<3){if(i>0){rectangle(3*i-1,2,3*i,3)}; circle(3*i+1,3*i+1)}}");
  const auto s = execute(p);
  REQUIRE(s.size() == 9);
  // the circle on the axis maps to itself
  std::vector<C> circles;
  for (const auto& c : s) {
    if (c.kind == CommandKind::Circle) circles.push_back(c);
  }
  CHECK(circles == std::vector<C>{C::circle(1, 1), C::circle(1, 7), C::circle(4, 4), C::circle(7, 1),
                                  C::circle(7, 7)});
  for (const auto& r : {C::rectangle(2, 2, 3, 3), C::rectangle(5, 2, 6, 3), C::rectangle(2, 5, 3, 6),
                        C::rectangle(5, 5, 6, 6)}) {
    CHECK(s.contains(r));
  }
}

TEST_CASE("execution edge cases") {
  CHECK(execute(Program{}).empty());
  // non-positive bounds emit nothing
  CHECK(execute(parseProgram("for(i<0){circle(i+1,1)}")).empty());
  CHECK_THROWS_AS(execute(parseProgram("circle(16,2)")), DslError);
  CHECK(execute(parseProgram("circle(16,2)"), ExecOptions{std::nullopt}).size() == 1);
  // duplicates collapse
  CHECK(execute(parseProgram("circle(1,1); circle(1,1)")).size() == 1);
}

TEST_CASE("mirror") {
  const Axis y8{Axis::Dim::Y, 8};
  const Axis x10{Axis::Dim::X, 10};
  CHECK(mirror(C::circle(3, 1), y8) == C::circle(3, 7));
  CHECK(mirror(C::circle(3, 1), x10) == C::circle(7, 1));
  CHECK(mirror(C::rectangle(1, 1, 3, 2), y8) == C::rectangle(1, 6, 3, 7));
  // arrow head follows its mapped endpoint
  CHECK(mirror(C::line(1, 1, 4, 2, true), x10) == C::line(9, 1, 6, 2, true));
  CHECK(mirror(C::line(1, 1, 4, 2, false, true), x10) == C::line(6, 2, 9, 1, false, true));
}

TEST_CASE("cost") {
  CHECK(cost(Program{}) == Cost{});
  CHECK(cost(parseProgram("circle(1,1); circle(2,2)")) == Cost::fromThirds(7));
  CHECK(cost(parseProgram("for(i<2){circle(1*i+1,1)}")) == Cost::fromThirds(10));
  CHECK(cost(parseProgram("for(i<3){circle(1*i+1,1)}")) == Cost::fromThirds(7));
  CHECK(cost(parseProgram("for(i<2){circle(1*i+1,1)}"), CostOptions{false}) == Cost::fromThirds(9));
  CHECK(Cost::fromThirds(7).str() == "7/3");
  CHECK(Cost::whole(2).str() == "2");

  const auto b = costBreakdown(parseProgram("for(i<2){circle(3*i+1,5)}; circle(2,2)"));
  CHECK(b.commandNodes == 3);
  CHECK(b.lengthTwoLoops == 1);
  CHECK(b.distinctCoefficients == 4);
}

TEST_CASE("cost agrees with an AST walk on random programs") {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 200; ++n) {
    ProgramConfig pc;
    pc.seed = rng();
    const auto p = randomProgram(pc);
    std::set<int> constants;
    collectConstants(p, constants);
    const auto expected = Cost::whole(countNodes(p)) + Cost::fromThirds(std::int64_t(constants.size()) - 1);
    CHECK(cost(p) == expected);
  }
}

TEST_CASE("canonical order") {
  const Spec s({C::line(0, 0, 1, 1), C::circle(5, 5)});
  CHECK(s[0] == C::circle(5, 5));
  CHECK(s[1] == C::line(0, 0, 1, 1));
  const auto s9 = execute(parseProgram("reflect(y=8){for(i<3){if(i>0){rectangle(3*i-1,2,3*i,3)}; circle(3*i+1,3*i+1)}}"));
  CHECK(s9[0] == C::circle(1, 1));
  CHECK(s9[1] == C::circle(1, 7));
  CHECK(s9[5].kind == CommandKind::Rectangle);
}

TEST_CASE("spec set operations") {
  const Spec a({C::circle(1, 1), C::circle(2, 2)});
  const Spec b({C::circle(2, 2), C::circle(3, 3)});
  CHECK(symmetricDifference(a, a) == 0);
  CHECK(symmetricDifference(Spec({C::circle(1, 1)}), Spec{}) == 1);
  CHECK(symmetricDifference(a, b) == 2);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(Spec{}, Spec{}) == 1.0);
  CHECK(iou(a, Spec({C::circle(9, 9)})) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("symmetric difference is a metric") {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 200; ++n) {
    const auto a = randomScene(rng), b = randomScene(rng), c = randomScene(rng);
    CHECK(symmetricDifference(a, b) == symmetricDifference(b, a));
    CHECK((symmetricDifference(a, b) == 0) == (a == b));
    CHECK(symmetricDifference(a, c) <= symmetricDifference(a, b) + symmetricDifference(b, c));
  }
}

TEST_CASE("canonicalize is idempotent and order-insensitive") {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 200; ++n) {
    const auto s = randomScene(rng, 12);
    auto cmds = s.commands();
    CHECK(canonicalize(cmds) == cmds);
    std::shuffle(cmds.begin(), cmds.end(), rng);
    CHECK(canonicalize(cmds) == s.commands());
  }
}

TEST_CASE("mirror is an involution") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> axisValue(0, 30);
  int checked = 0;
  for (int n = 0; n < 200; ++n) {
    for (const auto& c : randomScene(rng)) {
      const Axis a{rng() % 2 ? Axis::Dim::X : Axis::Dim::Y, axisValue(rng)};
      CHECK(mirror(mirror(c, a), a) == c);
      ++checked;
    }
  }
  CHECK(checked >= 200);
}

TEST_CASE("normal form") {
  CHECK_FALSE(normalFormViolation(parseProgram("for(i<3){circle(3*i+1,2)}")).has_value());
  // loop variable never referenced
  CHECK(normalFormViolation(parseProgram("for(i<3){circle(1,2)}")).has_value());
  CHECK(normalFormViolation(parseProgram("circle(17,2)")).has_value());
  CHECK(normalFormViolation(parseProgram("reflect(x=8){reflect(y=8){for(i<2){circle(i+1,1)}}}")).has_value());
}
