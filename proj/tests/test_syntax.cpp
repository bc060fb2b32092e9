#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gsynth/json_io.hpp"
#include "gsynth/scenegen.hpp"
#include "gsynth/syntax.hpp"

using namespace gsynth;

TEST_CASE("parse and print") {
  const std::string src = "for(i<3){rectangle(3*i,-2*i+4,3*i+2,6); for(j<i+1){circle(3*i+1,-2*j+5)}}";
  const auto p = parseProgram(src);
  CHECK(formatProgram(p) == src);
  CHECK(parseProgram(formatProgram(p, SourceStyle::Compact)) == p);

  const auto r = parseProgram("reflect(y=8){for(i<3){if(i>0){rectangle(3*i-1,2,3*i,3)}; circle(3*i+1,3*i+1)}}");
  CHECK(printedLineCount(r) == 5);
  CHECK(formatProgram(r, SourceStyle::Indented) ==
        "reflect(y=8)\n"
        " for(i<3)\n"
        "  if(i>0)\n"
        "   rectangle(3*i-1,2,3*i,3)\n"
        "  circle(3*i+1,3*i+1)\n");

  const auto arrow = parseProgram("line(4,9,7,6,arrow); line(1,1,1,4,dashed)");
  const auto s = execute(arrow);
  CHECK(s[1].arrow);
  CHECK(s[0].dashed);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parseProgram("circle(1)"), ParseError);
  CHECK_THROWS_AS(parseProgram("for(i<3){circle(j,1)}"), ParseError);
  CHECK_THROWS_AS(parseProgram("square(1,1)"), ParseError);
  CHECK_THROWS_AS(parseProgram("for(i<3){circle(i+1,1)"), ParseError);
}

TEST_CASE("command formatting") {
  CHECK(formatCommand(DrawCommand::circle(5, 9)) == "Circle(5,9)");
  CHECK(formatCommand(DrawCommand::line(5, 13, 2, 10, true)) == "Line(5,13,2,10,arrow)");
  CHECK(formatCommand(DrawCommand::rectangle(1, 10, 3, 11)) == "Rectangle(1,10,3,11)");
}

TEST_CASE("json schema") {
  const auto j = toJson(DrawCommand::circle(1, 2));
  CHECK(j == Json::parse(R"({"kind":"circle","x":1,"y":2})"));
  const auto line = commandFromJson(Json::parse(R"({"kind":"line","x1":4,"y1":4,"x2":1,"y2":1})"));
  CHECK(line == DrawCommand::line(1, 1, 4, 4));
  CHECK_THROWS(specFromJson(Json::parse(R"({"commands":[{"kind":"blob"}]})")));
}

TEST_CASE("random programs round-trip through source and json") {
  std::mt19937_64 rng(21);
  for (int n = 0; n < 200; ++n) {
    ProgramConfig pc;
    pc.seed = rng();
    const auto p = randomProgram(pc);
    CHECK(parseProgram(formatProgram(p)) == p);
    CHECK(programFromJson(Json::parse(toJson(p).dump())) == p);
    const auto s = execute(p);
    CHECK(specFromJson(Json::parse(toJson(s).dump())) == s);
  }
}
