#include "gsynth/json_io.hpp"

namespace gsynth {

namespace {

CommandKind kindFromName(const std::string& name) {
  if (name == "circle") return CommandKind::Circle;
  if (name == "rectangle") return CommandKind::Rectangle;
  if (name == "line") return CommandKind::Line;
  throw DslError("unknown command kind '" + name + "'");
}

Json statementsToJson(const Program& p);
Program statementsFromJson(const Json& j);

Json statementToJson(const Statement& s) {
  if (const auto* prim = std::get_if<Primitive>(&s.node)) {
    Json args = Json::array();
    for (int k = 0; k < prim->arity(); ++k) args.push_back(toJson(prim->args[k]));
    Json j = {{"kind", kindName(prim->kind)}, {"args", args}};
    if (prim->kind == CommandKind::Line) {
      j["arrow"] = prim->arrow;
      j["dashed"] = prim->dashed;
    }
    return j;
  }
  if (const auto* loop = std::get_if<For>(&s.node)) {
    return {{"kind", "for"},
            {"bound", toJson(loop->bound)},
            {"guarded", statementsToJson(loop->guarded)},
            {"body", statementsToJson(loop->body)}};
  }
  const auto& r = std::get<Reflect>(s.node);
  return {{"kind", "reflect"},
          {"axis", r.axis.dim == Axis::Dim::X ? "x" : "y"},
          {"value", r.axis.value},
          {"body", statementsToJson(r.body)}};
}

Statement statementFromJson(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "for") {
    For loop;
    loop.bound = expressionFromJson(j.at("bound"));
    loop.guarded = statementsFromJson(j.value("guarded", Json::array()));
    loop.body = statementsFromJson(j.value("body", Json::array()));
    return Statement{std::move(loop)};
  }
  if (kind == "reflect") {
    Reflect r;
    const std::string axis = j.at("axis").get<std::string>();
    if (axis != "x" && axis != "y") throw DslError("axis must be x or y");
    r.axis = {axis == "x" ? Axis::Dim::X : Axis::Dim::Y,
              j.at("value").get<int>()};
    r.body = statementsFromJson(j.value("body", Json::array()));
    return Statement{std::move(r)};
  }
  Primitive prim;
  prim.kind = kindFromName(kind);
  const auto& args = j.at("args");
  if (static_cast<int>(args.size()) != prim.arity()) {
    throw DslError("wrong number of arguments for " + kind);
  }
  for (int k = 0; k < prim.arity(); ++k) {
    prim.args[static_cast<std::size_t>(k)] = expressionFromJson(args[k]);
  }
  prim.arrow = j.value("arrow", false);
  prim.dashed = j.value("dashed", false);
  return Statement{prim};
}

Json statementsToJson(const Program& p) {
  Json out = Json::array();
  for (const auto& s : p.statements) out.push_back(statementToJson(s));
  return out;
}

Program statementsFromJson(const Json& j) {
  Program p;
  for (const auto& s : j) p.statements.push_back(statementFromJson(s));
  return p;
}

}  // namespace

Json toJson(const DrawCommand& c) {
  if (c.kind == CommandKind::Circle) {
    return {{"kind", "circle"}, {"x", c.x1}, {"y", c.y1}};
  }
  Json j = {{"kind", kindName(c.kind)},
            {"x1", c.x1}, {"y1", c.y1}, {"x2", c.x2}, {"y2", c.y2}};
  if (c.kind == CommandKind::Line) {
    j["arrow"] = c.arrow;
    j["dashed"] = c.dashed;
  }
  return j;
}

Json toJson(const Spec& s) {
  Json cmds = Json::array();
  for (const auto& c : s) cmds.push_back(toJson(c));
  return {{"commands", cmds}};
}

Json toJson(const Expression& e) {
  return {{"scale", e.var ? e.scale : 0},
          {"var", e.var ? Json(*e.var) : Json(nullptr)},
          {"offset", e.offset}};
}

Json toJson(const Program& p) { return {{"statements", statementsToJson(p)}}; }

DrawCommand commandFromJson(const Json& j) {
  const CommandKind kind = kindFromName(j.at("kind").get<std::string>());
  if (kind == CommandKind::Circle) {
    return DrawCommand::circle(j.at("x").get<int>(), j.at("y").get<int>());
  }
  const int x1 = j.at("x1").get<int>();
  const int y1 = j.at("y1").get<int>();
  const int x2 = j.at("x2").get<int>();
  const int y2 = j.at("y2").get<int>();
  if (kind == CommandKind::Rectangle) return DrawCommand::rectangle(x1, y1, x2, y2);
  return DrawCommand::line(x1, y1, x2, y2, j.value("arrow", false),
                           j.value("dashed", false));
}

Spec specFromJson(const Json& j) {
  const Json& cmds = j.is_array() ? j : j.at("commands");
  std::vector<DrawCommand> out;
  for (const auto& c : cmds) out.push_back(commandFromJson(c));
  return Spec(std::move(out));
}

Expression expressionFromJson(const Json& j) {
  if (j.is_number_integer()) return Expression::constant(j.get<int>());
  const int offset = j.value("offset", 0);
  const auto it = j.find("var");
  if (it == j.end() || it->is_null()) return Expression::constant(offset);
  return Expression::affine(j.at("scale").get<int>(), it->get<int>(), offset);
}

Program programFromJson(const Json& j) {
  return statementsFromJson(j.is_array() ? j : j.at("statements"));
}

}  // namespace gsynth
