#pragma once

// JSON schemas for specs and programs.
//
//   command     {"kind":"circle","x":1,"y":2}
//               {"kind":"rectangle"|"line","x1":..,"y1":..,"x2":..,"y2":..,
//                "arrow":false,"dashed":false}            (flags: lines only)
//   spec        {"commands":[command...]}
//   expression  {"scale":3,"var":0,"offset":1} / {"scale":0,"var":null,"offset":5}
//   statement   {"kind":"circle"|"rectangle"|"line","args":[expr...],...}
//               {"kind":"for","bound":expr,"guarded":[stmt...],"body":[stmt...]}
//               {"kind":"reflect","axis":"x"|"y","value":8,"body":[stmt...]}
//   program     {"statements":[stmt...]}

#include <json.hpp>

#include "gsynth/dsl.hpp"

namespace gsynth {

using Json = nlohmann::json;

Json toJson(const DrawCommand& c);
Json toJson(const Spec& s);
Json toJson(const Expression& e);
Json toJson(const Program& p);

DrawCommand commandFromJson(const Json& j);
Spec specFromJson(const Json& j);
Expression expressionFromJson(const Json& j);
Program programFromJson(const Json& j);

}  // namespace gsynth
