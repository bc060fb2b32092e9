#pragma once

// Surface syntax for programs and drawing commands.
//
//   for(i<3){rectangle(3*i,-2*i+4,3*i+2,6); for(j<i+1){circle(3*i+1,-2*j+5)}}
//   reflect(y=8){for(i<3){if(i>0){rectangle(3*i-1,2,3*i,3)}; circle(3*i+1,3*i+1)}}
//
// Loop variables print as i, j, k from the outermost loop inward.

#include <string>
#include <string_view>

#include "gsynth/dsl.hpp"

namespace gsynth {

enum class SourceStyle {
  Compact,   // single line with braces; accepted by parseProgram
  Indented,  // one statement per line, nesting by indentation
};

std::string formatExpression(const Expression& e, int loopsInScope);
std::string formatProgram(const Program& p,
                          SourceStyle style = SourceStyle::Compact);
std::string formatCommand(const DrawCommand& c);
std::string formatSpec(const Spec& s);

class ParseError : public DslError {
 public:
  using DslError::DslError;
};

Program parseProgram(std::string_view source);

/// Number of printed lines in indented form: statements plus non-empty
/// `if` guards.
int printedLineCount(const Program& p);

}  // namespace gsynth
