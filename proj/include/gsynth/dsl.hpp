#pragma once

// Graphics DSL: drawing commands, specs, program AST, execution and cost.

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gsynth {

inline constexpr int kGridSize = 16;

class DslError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CommandKind : std::uint8_t { Circle = 0, Rectangle = 1, Line = 2 };

const char* kindName(CommandKind kind);

/// A ground drawing primitive. Circles use (x1, y1) only.
///
/// Values are always normalized: rectangles have x1 < x2 and y1 < y2,
/// non-arrow lines have (x1,y1) < (x2,y2) lexicographically, and arrow lines
/// keep tail -> head order. Construct through the factories, which normalize
/// and reject degenerate shapes.
struct DrawCommand {
  CommandKind kind = CommandKind::Circle;
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;
  bool arrow = false;
  bool dashed = false;

  static DrawCommand circle(int x, int y);
  static DrawCommand rectangle(int x1, int y1, int x2, int y2);
  static DrawCommand line(int x1, int y1, int x2, int y2, bool arrow = false,
                          bool dashed = false);

  /// Normalizes a raw coordinate tuple; nullopt for zero-area/zero-length.
  static std::optional<DrawCommand> fromRaw(CommandKind kind,
                                            std::array<int, 4> raw, bool arrow,
                                            bool dashed);

  int arity() const { return kind == CommandKind::Circle ? 2 : 4; }
  std::array<int, 4> coords() const { return {x1, y1, x2, y2}; }
  bool onGrid(int gridSize = kGridSize) const;
  std::uint64_t key() const;

  friend bool operator==(const DrawCommand&, const DrawCommand&) = default;
};

/// Canonical command order: circles, then rectangles, then lines; within a
/// kind by the leftmost-topmost defining point, then the full field tuple.
bool canonicalLess(const DrawCommand& a, const DrawCommand& b);

struct DrawCommandHash {
  std::size_t operator()(const DrawCommand& c) const noexcept {
    return std::hash<std::uint64_t>{}(c.key());
  }
};

/// A set of drawing commands kept in canonical order.
class Spec {
 public:
  Spec() = default;
  explicit Spec(std::vector<DrawCommand> commands);

  bool insert(const DrawCommand& c);
  void merge(const Spec& other);
  bool contains(const DrawCommand& c) const;
  std::size_t size() const { return commands_.size(); }
  bool empty() const { return commands_.empty(); }
  const std::vector<DrawCommand>& commands() const { return commands_; }
  auto begin() const { return commands_.begin(); }
  auto end() const { return commands_.end(); }
  const DrawCommand& operator[](std::size_t i) const { return commands_[i]; }

  std::array<int, 3> kindCounts() const;
  bool isSubsetOf(const Spec& other) const;

  friend bool operator==(const Spec&, const Spec&) = default;

 private:
  std::vector<DrawCommand> commands_;
};

std::vector<DrawCommand> canonicalize(std::span<const DrawCommand> commands);

/// |a \ b| + |b \ a|
std::size_t symmetricDifference(const Spec& a, const Spec& b);
std::size_t intersectionSize(const Spec& a, const Spec& b);
/// |a n b| / |a u b|; two empty specs are identical (1).
double iou(const Spec& a, const Spec& b);

// ---------------------------------------------------------------------------
// Program AST

/// scale * Var + offset, or the constant `offset` when var is empty.
/// Variables are de Bruijn indices: 0 names the innermost enclosing loop.
struct Expression {
  int scale = 0;
  std::optional<int> var;
  int offset = 0;

  static Expression constant(int value) { return {0, std::nullopt, value}; }
  static Expression affine(int scale, int var, int offset) {
    return {scale, var, offset};
  }

  bool isConstant() const { return !var.has_value(); }
  /// env is ordered outermost-first.
  int eval(std::span<const int> env) const;

  friend bool operator==(const Expression&, const Expression&) = default;
};

struct Axis {
  enum class Dim : std::uint8_t { X, Y };
  Dim dim = Dim::Y;
  int value = 0;

  friend bool operator==(const Axis&, const Axis&) = default;
};

/// Reflect(Y=c) maps (x,y) -> (x, c-y); Reflect(X=c) maps (x,y) -> (c-x, y).
/// Arrow heads follow their mapped endpoint.
DrawCommand mirror(const DrawCommand& c, const Axis& axis);

struct Primitive {
  CommandKind kind = CommandKind::Circle;
  std::array<Expression, 4> args{};
  bool arrow = false;
  bool dashed = false;

  int arity() const { return kind == CommandKind::Circle ? 2 : 4; }
  friend bool operator==(const Primitive&, const Primitive&) = default;
};

struct Statement;

struct Program {
  std::vector<Statement> statements;

  bool empty() const { return statements.empty(); }
  friend bool operator==(const Program&, const Program&);
};

/// for (0 <= Var < bound) { if (Var > 0) { guarded }; body }
struct For {
  Expression bound;
  Program guarded;
  Program body;

  friend bool operator==(const For&, const For&) = default;
};

struct Reflect {
  Axis axis;
  Program body;

  friend bool operator==(const Reflect&, const Reflect&) = default;
};

struct Statement {
  std::variant<Primitive, For, Reflect> node;

  friend bool operator==(const Statement&, const Statement&) = default;
};

inline bool operator==(const Program& a, const Program& b) {
  return a.statements == b.statements;
}

// ---------------------------------------------------------------------------
// Execution

struct ExecOptions {
  /// Commands must land in [0, gridSize). nullopt disables the range check.
  std::optional<int> gridSize = kGridSize;
};

Spec execute(const Program& program, const ExecOptions& options = {});
/// Executes with pre-bound loop variables (outermost first).
Spec execute(const Program& program, std::span<const int> env,
             const ExecOptions& options = {});
DrawCommand evalPrimitive(const Primitive& p, std::span<const int> env);

/// Nesting depth: top-level primitives are at depth 1, each For/Reflect adds
/// one level. The empty program has depth 0.
int depth(const Program& program);

// ---------------------------------------------------------------------------
// Cost

/// Non-negative cost in thirds.
class Cost {
 public:
  constexpr Cost() = default;
  static constexpr Cost fromThirds(std::int64_t thirds) { return Cost(thirds); }
  static constexpr Cost whole(std::int64_t n) { return Cost(3 * n); }

  constexpr std::int64_t thirds() const { return thirds_; }
  double value() const { return static_cast<double>(thirds_) / 3.0; }
  std::string str() const;

  friend constexpr Cost operator+(Cost a, Cost b) {
    return Cost(a.thirds_ + b.thirds_);
  }
  friend constexpr auto operator<=>(const Cost&, const Cost&) = default;

 private:
  constexpr explicit Cost(std::int64_t thirds) : thirds_(thirds) {}
  std::int64_t thirds_ = 0;
};

struct CostOptions {
  /// Whether loop-bound expressions contribute coefficients.
  bool chargeBoundConstants = true;
};

/// Itemized cost: one per command node, a third per distinct coefficient
/// beyond the first, and one per loop of constant length 2.
struct CostBreakdown {
  int commandNodes = 0;
  int distinctCoefficients = 0;
  int lengthTwoLoops = 0;

  Cost total() const;
};

CostBreakdown costBreakdown(const Program& program,
                            const CostOptions& options = {});
Cost cost(const Program& program, const CostOptions& options = {});
/// All distinct scale/offset values, sorted.
std::vector<int> coefficients(const Program& program,
                              const CostOptions& options = {});

// ---------------------------------------------------------------------------
// Well-formedness

struct DslLimits {
  int gridSize = kGridSize;
  int coeffMin = -16;
  int coeffMax = 16;
  int maxDepth = 3;
};

/// Checks that the program lies in the searchable program space: no free
/// variables, depth within bound, coefficients in range, nonzero scale on
/// variable terms, every variable term sees at least two distinct values of
/// its variable, every loop variable is referenced in its loop, every loop
/// bound evaluates to at least one wherever it is reached, reflect bodies are
/// non-empty, and execution succeeds on the grid. Returns the first
/// violation, if any.
std::optional<std::string> normalFormViolation(const Program& program,
                                               const DslLimits& limits = {});

}  // namespace gsynth
