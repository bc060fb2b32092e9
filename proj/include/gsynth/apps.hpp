#pragma once

// Uses of synthesized programs: similarity in program-feature space and
// extrapolation by running loops for more iterations.

#include <array>
#include <string>
#include <vector>

#include "gsynth/dsl.hpp"
#include "gsynth/raster.hpp"

namespace gsynth {

inline constexpr int kSimilarityFeatures = 9;

/// [for, reflect, guarded blocks, circles, rectangles, lines,
///  statements at depth 1, 2, 3+]
using SimilarityFeatures = std::array<double, kSimilarityFeatures>;

SimilarityFeatures similarityFeatures(const Program& p);
/// L1 distance between similarity features. Distinct programs can share
/// features, so zero distance does not imply equality.
double programDistance(const Program& a, const Program& b);
/// Stand-in for a learned image metric: the spec symmetric difference.
double imageDistanceSurrogate(const Spec& a, const Spec& b);

/// Indices of `others` sorted by program distance to `query` (stable).
std::vector<std::size_t> nearestPrograms(const Program& query, const std::vector<Program>& others);

struct LoopChange {
  /// Preorder index among the program's For nodes.
  int loop = 0;
  int delta = 0;
};

struct ExtrapolationRequest {
  Program program;
  std::vector<LoopChange> changes;
};

class ExtrapolationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int loopCount(const Program& p);
/// One change per For node.
std::vector<LoopChange> allLoops(const Program& p, int delta);

struct Extrapolation {
  Program program;
  Spec spec;
  /// Grows past the default grid when commands leave it.
  Viewport view;
  std::string tikz;
};

/// Adds delta to the offset of each selected loop bound. Throws
/// ExtrapolationError on a selector beyond the last loop or a bound that
/// would drop below one.
Extrapolation extrapolate(const ExtrapolationRequest& req);

}  // namespace gsynth
